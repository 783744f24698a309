"""Shipped data assets (synthetic response curves)."""
