"""Filesystem-backed envelope backlog with oldest-first eviction."""

import os
from pathlib import Path

from ..errors import BacklogError


class BacklogStore:
    """Sealed envelopes on disk, ordered by sequence number.

    Total size never exceeds ``capacity_bytes``; inserting beyond capacity
    evicts the lowest sequence numbers until the new envelope fits. An
    envelope larger than the whole capacity is rejected.
    """

    def __init__(self, directory, capacity_bytes):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        if capacity_bytes <= 0:
            raise BacklogError("capacity must be positive")
        self.capacity_bytes = int(capacity_bytes)
        self._sizes = {}
        for p in self.dir.glob("*.env"):
            self._sizes[int(p.stem)] = p.stat().st_size

    def _path(self, seq):
        return self.dir / f"{seq:012d}.env"

    @property
    def total_bytes(self):
        return sum(self._sizes.values())

    def sequences(self):
        return sorted(self._sizes)

    def __contains__(self, seq):
        return seq in self._sizes

    def __len__(self):
        return len(self._sizes)

    def put(self, seq, blob: bytes):
        """Insert an envelope, evicting oldest entries as needed.

        Returns the list of evicted sequence numbers.
        """
        if len(blob) > self.capacity_bytes:
            raise BacklogError(
                f"envelope of {len(blob)} bytes exceeds capacity {self.capacity_bytes}"
            )
        evicted = []
        while self.total_bytes + len(blob) > self.capacity_bytes:
            evicted.append(self.evict_oldest())
        self._path(seq).write_bytes(blob)
        self._sizes[seq] = len(blob)
        return evicted

    def evict_oldest(self):
        if not self._sizes:
            raise BacklogError("backlog empty")
        seq = min(self._sizes)
        self.remove(seq)
        return seq

    def get(self, seq) -> bytes:
        if seq not in self._sizes:
            raise BacklogError(f"seq {seq} not in backlog")
        return self._path(seq).read_bytes()

    def remove(self, seq):
        if seq in self._sizes:
            try:
                os.unlink(self._path(seq))
            except FileNotFoundError:
                pass
            del self._sizes[seq]

    def remove_through(self, seq):
        """Drop every entry with sequence <= seq (acknowledged uploads)."""
        for s in [s for s in self._sizes if s <= seq]:
            self.remove(s)

    def flush(self):
        for s in list(self._sizes):
            self.remove(s)
