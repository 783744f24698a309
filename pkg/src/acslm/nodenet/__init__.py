"""Sensor-node pipeline and ingest server: one-minute segments, lossless
encoding, hybrid-encrypted envelopes, backlog and upload with a piggybacked
command channel."""

from .backlog import BacklogStore
from .codec import decode_segment, encode_segment
from .envelope import (
    EncryptedEnvelope,
    generate_keypair,
    open_envelope,
    seal_envelope,
)
from .node import NodeRuntime, SyntheticSource, VirtualClock
from .protocol import NodeCommand
from .segmenter import Segment, segment_stream
from .server import IngestServer
from .transport import LoopbackTransport, LossyTransport

__all__ = [
    "BacklogStore",
    "EncryptedEnvelope",
    "IngestServer",
    "LoopbackTransport",
    "LossyTransport",
    "NodeCommand",
    "NodeRuntime",
    "Segment",
    "SyntheticSource",
    "VirtualClock",
    "decode_segment",
    "encode_segment",
    "generate_keypair",
    "open_envelope",
    "seal_envelope",
    "segment_stream",
]
