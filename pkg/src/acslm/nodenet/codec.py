"""Segment serialization.

Two codecs: ``store`` writes raw 16-bit PCM (2 bytes/sample plus header);
``lossless`` applies second-order delta coding before zlib, which compresses
tonal and quiet material well while staying exactly invertible on the int16
grid. Either way decode(encode(x)) == x bit-exactly for int16-grid samples,
and a CRC over the whole record catches corruption.
"""

import struct
import zlib

import numpy as np

from ..audio import SampleBuffer, dequantize16, quantize16
from ..errors import CodecError
from .segmenter import Segment

_MAGIC = b"ASEG"
_VERSION = 1
_CODECS = {"store": 0, "lossless": 1}
_CODEC_NAMES = {v: k for k, v in _CODECS.items()}


def _delta2(ints):
    ints = ints.astype(np.int64)
    head = np.zeros(2, dtype=np.int64)  # fixed-size header even for n < 2
    head[: min(2, len(ints))] = ints[:2]
    d = np.diff(ints, n=2) if len(ints) >= 3 else np.empty(0, dtype=np.int64)
    return head.astype("<i4"), d.astype("<i4")


def _undelta2(head, d):
    # invert the second difference: cumsum of first differences, twice
    x0, x1 = int(head[0]), int(head[1])
    first = np.concatenate(([x1 - x0], d.astype(np.int64))).cumsum()
    out = np.empty(len(d) + 2, dtype=np.int64)
    out[0] = x0
    out[1:] = x0 + np.cumsum(first)
    return out


def encode_segment(seg: Segment, codec="lossless") -> bytes:
    """Serialize a segment; see module docstring for codecs."""
    if codec not in _CODECS:
        raise CodecError(f"unknown codec {codec!r}")
    ints = quantize16(seg.audio.samples)
    if codec == "store":
        payload = ints.astype("<i2").tobytes()
    else:
        head, d = _delta2(ints)
        raw = head.astype("<i4").tobytes() + d.astype("<i4").tobytes()
        payload = zlib.compress(raw, level=6)
    node_bytes = seg.node_id.encode("utf-8")
    header = struct.pack(
        "<4sBBH", _MAGIC, _VERSION, _CODECS[codec], len(node_bytes)
    )
    header += node_bytes
    header += struct.pack(
        "<QdIQBdd",
        seg.seq,
        seg.start_time,
        seg.audio.sample_rate_hz,
        len(seg.audio),
        1 if seg.short else 0,
        float(seg.spl_summary.get("leq_dba", 0.0)),
        float(seg.spl_summary.get("max_dba", 0.0)),
    )
    body = header + struct.pack("<Q", len(payload)) + payload
    return body + struct.pack("<I", zlib.crc32(body))


def decode_segment(blob: bytes) -> Segment:
    """Inverse of :func:`encode_segment`; raises CodecError on corruption."""
    if len(blob) < 12:
        raise CodecError("segment blob truncated")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CodecError("segment checksum mismatch")
    magic, version, codec_id, node_len = struct.unpack("<4sBBH", body[:8])
    if magic != _MAGIC:
        raise CodecError(f"bad segment magic {magic!r}")
    if version != _VERSION:
        raise CodecError(f"unsupported segment version {version}")
    off = 8
    node_id = body[off : off + node_len].decode("utf-8")
    off += node_len
    seq, start_time, rate, n, flags, leq_dba, max_dba = struct.unpack(
        "<QdIQBdd", body[off : off + 45]
    )
    off += 45
    (paylen,) = struct.unpack("<Q", body[off : off + 8])
    off += 8
    payload = body[off : off + paylen]
    if len(payload) != paylen:
        raise CodecError("segment payload truncated")
    codec = _CODEC_NAMES.get(codec_id)
    if codec is None:
        raise CodecError(f"unknown codec id {codec_id}")
    if codec == "store":
        ints = np.frombuffer(payload, dtype="<i2").astype(np.int16)
        if len(ints) != n:
            raise CodecError("sample count mismatch")
    else:
        try:
            raw = zlib.decompress(payload)
        except zlib.error as exc:
            raise CodecError(f"lossless payload corrupt: {exc}") from None
        head = np.frombuffer(raw[:8], dtype="<i4")
        d = np.frombuffer(raw[8:], dtype="<i4")
        if len(d) + 2 != n and n >= 2:
            raise CodecError("sample count mismatch")
        if n < 2:
            ints = head[:n].astype(np.int16)
        else:
            ints = _undelta2(head, d).astype(np.int16)
    return Segment(
        node_id=node_id,
        seq=int(seq),
        start_time=float(start_time),
        audio=SampleBuffer(dequantize16(ints), int(rate)),
        spl_summary={"leq_dba": leq_dba, "max_dba": max_dba},
        short=bool(flags & 1),
    )
