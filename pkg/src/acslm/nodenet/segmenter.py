"""Gapless one-minute segmentation of a continuous sample stream."""

from dataclasses import dataclass, field

import numpy as np

from ..audio import SampleBuffer

SEGMENT_SECONDS = 60.0


@dataclass
class Segment:
    """One minute of captured audio plus its level summary."""

    node_id: str
    seq: int
    start_time: float  # unix seconds, UTC
    audio: SampleBuffer
    spl_summary: dict = field(default_factory=dict)  # {leq_dba, max_dba}
    short: bool = False

    @property
    def duration_s(self):
        return self.audio.duration_s


def segment_stream(source, node_id="node", rate=44100, start_time=0.0,
                   segment_s=SEGMENT_SECONDS):
    """Cut an iterable of sample chunks into gapless fixed-length segments.

    Segment boundaries fall on whole samples; concatenating the produced
    segments reproduces the source prefix bit-exactly. A final partial
    segment (source underrun) is yielded with ``short=True``.
    """
    per_segment = int(round(segment_s * rate))
    pending = []
    pending_len = 0
    seq = 0

    def make(segment_samples, short):
        nonlocal seq
        seg = Segment(
            node_id=node_id,
            seq=seq,
            start_time=start_time + seq * segment_s,
            audio=SampleBuffer(segment_samples, rate),
            short=short,
        )
        seq += 1
        return seg

    for chunk in source:
        chunk = np.asarray(chunk, dtype=np.float64)
        pending.append(chunk)
        pending_len += len(chunk)
        while pending_len >= per_segment:
            flat = np.concatenate(pending)
            yield make(flat[:per_segment], short=False)
            rest = flat[per_segment:]
            pending = [rest] if len(rest) else []
            pending_len = len(rest)
    if pending_len:
        yield make(np.concatenate(pending), short=True)
