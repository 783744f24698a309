"""Node runtime: capture, seal, store, upload.

The node's three activities (capture/segment, seal/store, upload) hand work
to each other through queues and are driven by a deterministic single-owner
scheduler, so simulated sessions are reproducible; time comes from a clock
object and the default virtual clock makes retry backoff instantaneous.

Raw audio exists only in memory: each captured minute is encoded, sealed
and dropped, leaving nothing but encrypted envelopes at rest in the backlog
directory.
"""

import time
from collections import deque

import numpy as np

from ..audio import (
    RNG_SCENE,
    SampleBuffer,
    amplitude_for_spl,
    dequantize16,
    quantize16,
    seeded_rng,
)
from ..errors import TransportError
from ..pipeline import SlmPipeline
from .backlog import BacklogStore
from .codec import encode_segment
from .envelope import seal_envelope
from .protocol import NodeCommand
from .segmenter import SEGMENT_SECONDS, Segment

BACKOFF_BASE_S = 5.0
BACKOFF_CAP_S = 300.0

# deterministic session epoch: 2020-01-01T00:00:00Z
DEFAULT_EPOCH = 1577836800.0


class VirtualClock:
    """Simulated time: sleeping advances instantly."""

    def __init__(self, epoch=DEFAULT_EPOCH):
        self.t = float(epoch)

    def now(self):
        return self.t

    def sleep(self, seconds):
        self.t += float(seconds)


class WallClock:
    def now(self):
        return time.time()

    def sleep(self, seconds):
        time.sleep(seconds)


class SyntheticSource:
    """Deterministic urban-flavored capture source (per node seed)."""

    def __init__(self, rate=44100, seed=1, base_level_db=65.0):
        self.rate = rate
        self.rng = seeded_rng(seed, RNG_SCENE)
        self.base_level_db = base_level_db
        self._pos = 0

    def read(self, n):
        t = (self._pos + np.arange(n)) / self.rate
        self._pos += n
        x = self.rng.standard_normal(n)
        x *= amplitude_for_spl(self.base_level_db) / np.sqrt(2.0)
        # a few tonal events per minute
        for _ in range(3):
            f = self.rng.uniform(200.0, 2000.0)
            level = self.rng.uniform(68.0, 80.0)
            start = self.rng.uniform(t[0], t[-1] - 1.0)
            m = (t >= start) & (t < start + 1.0)
            x[m] += amplitude_for_spl(level) * np.sin(2.0 * np.pi * f * t[m])
        return x


class NodeRuntime:
    """One sensor node against one server transport."""

    def __init__(
        self,
        node_id,
        source,
        server_public_key,
        transport,
        storage_dir,
        rate=44100,
        codec="lossless",
        clock=None,
        capacity_bytes=None,
        max_upload_attempts=10,
    ):
        self.node_id = node_id
        self.source = source
        self.public_key = server_public_key
        self.transport = transport
        self.rate = rate
        self.codec = codec
        self.clock = clock or VirtualClock()
        self.meter = SlmPipeline(rate=rate)
        self.meter.calibrate()
        self.gain_db = 0.0
        self.seq = 0
        self.software_version = "1.0"
        self.state = "running"
        self.audit_log = []
        self.applied_command_ids = set()
        self.max_upload_attempts = max_upload_attempts
        self._pending_command = None
        self._capture_q = deque()
        self._seal_q = deque()
        self._captured = []  # retained for end-to-end verification in tests
        self._capacity_override = capacity_bytes
        self.storage_dir = storage_dir
        self.backlog = None  # sized after the first encoded segment
        self._recover_backlog()

    def _recover_backlog(self):
        """Resume after a restart: reopen leftover envelopes and continue
        the sequence numbering past them."""
        from pathlib import Path

        leftover = sorted(Path(self.storage_dir).glob("*.env")) if Path(
            self.storage_dir
        ).exists() else []
        if not leftover:
            return
        largest = max(p.stat().st_size for p in leftover)
        capacity = self._capacity_override or int(2 * 24 * 60 * largest * 1.1)
        self.backlog = BacklogStore(self.storage_dir, capacity)
        self.seq = max(self.backlog.sequences()) + 1
        self._audit(
            f"recovered {len(self.backlog)} backlogged envelopes; resuming at seq {self.seq}"
        )

    # -- activities --------------------------------------------------------

    def _audit(self, event):
        self.audit_log.append((self.clock.now(), event))

    def _capture_minute(self):
        n = int(round(SEGMENT_SECONDS * self.rate))
        raw = self.source.read(n)
        if self.gain_db:
            raw = raw * 10.0 ** (self.gain_db / 20.0)
        # capture quantizes to the 16-bit grid; this is the node's source
        # of truth for bit-exact delivery
        samples = dequantize16(quantize16(raw))
        buf = SampleBuffer(samples, self.rate).validate_full_scale()
        stream = self.meter.open_stream()
        stream.feed(buf.samples)
        series = stream.result()
        seg = Segment(
            node_id=self.node_id,
            seq=self.seq,
            start_time=self.clock.now(),
            audio=buf,
            spl_summary={
                "leq_dba": stream.leq_dba,
                "max_dba": series.max_hold_dba,
            },
        )
        self.seq += 1
        self._captured.append(buf.samples.copy())
        self._capture_q.append(seg)

    def _seal_pending(self):
        while self._capture_q:
            seg = self._capture_q.popleft()
            blob = encode_segment(seg, self.codec)
            if self.backlog is None:
                capacity = self._capacity_override or int(2 * 24 * 60 * len(blob) * 1.1)
                self.backlog = BacklogStore(self.storage_dir, capacity)
                self._audit(f"backlog capacity {capacity} bytes")
            env = seal_envelope(blob, self.public_key, self.node_id, seg.seq)
            evicted = self.backlog.put(seg.seq, env.to_bytes())
            for seq in evicted:
                self._audit(f"evicted seq {seq}")
            # plaintext minute dropped here; only the envelope is at rest
            self._seal_q.append(seg.seq)

    def _upload_once(self, seq) -> bool:
        """Attempt one exchange; apply ack and any piggybacked command."""
        from .protocol import parse_record, status_record

        blob = self.backlog.get(seq) + status_record(
            seq, sorted(self.applied_command_ids)[-32:]
        )
        try:
            response = self.transport.exchange(blob)
        except TransportError as exc:
            self._audit(f"upload seq {seq} failed: {exc}")
            return False
        rec = parse_record(response)
        if rec.get("type") != "ack":
            self._audit(f"unexpected response type {rec.get('type')!r}")
            return False
        ack_seq = int(rec.get("seq", -1))
        if ack_seq >= 0:
            self.backlog.remove_through(ack_seq)
        if "command" in rec and rec["command"] is not None:
            self._pending_command = NodeCommand.from_dict(rec["command"])
        return seq <= ack_seq

    def _upload_pending(self):
        if self.backlog is None:
            return
        for seq in self.backlog.sequences():
            if seq not in self.backlog:  # cleared by an earlier cumulative ack
                continue
            backoff = BACKOFF_BASE_S
            for _ in range(self.max_upload_attempts):
                if self._upload_once(seq):
                    break
                self.clock.sleep(backoff)
                backoff = min(backoff * 2.0, BACKOFF_CAP_S)

    def _apply_pending_command(self):
        cmd = self._pending_command
        self._pending_command = None
        if cmd is None:
            return
        if cmd.command_id in self.applied_command_ids:
            self._audit(f"duplicate command {cmd.command_id} ignored")
            return
        self.applied_command_ids.add(cmd.command_id)
        if cmd.kind == "flush":
            if self.backlog is not None:
                self.backlog.flush()
            self._audit("flush: backlog cleared")
        elif cmd.kind == "reboot":
            self.state = "rebooting"
            self._audit("reboot requested")
            self.state = "running"
            self._audit("reboot complete")
        elif cmd.kind == "gain_adjust":
            self.gain_db += cmd.delta_db
            self._audit(f"gain adjusted by {cmd.delta_db:+g} dB to {self.gain_db:+g} dB")
        elif cmd.kind == "update":
            self.software_version = cmd.version or self.software_version
            self._audit(f"software updated to {self.software_version}")

    def apply_command(self, cmd: NodeCommand):
        self._pending_command = cmd
        self._apply_pending_command()

    # -- session -----------------------------------------------------------

    def run(self, minutes, drain=True):
        """Capture and upload ``minutes`` one-minute segments.

        With ``drain`` the session ends by retrying the backlog until it is
        empty (or attempts are exhausted), so lossy transports still deliver
        everything by session end.
        """
        for _ in range(int(minutes)):
            self._apply_pending_command()
            self._capture_minute()
            self._seal_pending()
            self._upload_pending()
            self.clock.sleep(SEGMENT_SECONDS)
        if drain and self.backlog is not None:
            for _ in range(20):
                if not len(self.backlog):
                    break
                self._upload_pending()
        self._apply_pending_command()

    @property
    def captured_audio(self):
        return self._captured
