"""Ingest server: decrypt, decode, verify and persist uploaded segments.

Persistence is an append-only blob store (the verified plaintext segment
records) plus a CSV index keyed by (node_id, start_time). Envelopes that
fail authentication are quarantined, never partially persisted. Uploads are
deduplicated by (node_id, seq); the acknowledgement carries the highest
contiguous sequence seen so the node can clear its backlog.
"""

import threading
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path

from ..errors import AcslmError, EnvelopeError
from .codec import decode_segment
from .envelope import EncryptedEnvelope, open_envelope
from .protocol import NodeCommand, ack_record, parse_record

INDEX_HEADER = "node_id,seq,start_time,leq_dba,max_dba,short,blob\n"


@dataclass
class StoredRecord:
    node_id: str
    seq: int
    start_time: float
    leq_dba: float
    max_dba: float
    short: bool
    blob_path: Path

    def load_segment(self):
        return decode_segment(self.blob_path.read_bytes())


class IngestServer:
    """Central store for one or many nodes."""

    def __init__(self, store_dir, private_key_pem: bytes):
        self.store = Path(store_dir)
        (self.store / "blobs").mkdir(parents=True, exist_ok=True)
        (self.store / "quarantine").mkdir(parents=True, exist_ok=True)
        self.private_key_pem = private_key_pem
        self.records = {}  # (node_id, seq) -> StoredRecord
        self.by_time = {}  # (node_id, start_time) -> StoredRecord
        self.command_queues = defaultdict(deque)
        self.quarantine_count = 0
        self._lock = threading.Lock()
        self._index_path = self.store / "index.csv"
        if not self._index_path.exists():
            self._index_path.write_text(INDEX_HEADER)

    # -- command channel -------------------------------------------------

    def queue_command(self, node_id, command: NodeCommand):
        with self._lock:
            self.command_queues[node_id].append(command)

    def _head_command(self, node_id):
        """Current command for a node; stays queued until confirmed applied."""
        q = self.command_queues.get(node_id)
        return q[0] if q else None

    def _retire_commands(self, node_id, applied_ids):
        with self._lock:
            q = self.command_queues.get(node_id)
            while q and q[0].command_id in applied_ids:
                q.popleft()

    # -- ingest ----------------------------------------------------------

    def highest_contiguous_seq(self, node_id):
        seqs = {r.seq for (nid, _), r in self.records.items() if nid == node_id}
        seq = -1
        while seq + 1 in seqs:
            seq += 1
        return seq

    def ingest(self, envelope_bytes: bytes):
        """Verify and persist one envelope; returns the StoredRecord.

        Raises EnvelopeError (after quarantining the blob) on any failure;
        duplicate (node_id, seq) uploads return the already-stored record.
        """
        try:
            payload = open_envelope(envelope_bytes, self.private_key_pem)
            seg = decode_segment(payload)
        except Exception as exc:
            with self._lock:
                self.quarantine_count += 1
                qpath = self.store / "quarantine" / f"q{self.quarantine_count:06d}.env"
                qpath.write_bytes(envelope_bytes)
            raise EnvelopeError(f"ingest failed, envelope quarantined: {exc}") from None
        with self._lock:
            key = (seg.node_id, seg.seq)
            if key in self.records:
                return self.records[key]
            blob_path = self.store / "blobs" / f"{seg.node_id}-{seg.seq:012d}.aseg"
            blob_path.write_bytes(payload)
            record = StoredRecord(
                node_id=seg.node_id,
                seq=seg.seq,
                start_time=seg.start_time,
                leq_dba=float(seg.spl_summary.get("leq_dba", 0.0)),
                max_dba=float(seg.spl_summary.get("max_dba", 0.0)),
                short=seg.short,
                blob_path=blob_path,
            )
            self.records[key] = record
            self.by_time[(seg.node_id, seg.start_time)] = record
            with open(self._index_path, "a") as fh:
                fh.write(
                    f"{record.node_id},{record.seq},{record.start_time:.3f},"
                    f"{record.leq_dba:.4f},{record.max_dba:.4f},"
                    f"{int(record.short)},{blob_path.name}\n"
                )
            return record

    def handle_exchange(self, frame: bytes) -> bytes:
        """One upload exchange: envelope plus an optional trailing status
        record. Ingest, retire confirmed commands, acknowledge with the
        highest contiguous sequence and at most one pending command."""
        try:
            _, consumed = EncryptedEnvelope.parse(frame)
        except EnvelopeError:
            consumed = len(frame)
        envelope_bytes, trailer = frame[:consumed], frame[consumed:]
        node_hint = None
        if trailer.strip():
            try:
                status = parse_record(trailer.strip())
            except AcslmError:
                status = None
            if status and status.get("type") == "status":
                node_hint = status
        try:
            record = self.ingest(envelope_bytes)
            node_id = record.node_id
        except EnvelopeError:
            return ack_record(-1)
        if node_hint is not None:
            self._retire_commands(node_id, set(node_hint.get("applied", ())))
        return ack_record(self.highest_contiguous_seq(node_id), self._head_command(node_id))

    # -- queries ----------------------------------------------------------

    def get_record(self, node_id, start_time):
        return self.by_time.get((node_id, float(start_time)))

    def records_for(self, node_id):
        return sorted(
            (r for (nid, _), r in self.records.items() if nid == node_id),
            key=lambda r: r.seq,
        )
