"""Control channel records and node commands.

Control messages are single-line UTF-8 JSON records with fields
{type, seq, command?}; commands ride back on upload acknowledgements, at
most one per exchange.
"""

import json
import uuid
from dataclasses import dataclass, field

from ..errors import AcslmError

COMMAND_KINDS = ("flush", "reboot", "gain_adjust", "update")
MAX_GAIN_DELTA_DB = 20.0


@dataclass
class NodeCommand:
    kind: str
    delta_db: float = 0.0
    version: str = ""
    issued_at: float = 0.0
    command_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise AcslmError(f"unknown command kind {self.kind!r}")
        if self.kind == "gain_adjust" and abs(self.delta_db) > MAX_GAIN_DELTA_DB:
            raise AcslmError(
                f"gain delta {self.delta_db} dB outside +-{MAX_GAIN_DELTA_DB} dB"
            )

    def to_dict(self):
        d = {"id": self.command_id, "kind": self.kind}
        if self.kind == "gain_adjust":
            d["delta_db"] = self.delta_db
        if self.kind == "update":
            d["version"] = self.version
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            delta_db=float(d.get("delta_db", 0.0)),
            version=d.get("version", ""),
            command_id=d.get("id", uuid.uuid4().hex),
        )


def ack_record(seq, command=None):
    """Server -> node acknowledgement line."""
    rec = {"type": "ack", "seq": int(seq)}
    if command is not None:
        rec["command"] = command.to_dict()
    return (json.dumps(rec, sort_keys=True) + "\n").encode("utf-8")


def status_record(seq, applied_command_ids=()):
    """Node -> server status line accompanying an upload.

    Confirms which command ids the node has applied; the server keeps
    re-offering a command until it appears here, so command delivery is
    at-least-once and node-side application is idempotent by id.
    """
    rec = {"type": "status", "seq": int(seq), "applied": list(applied_command_ids)}
    return (json.dumps(rec, sort_keys=True) + "\n").encode("utf-8")


def parse_record(line: bytes):
    try:
        rec = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AcslmError(f"bad control record: {exc}") from None
    if "type" not in rec:
        raise AcslmError("control record missing type")
    return rec
