"""Upload transports: length-prefixed binary frames over a byte stream.

``LoopbackTransport`` wires a node directly to an in-process server;
``LossyTransport`` wraps any transport with seeded random request/response
loss for retry testing. A minimal TCP client/server pair carries the same
frames across real sockets for the command-line tools.
"""

import socket
import socketserver
import struct
import threading

import numpy as np

from ..audio import RNG_TRANSPORT, seeded_rng
from ..errors import TransportError

_LEN = struct.Struct("<I")


def write_frame(sock, payload: bytes):
    sock.sendall(_LEN.pack(len(payload)) + payload)


def read_frame(sock) -> bytes:
    header = _read_exact(sock, _LEN.size)
    (n,) = _LEN.unpack(header)
    return _read_exact(sock, n)


def _read_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("connection closed mid-frame")
        buf += chunk
    return buf


class LoopbackTransport:
    """Direct in-process exchange against an IngestServer."""

    def __init__(self, server):
        self.server = server

    def exchange(self, request: bytes) -> bytes:
        return self.server.handle_exchange(request)


class LossyTransport:
    """Drops requests or responses with the given probability (seeded).

    A dropped request never reaches the server; a dropped response means the
    server processed the upload but the node sees a failure, exercising the
    duplicate/ack path.
    """

    def __init__(self, inner, drop_rate=0.2, seed=7):
        self.inner = inner
        self.drop_rate = float(drop_rate)
        self.rng = seeded_rng(seed, RNG_TRANSPORT)
        self.dropped_requests = 0
        self.dropped_responses = 0

    def exchange(self, request: bytes) -> bytes:
        if self.rng.random() < self.drop_rate:
            self.dropped_requests += 1
            raise TransportError("request lost")
        response = self.inner.exchange(request)
        if self.rng.random() < self.drop_rate:
            self.dropped_responses += 1
            raise TransportError("response lost")
        return response


class TcpTransport:
    """One connection per exchange; fine for minute-cadence uploads."""

    def __init__(self, host, port, timeout_s=10.0):
        self.host = host
        self.port = int(port)
        self.timeout_s = timeout_s

    def exchange(self, request: bytes) -> bytes:
        try:
            with socket.create_connection((self.host, self.port), self.timeout_s) as sock:
                sock.settimeout(self.timeout_s)
                write_frame(sock, request)
                return read_frame(sock)
        except OSError as exc:
            raise TransportError(f"tcp exchange failed: {exc}") from None


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            request = read_frame(self.request)
        except TransportError:
            return
        response = self.server.ingest_server.handle_exchange(request)
        try:
            write_frame(self.request, response)
        except OSError:
            pass


class TcpFrameServer(socketserver.ThreadingTCPServer):
    """Serves an IngestServer over TCP frames."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, ingest_server):
        super().__init__(address, _Handler)
        self.ingest_server = ingest_server

    def serve_background(self):
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
