"""Hybrid-encrypted segment envelopes.

Each segment is sealed under a fresh random AES-128 key in GCM mode with a
12-byte nonce; the key is wrapped with RSA-2048 OAEP so only the holder of
the server's private key can open it. The header (including a SHA-256 of
the plaintext) is bound into the GCM authentication as associated data, so
any tampering with header or ciphertext fails authentication and yields
zero plaintext bytes.
"""

import hashlib
import os
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import EnvelopeError

MAGIC = b"ACSEG"
VERSION = 1
_NONCE_BYTES = 12
_KEY_BYTES = 16  # AES-128


def generate_keypair():
    """RSA-2048 keypair as (private_pem, public_pem) bytes."""
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    private_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    public_pem = key.public_key().public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    return private_pem, public_pem


def _oaep():
    return padding.OAEP(
        mgf=padding.MGF1(algorithm=hashes.SHA256()),
        algorithm=hashes.SHA256(),
        label=None,
    )


@dataclass
class EncryptedEnvelope:
    node_id: str
    seq: int
    wrapped_key: bytes
    nonce: bytes
    payload_hash: bytes
    ciphertext: bytes  # includes the GCM tag

    def header_bytes(self):
        node = self.node_id.encode("utf-8")
        return (
            struct.pack("<5sBH", MAGIC, VERSION, len(node))
            + node
            + struct.pack("<QH", self.seq, len(self.wrapped_key))
            + self.wrapped_key
            + self.nonce
            + self.payload_hash
        )

    def to_bytes(self):
        return self.header_bytes() + struct.pack("<Q", len(self.ciphertext)) + self.ciphertext

    @classmethod
    def parse(cls, blob: bytes):
        """Parse an envelope from the head of ``blob``; returns
        (envelope, bytes_consumed). Trailing data is left to the caller."""
        try:
            magic, version, node_len = struct.unpack("<5sBH", blob[:8])
            if magic != MAGIC:
                raise EnvelopeError(f"bad envelope magic {magic!r}")
            if version != VERSION:
                raise EnvelopeError(f"unsupported envelope version {version}")
            off = 8
            node_id = blob[off : off + node_len].decode("utf-8")
            off += node_len
            seq, key_len = struct.unpack("<QH", blob[off : off + 10])
            off += 10
            wrapped = blob[off : off + key_len]
            off += key_len
            nonce = blob[off : off + _NONCE_BYTES]
            off += _NONCE_BYTES
            payload_hash = blob[off : off + 32]
            off += 32
            (clen,) = struct.unpack("<Q", blob[off : off + 8])
            off += 8
            ciphertext = blob[off : off + clen]
            if len(ciphertext) != clen or len(nonce) != _NONCE_BYTES or len(payload_hash) != 32:
                raise EnvelopeError("envelope truncated")
        except (struct.error, UnicodeDecodeError) as exc:
            raise EnvelopeError(f"malformed envelope: {exc}") from None
        env = cls(node_id, int(seq), wrapped, nonce, payload_hash, ciphertext)
        return env, off + clen

    @classmethod
    def from_bytes(cls, blob: bytes):
        env, consumed = cls.parse(blob)
        if consumed != len(blob):
            raise EnvelopeError("trailing bytes after envelope")
        return env


def seal_envelope(payload: bytes, server_public_key_pem: bytes, node_id="node",
                  seq=0) -> EncryptedEnvelope:
    """Seal a payload; a fresh content key and nonce are drawn per call."""
    public_key = serialization.load_pem_public_key(server_public_key_pem)
    content_key = os.urandom(_KEY_BYTES)
    nonce = os.urandom(_NONCE_BYTES)
    wrapped = public_key.encrypt(content_key, _oaep())
    env = EncryptedEnvelope(
        node_id=node_id,
        seq=int(seq),
        wrapped_key=wrapped,
        nonce=nonce,
        payload_hash=hashlib.sha256(payload).digest(),
        ciphertext=b"",
    )
    aad = env.header_bytes()
    env.ciphertext = AESGCM(content_key).encrypt(nonce, payload, aad)
    return env


def open_envelope(env, private_key_pem: bytes) -> bytes:
    """Unwrap, decrypt and verify; raises EnvelopeError without emitting any
    plaintext on wrong keys or tampering."""
    if isinstance(env, (bytes, bytearray)):
        env = EncryptedEnvelope.from_bytes(bytes(env))
    private_key = serialization.load_pem_private_key(private_key_pem, password=None)
    try:
        content_key = private_key.decrypt(env.wrapped_key, _oaep())
    except ValueError as exc:
        raise EnvelopeError("key unwrap failed (wrong private key?)") from None
    if len(content_key) != _KEY_BYTES:
        raise EnvelopeError("unwrapped content key has wrong size")
    try:
        payload = AESGCM(content_key).decrypt(env.nonce, env.ciphertext, env.header_bytes())
    except InvalidTag:
        raise EnvelopeError("authentication failed (tampered envelope)") from None
    if hashlib.sha256(payload).digest() != env.payload_hash:
        raise EnvelopeError("payload hash mismatch")
    return payload
