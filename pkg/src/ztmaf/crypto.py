"""Deterministic crypto primitives and the canonical request encoding.

The byte layout produced by canonical_encode is normative: it is what gets
hashed into a request digest and signed, so it must be bit-identical across
platforms. Context fields are quantized (1e-3 m/s, 1e-3 m, 1e-6 unitless)
before packing for exactly that reason.

Signatures are Ed25519 (deterministic, so whole runs stay reproducible);
the session-key PRF is HMAC-SHA256.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Set

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .domain import ContextVector, NodeId

COORD_LIMIT_M = float(2**20)  # encodable coordinate range is +/- 2^20 m
_U32_MAX = 2**32 - 1


class EncodingOverflow(ValueError):
    """A field does not fit the fixed-width canonical layout."""


class InvalidContext(ValueError):
    """A context or trust field is outside its valid domain."""


@dataclass(frozen=True)
class KeyPair:
    private: bytes = field(repr=False)
    public: bytes

    def __post_init__(self):
        if len(self.private) != 32 or len(self.public) != 32:
            raise ValueError("keys must be 32 bytes")


@dataclass(frozen=True)
class SharedSecret:
    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != 32:
            raise ValueError("shared secret must be 32 bytes")


@dataclass(frozen=True)
class Nonce:
    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != 16:
            raise ValueError("nonce must be 16 bytes")


@dataclass(frozen=True)
class SessionKey:
    bytes: bytes
    established_s: float = 0.0
    lifetime_s: float = 120.0

    @property
    def expires_s(self) -> float:
        return self.established_s + self.lifetime_s


def keypair_from_seed(seed: bytes) -> KeyPair:
    """Derive an Ed25519 keypair from a 32-byte seed (deterministic)."""
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    priv = Ed25519PrivateKey.from_private_bytes(seed)
    return KeyPair(private=seed, public=priv.public_key().public_bytes_raw())


def _quantize(value: float, scale: float, what: str) -> int:
    word = round(value * scale)
    if not 0 <= word <= _U32_MAX:
        raise EncodingOverflow(f"{what}={value} does not fit a u32 at scale {scale}")
    return word


def canonical_encode(node: NodeId, ctx: ContextVector, trust: float) -> bytes:
    """Normative preimage layout: 1-byte label length, label, then five
    big-endian u32 words round(speed*1e3), round((x+2^20)*1e3),
    round((y+2^20)*1e3), round(behavior*1e6), round(trust*1e6)."""
    for name, v in (("speed", ctx.speed_mps), ("x", ctx.location[0]),
                    ("y", ctx.location[1]), ("behavior", ctx.behavior),
                    ("trust", trust)):
        if not math.isfinite(v):
            raise InvalidContext(f"non-finite {name}: {v}")
    if not 0.0 <= trust <= 1.0:
        raise InvalidContext(f"trust {trust} outside [0, 1]")
    x, y = ctx.location
    if abs(x) > COORD_LIMIT_M or abs(y) > COORD_LIMIT_M:
        raise EncodingOverflow(f"coordinate ({x}, {y}) outside +/-{COORD_LIMIT_M:.0f} m")
    label = node.label.encode("utf-8")
    if not label or len(label) > 255:
        raise InvalidContext(f"label {node.label!r} unencodable")
    words = (
        _quantize(ctx.speed_mps, 1e3, "speed"),
        _quantize(x + COORD_LIMIT_M, 1e3, "x"),
        _quantize(y + COORD_LIMIT_M, 1e3, "y"),
        _quantize(ctx.behavior, 1e6, "behavior"),
        _quantize(trust, 1e6, "trust"),
    )
    return bytes([len(label)]) + label + struct.pack(">5I", *words)


def hash_request(preimage: bytes) -> bytes:
    """SHA-256 digest of the canonical preimage."""
    return hashlib.sha256(preimage).digest()


def sign(message: bytes, key: KeyPair) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(key.private).sign(message)


def verify(signature: bytes, message: bytes, public: bytes) -> bool:
    """True iff the signature is valid; malformed input rejects, never raises."""
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def derive_session_key(
    shared: SharedSecret,
    nonce: Nonce,
    established_s: float = 0.0,
    lifetime_s: float = 120.0,
) -> SessionKey:
    """K_sess = HMAC-SHA256(key=shared, message=nonce); both sides match."""
    raw = _hmac.new(shared.bytes, nonce.bytes, hashlib.sha256).digest()
    return SessionKey(bytes=raw, established_s=established_s, lifetime_s=lifetime_s)


def provision_shared_secret(master_secret: bytes, vehicle_label: str, fog_label: str) -> SharedSecret:
    """Deterministic stand-in for offline registration of a pair secret."""
    msg = vehicle_label.encode("utf-8") + b"|" + fog_label.encode("utf-8")
    return SharedSecret(_hmac.new(master_secret, msg, hashlib.sha256).digest())


class NonceStream:
    """Per-vehicle seeded nonce source; re-emission within a run is a bug."""

    def __init__(self, rng):
        self._rng = rng
        self._seen: Set[bytes] = set()

    def next(self) -> Nonce:
        raw = bytes(self._rng.bytes(16))
        assert raw not in self._seen, "nonce stream emitted a duplicate"
        self._seen.add(raw)
        return Nonce(raw)


class ChallengeStream:
    """Fog-side source of fresh 16-byte challenge values."""

    def __init__(self, rng):
        self._rng = rng

    def next(self) -> bytes:
        return bytes(self._rng.bytes(16))
