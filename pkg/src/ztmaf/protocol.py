"""The authentication handshake: request construction, fog-side verification,
threshold decision, session establishment, and the fallback challenge round.

Everything here is a pure function of its inputs plus explicitly passed
caches/registries, so the pieces can be exercised without the simulator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

from .crypto import (
    KeyPair,
    Nonce,
    NonceStream,
    SessionKey,
    SharedSecret,
    canonical_encode,
    derive_session_key,
    hash_request,
    sign,
    verify,
)
from .domain import ContextVector, NodeId

ACK_TOKEN_BYTES = 64


class SessionAborted(RuntimeError):
    """The vehicle left range before session completion."""


class RejectReason(Enum):
    UNKNOWN_IDENTITY = "UnknownIdentity"
    SPOOF_SUSPECTED = "SpoofSuspected"
    REPLAY_DETECTED = "ReplayDetected"


class Decision(Enum):
    ACCEPT = "Accept"
    FALLBACK = "Fallback"


@dataclass(frozen=True)
class AuthRequest:
    vehicle_id: NodeId
    ctx: ContextVector
    claimed_trust: float
    request_digest: bytes
    signature: bytes
    nonce: Nonce
    sent_at_s: float


@dataclass(frozen=True)
class SessionRecord:
    vehicle_id: NodeId
    fog_id: NodeId
    key: SessionKey
    trust_at_grant: float
    established_s: float
    via_fallback: bool


@dataclass(frozen=True)
class VerifyResult:
    verified: bool
    reason: Optional[RejectReason] = None

    @staticmethod
    def ok() -> "VerifyResult":
        return VerifyResult(True)

    @staticmethod
    def rejected(reason: RejectReason) -> "VerifyResult":
        return VerifyResult(False, reason)


class ReplayCache:
    """Set of (vehicle label, nonce) pairs with TTL-based eviction.

    Membership is exact while an entry is resident; ttl_s may be math.inf
    for the never-evict configuration.
    """

    def __init__(self, ttl_s: float = 30.0):
        if not ttl_s > 0:
            raise ValueError("ttl_s must be positive")
        self.ttl_s = ttl_s
        self._entries: Dict[Tuple[str, bytes], float] = {}

    def _evict(self, now_s: float) -> None:
        if self.ttl_s == float("inf"):
            return
        cutoff = now_s - self.ttl_s
        stale = [k for k, t in self._entries.items() if t < cutoff]
        for k in stale:
            del self._entries[k]

    def seen(self, vehicle_label: str, nonce: Nonce, now_s: float) -> bool:
        self._evict(now_s)
        return (vehicle_label, nonce.bytes) in self._entries

    def insert(self, vehicle_label: str, nonce: Nonce, now_s: float) -> None:
        self._evict(now_s)
        self._entries[(vehicle_label, nonce.bytes)] = now_s

    def __len__(self) -> int:
        return len(self._entries)


def build_request(
    vehicle_id: NodeId,
    ctx: ContextVector,
    local_trust: float,
    keypair: KeyPair,
    nonces: NonceStream,
    sent_at_s: float,
) -> AuthRequest:
    """Vehicle side: hash the canonical context preimage and sign it."""
    preimage = canonical_encode(vehicle_id, ctx, local_trust)
    digest = hash_request(preimage)
    return AuthRequest(
        vehicle_id=vehicle_id,
        ctx=ctx,
        claimed_trust=local_trust,
        request_digest=digest,
        signature=sign(digest, keypair),
        nonce=nonces.next(),
        sent_at_s=sent_at_s,
    )


def verify_request(
    req: AuthRequest,
    registry: Dict[str, bytes],
    cache: ReplayCache,
    now_s: float,
) -> VerifyResult:
    """Fog side: identity, signature/digest, then replay freshness.

    All rejections are returns; a fresh, valid request gets its nonce
    inserted into the replay cache.
    """
    public = registry.get(req.vehicle_id.label)
    if public is None:
        return VerifyResult.rejected(RejectReason.UNKNOWN_IDENTITY)
    try:
        expected = hash_request(canonical_encode(req.vehicle_id, req.ctx, req.claimed_trust))
    except ValueError:
        return VerifyResult.rejected(RejectReason.SPOOF_SUSPECTED)
    if expected != req.request_digest or not verify(req.signature, req.request_digest, public):
        return VerifyResult.rejected(RejectReason.SPOOF_SUSPECTED)
    if cache.seen(req.vehicle_id.label, req.nonce, now_s):
        return VerifyResult.rejected(RejectReason.REPLAY_DETECTED)
    cache.insert(req.vehicle_id.label, req.nonce, now_s)
    return VerifyResult.ok()


def decide(updated_trust: float, theta: float) -> Decision:
    """Inclusive threshold: trust exactly at theta is accepted."""
    if not 0.0 <= updated_trust <= 1.0 or not 0.0 <= theta <= 1.0:
        raise ValueError("trust and theta must be in [0, 1]")
    return Decision.ACCEPT if updated_trust >= theta else Decision.FALLBACK


def session_token(key: SessionKey, nonce: Nonce) -> bytes:
    """Opaque fixed-size acknowledgment token (never consumed afterwards)."""
    return hashlib.sha512(key.bytes + nonce.bytes).digest()


def establish_session(
    req: AuthRequest,
    shared: SharedSecret,
    fog_id: NodeId,
    now_s: float,
    lifetime_s: float,
    trust_at_grant: float,
    via_fallback: bool = False,
    link_up: bool = True,
) -> Tuple[SessionRecord, bytes]:
    """Derive the session key and produce the record plus the ack token."""
    if not link_up:
        raise SessionAborted(f"{req.vehicle_id.label} out of range of {fog_id.label}")
    key = derive_session_key(shared, req.nonce, established_s=now_s, lifetime_s=lifetime_s)
    record = SessionRecord(
        vehicle_id=req.vehicle_id,
        fog_id=fog_id,
        key=key,
        trust_at_grant=trust_at_grant,
        established_s=now_s,
        via_fallback=via_fallback,
    )
    token = session_token(key, req.nonce)
    assert len(token) == ACK_TOKEN_BYTES
    return record, token


def fallback_challenge(challenge_stream) -> bytes:
    """Fresh fog-chosen 16-byte challenge value."""
    return challenge_stream.next()


def answer_challenge(challenge: bytes, vehicle_label: str, keypair: KeyPair) -> bytes:
    """Vehicle proves key possession by signing (challenge || label)."""
    return sign(challenge + vehicle_label.encode("utf-8"), keypair)


def judge_fallback(
    challenge: bytes,
    response_signature: bytes,
    vehicle_label: str,
    public: bytes,
) -> bool:
    """Accept iff the response signs exactly this challenge for this vehicle."""
    return verify(response_signature, challenge + vehicle_label.encode("utf-8"), public)
