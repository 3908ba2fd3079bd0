"""Adversary actors and the stylized PKI/blockchain comparison baselines.

Attack mechanics: spoofing is signature-invalid impersonation (message signed
with the attacker's own key, or garbage bytes, under the victim's identity);
replay is byte-identical re-injection of a captured request at the fog that
saw the original; Sybil identities are unregistered keys, plus a 5 m
co-location heuristic flagging ids that report overlapping positions.

Every injected attempt carries a ground-truth label on the side (never
visible to the fog's decision path).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from .crypto import KeyPair, Nonce, canonical_encode, hash_request, keypair_from_seed, sign
from .domain import ContextVector, NodeId
from .protocol import AuthRequest

SYBIL_COLOCATION_M = 5.0


class AttackKind(Enum):
    SPOOF = "spoof"
    REPLAY = "replay"
    SYBIL = "sybil"
    CONTEXT = "context"


@dataclass(frozen=True)
class AttackPlan:
    kind: AttackKind
    rate_hz: float
    start_s: float
    stop_s: float
    targets: Tuple[int, ...] = ()  # fog indices; empty means every fog
    sybil_count: int = 0
    replay_delay_min_s: float = 5.0
    replay_delay_max_s: float = 35.0

    def __post_init__(self):
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be >= 0")
        if self.kind is AttackKind.SYBIL and self.sybil_count < 2:
            raise ValueError("a Sybil plan needs at least 2 identities")

    def injection_times(self) -> List[float]:
        """Deterministic fixed-rate schedule inside the attack window."""
        if self.rate_hz <= 0 or self.stop_s <= self.start_s:
            return []
        times = []
        k = 0
        while True:
            t = self.start_s + k / self.rate_hz
            if t >= self.stop_s:
                return times
            times.append(t)
            k += 1


def spoof_attempt(
    forged_id: NodeId,
    ctx: ContextVector,
    claimed_trust: float,
    attacker_key: Optional[KeyPair],
    rng,
    sent_at_s: float,
) -> AuthRequest:
    """Impersonation without the victim's key: correctly formed digest, but a
    signature the registry can never validate."""
    digest = hash_request(canonical_encode(forged_id, ctx, claimed_trust))
    if attacker_key is not None:
        signature = sign(digest, attacker_key)
    else:
        signature = bytes(rng.bytes(64))
    return AuthRequest(
        vehicle_id=forged_id,
        ctx=ctx,
        claimed_trust=claimed_trust,
        request_digest=digest,
        signature=signature,
        nonce=Nonce(bytes(rng.bytes(16))),
        sent_at_s=sent_at_s,
    )


def replay_attempt(captured: AuthRequest, sent_at_s: float) -> AuthRequest:
    """Byte-identical re-injection; only the wire timestamp moves."""
    return AuthRequest(
        vehicle_id=captured.vehicle_id,
        ctx=captured.ctx,
        claimed_trust=captured.claimed_trust,
        request_digest=captured.request_digest,
        signature=captured.signature,
        nonce=captured.nonce,
        sent_at_s=sent_at_s,
    )


def sybil_spawn(count: int, rng, start_index: int = 9000) -> List[Tuple[NodeId, KeyPair]]:
    """Fabricated vehicle identities absent from the key registry."""
    if count < 2:
        raise ValueError("count must be >= 2")
    fakes = []
    for i in range(count):
        node = NodeId.vehicle(start_index + i)
        fakes.append((node, keypair_from_seed(bytes(rng.bytes(32)))))
    return fakes


def colocated_ids(reports: List[Tuple[str, float, float]], radius_m: float = SYBIL_COLOCATION_M) -> List[str]:
    """Ids whose reported positions fall within radius of another reporter."""
    flagged = set()
    for i, (id_a, xa, ya) in enumerate(reports):
        for id_b, xb, yb in reports[i + 1 :]:
            if id_a == id_b:
                continue
            if (xa - xb) ** 2 + (ya - yb) ** 2 <= radius_m**2:
                flagged.add(id_a)
                flagged.add(id_b)
    return sorted(flagged)


class BaselineKind(Enum):
    ZTMAF = "ztmaf"
    PKI = "pki"
    BLOCKCHAIN = "blockchain"


@dataclass(frozen=True)
class BaselineModel:
    kind: BaselineKind
    pki_chain_depth: int = 2
    pki_cert_verify_s: float = 0.020
    pki_cert_verify_cycles: int = 12000
    pki_revocation_rtt_s: float = 0.040
    blockchain_interval_s: float = 0.060
    blockchain_consensus_cycles: int = 15000

    def __post_init__(self):
        for name in (
            "pki_cert_verify_s",
            "pki_revocation_rtt_s",
            "blockchain_interval_s",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.pki_chain_depth < 0:
            raise ValueError("pki_chain_depth must be non-negative")


def baseline_authenticate(
    model: BaselineModel,
    attempt_latency_s: float,
    attempt_cycles: int,
    sign_cycles: int,
    sig_verify_cycles: int,
    rng,
) -> Tuple[float, int]:
    """Latency and cycles this attempt would have cost under the baseline.

    Both baselines reuse the measured handshake exchange and add their own
    overheads, so a zero-overhead configuration degenerates to the measured
    values and no attempt is ever cheaper under a baseline.
    """
    if model.kind is BaselineKind.ZTMAF:
        return attempt_latency_s, attempt_cycles
    if model.kind is BaselineKind.PKI:
        latency = (
            attempt_latency_s
            + model.pki_chain_depth * model.pki_cert_verify_s
            + model.pki_revocation_rtt_s
        )
        cycles = model.pki_chain_depth * model.pki_cert_verify_cycles + sign_cycles + sig_verify_cycles
        return latency, cycles
    if model.kind is BaselineKind.BLOCKCHAIN:
        inclusion_wait = float(rng.uniform(0.0, model.blockchain_interval_s)) if model.blockchain_interval_s > 0 else 0.0
        return attempt_latency_s + inclusion_wait, attempt_cycles + model.blockchain_consensus_cycles
    raise ValueError(f"unknown baseline kind {model.kind}")
