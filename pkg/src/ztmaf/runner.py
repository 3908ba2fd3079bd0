"""Scenario orchestration: builds the world, drives the event loop, audits
the run invariants, and writes the normative run-directory outputs.

One Simulation is one deterministic run: a fleet on its trajectories, a grid
of fog nodes, optional adversaries, and the four wire message kinds riding a
contended channel. Context observation is out-of-band sensing (the protocol's
wire messages are AUTH_REQ/AUTH_ACK/CHALLENGE/CHALLENGE_RESP only); the
per-node CPU serves authentication-path jobs and converts cycle charges into
processing time at the configured effective clock.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .config import ConfigError, ScenarioConfig, echo_config
from .crypto import (
    ChallengeStream,
    KeyPair,
    NonceStream,
    SessionKey,
    derive_session_key,
    keypair_from_seed,
    provision_shared_secret,
)
from .domain import ContextVector, NodeId, Point, TrustState
from .metrics import (
    AttemptRecord,
    MetricsLedger,
    Outcome,
    recount,
    summarize,
    write_run_outputs,
)
from .mobility import KraussParams, RoadLoop, Trajectory, load_trace, sample, synth_fleet
from .protocol import (
    AuthRequest,
    Decision,
    RejectReason,
    ReplayCache,
    SessionRecord,
    answer_challenge,
    build_request,
    decide,
    establish_session,
    judge_fallback,
    verify_request,
)
from .simkernel import (
    ChannelModel,
    CostTable,
    Cpu,
    CycleLedger,
    EventKernel,
    LinkDown,
    Network,
    derive_rng,
)
from .simkernel import TRACE_HEADER as EVENT_TRACE_HEADER
from .threats import (
    AttackKind,
    AttackPlan,
    BaselineKind,
    BaselineModel,
    baseline_authenticate,
    replay_attempt,
    spoof_attempt,
)
from .trust import TrustParams, convergence_time, psi, update_trust

SYBIL_RADIUS_M = 5.0
SYBIL_REQUEST_PERIOD_S = 60.0
REPORT_WINDOW_S = 1.0
END_GRACE_S = 3.0


class InvariantViolation(AssertionError):
    """A run-level protocol or accounting invariant failed its audit."""


@dataclass
class Attempt:
    id: int
    vehicle: str
    fog: str
    kind: str  # "" for honest, else an AttackKind value
    started_s: float
    emit_s: Optional[float] = None
    comm_s: float = 0.0
    trust_before: float = 0.5
    trust_after: float = 0.5
    behavior: float = 1.0
    request: Optional[AuthRequest] = None
    verified: bool = False
    via_fallback: bool = False
    challenge: Optional[bytes] = None
    challenge_deadline: float = 0.0
    response_seen: bool = False
    done: bool = False


@dataclass
class VehicleActor:
    index: int
    node: NodeId
    keypair: KeyPair
    nonces: NonceStream
    cpu: Cpu
    malicious_kind: str = ""  # "context" marks a registered insider liar
    first_auth_s: float = 0.0
    mirror: Dict[str, float] = field(default_factory=dict)
    sessions: Dict[str, SessionKey] = field(default_factory=dict)
    in_flight: Optional[Attempt] = None


@dataclass
class FogActor:
    index: int
    node: NodeId
    position: Point
    cpu: Cpu
    cache: ReplayCache
    challenges: ChallengeStream
    trust: Dict[str, TrustState] = field(default_factory=dict)
    behavior: Dict[str, float] = field(default_factory=dict)
    last_report: Dict[str, Tuple[float, float, float, float]] = field(default_factory=dict)
    sessions: Dict[str, SessionRecord] = field(default_factory=dict)
    outstanding: Dict[str, Attempt] = field(default_factory=dict)


def _sub_seed(master: int, purpose: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{master}|{purpose}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _filtered(alpha: float, old: float, psi_value: float) -> float:
    return min(1.0, max(0.0, alpha * old + (1.0 - alpha) * psi_value))


def _falloff(error: float, tol: float) -> float:
    return min(1.0, max(0.0, 1.0 - max(0.0, error / tol - 1.0)))


class Simulation:
    def __init__(self, cfg: ScenarioConfig, fleet_size: int, seed: Optional[int] = None):
        self.cfg = cfg
        self.n = fleet_size
        self.seed = cfg.seed if seed is None else seed
        self.kernel = EventKernel(trace=cfg.sim_trace_dump)
        self.channel = ChannelModel(
            bandwidth_bps=cfg.net_bandwidth_mbps * 1e6,
            packet_bytes=cfg.net_packet_bytes,
            propagation_s=cfg.net_propagation_ms / 1e3,
            loss_prob=cfg.net_loss_prob,
        )
        self.network = Network(self.kernel, self.channel, derive_rng(self.seed, "channel"))
        self.cost_table = CostTable(
            hash=cfg.cost_hash,
            hmac=cfg.cost_hmac,
            sign=cfg.cost_sign,
            sig_verify=cfg.cost_sig_verify,
            trust_update=cfg.cost_trust_update,
            cert_verify=cfg.cost_cert_verify,
            consensus_overhead=cfg.cost_consensus_overhead,
        )
        self.cycles = CycleLedger(self.cost_table)
        self.params = TrustParams(
            alpha=cfg.trust_alpha,
            theta=cfg.trust_theta,
            weights=(cfg.trust_w_speed, cfg.trust_w_loc, cfg.trust_w_behavior),
            speed_tol_mps=cfg.trust_speed_tol_mps,
            loc_tol_m=cfg.trust_loc_tol_m,
        )
        self.ledger = MetricsLedger()
        self.master_secret = hashlib.sha256(f"master-secret|{self.seed}".encode()).digest()

        self._build_mobility()
        self._build_fogs()
        self._build_fleet()
        self._build_attackers()

        # runtime bookkeeping and audit logs
        self.attempts: List[Attempt] = []
        self.grants: List[SessionRecord] = []
        self.key_agreements: List[bool] = []
        self.verify_log: List[Tuple[int, str, bytes, float, str]] = []
        self.captures: List[List[Tuple[float, AuthRequest]]] = [[] for _ in range(cfg.fog_count)]
        self.sybil_flags: set = set()
        self._report_cells: Dict[Tuple[int, int], Dict[str, Tuple[float, float, float]]] = {}
        self._report_cell_of: Dict[str, Tuple[int, int]] = {}
        self._next_attempt_id = 0

    # ------------------------------------------------------------------
    # world construction

    def _build_mobility(self) -> None:
        cfg = self.cfg
        duration = int(math.ceil(cfg.sim_duration_s))
        self.duration = duration
        v_max = cfg.v_max_effective
        if cfg.mobility_mode == "synthetic":
            road = RoadLoop(
                width_m=cfg.mobility_loop_width_m,
                height_m=cfg.mobility_loop_height_m,
                lanes=cfg.mobility_lanes,
                vehicle_length_m=cfg.mobility_vehicle_length_m,
                min_gap_m=cfg.mobility_min_gap_m,
            )
            params = KraussParams(
                v_max_mps=v_max,
                accel_mps2=cfg.mobility_accel_mps2,
                decel_mps2=cfg.mobility_decel_mps2,
                tau_s=cfg.mobility_tau_s,
                sigma=cfg.mobility_sigma,
                dt_s=cfg.mobility_dt_s,
            )
            trajs = synth_fleet(
                self.n, road, params, derive_rng(self.seed, "mobility"), float(duration)
            )
            self.bbox = (0.0, 0.0, road.width_m, road.height_m)
        else:
            loaded = load_trace(cfg.mobility_trace_path)
            if len(loaded) < self.n:
                raise ConfigError(
                    f"fleet.sizes: trace provides {len(loaded)} vehicles, need {self.n}"
                )
            keys = sorted(loaded)[: self.n]
            trajs = {f"v{i:03d}": Trajectory(f"v{i:03d}", loaded[k].samples) for i, k in enumerate(keys)}
            xs = [s.x_m for t in trajs.values() for s in t.samples]
            ys = [s.y_m for t in trajs.values() for s in t.samples]
            self.bbox = (min(xs), min(ys), max(xs), max(ys))
        self.v_max = v_max
        self.labels = sorted(trajs)
        pos_x = np.empty((duration + 1, self.n))
        pos_y = np.empty((duration + 1, self.n))
        speeds = np.empty((duration + 1, self.n))
        for i, label in enumerate(self.labels):
            traj = trajs[label]
            for t in range(duration + 1):
                (x, y), v = sample(traj, float(t))
                pos_x[t, i] = x
                pos_y[t, i] = y
                speeds[t, i] = v
        self.pos_x, self.pos_y, self.speeds = pos_x, pos_y, speeds

    def _build_fogs(self) -> None:
        cfg = self.cfg
        x0, y0, x1, y1 = self.bbox
        cols, rows = cfg.fog_grid_cols, cfg.fog_grid_rows
        positions = []
        for j in range(rows):
            for i in range(cols):
                positions.append(
                    (
                        x0 + (i + 0.5) * (x1 - x0) / cols,
                        y0 + (j + 0.5) * (y1 - y0) / rows,
                    )
                )
        self.fogs: List[FogActor] = []
        effective_hz = cfg.cost_effective_hz
        for f, pos in enumerate(positions):
            node = NodeId.fog(f)
            self.fogs.append(
                FogActor(
                    index=f,
                    node=node,
                    position=pos,
                    cpu=Cpu(self.kernel, node.label, effective_hz),
                    cache=ReplayCache(ttl_s=cfg.replay_ttl_s),
                    challenges=ChallengeStream(derive_rng(self.seed, "challenge", f)),
                )
            )
        fog_x = np.array([p[0] for p in positions])
        fog_y = np.array([p[1] for p in positions])
        dx = self.pos_x[:, :, None] - fog_x[None, None, :]
        dy = self.pos_y[:, :, None] - fog_y[None, None, :]
        dist2 = dx * dx + dy * dy
        self.linked_table = dist2 <= cfg.fog_comm_range_m**2  # (t, vehicle, fog)
        nearest = np.argmin(dist2, axis=2).astype(np.int16)  # ties -> lowest fog index
        any_link = self.linked_table.any(axis=2)
        nearest[~any_link] = -1
        self.nearest_table = nearest

    def _build_fleet(self) -> None:
        cfg = self.cfg
        self.registry: Dict[str, bytes] = {}
        self.vehicles: List[VehicleActor] = []
        self.actor_by_label: Dict[str, VehicleActor] = {}
        jitter_rng = derive_rng(self.seed, "jitter")
        hz = cfg.cost_effective_hz
        for i, label in enumerate(self.labels):
            node = NodeId.vehicle(i)
            key_seed = hashlib.sha256(self.master_secret + b"|key|" + label.encode()).digest()
            keypair = keypair_from_seed(key_seed)
            actor = VehicleActor(
                index=i,
                node=node,
                keypair=keypair,
                nonces=NonceStream(derive_rng(self.seed, "nonce", i)),
                cpu=Cpu(self.kernel, label, hz),
                first_auth_s=1.0 + float(jitter_rng.uniform(0.0, cfg.sim_start_jitter_s)),
            )
            self.registry[label] = keypair.public
            self.vehicles.append(actor)
            self.actor_by_label[label] = actor
        self._shared_cache: Dict[Tuple[str, str], object] = {}

    def _shared(self, vehicle_label: str, fog_label: str):
        key = (vehicle_label, fog_label)
        secret = self._shared_cache.get(key)
        if secret is None:
            secret = provision_shared_secret(self.master_secret, vehicle_label, fog_label)
            self._shared_cache[key] = secret
        return secret

    def _build_attackers(self) -> None:
        cfg = self.cfg
        self.attack_rng = derive_rng(self.seed, "attack")
        self.baseline_rng = derive_rng(self.seed, "baseline")
        self.attacker_key = keypair_from_seed(
            hashlib.sha256(self.master_secret + b"|attacker").digest()
        )
        self.plans: List[AttackPlan] = []
        stop = min(cfg.attack_stop_s, cfg.sim_duration_s)
        if cfg.attack_spoof_rate_hz > 0:
            kind = AttackKind.CONTEXT if cfg.attack_context_spoof else AttackKind.SPOOF
            self.plans.append(
                AttackPlan(kind, cfg.attack_spoof_rate_hz, cfg.attack_start_s, stop)
            )
        if cfg.attack_replay_rate_hz > 0:
            self.plans.append(
                AttackPlan(
                    AttackKind.REPLAY,
                    cfg.attack_replay_rate_hz,
                    cfg.attack_start_s,
                    stop,
                    replay_delay_min_s=cfg.attack_replay_delay_min_s,
                    replay_delay_max_s=cfg.attack_replay_delay_max_s,
                )
            )
        if cfg.attack_sybil_count >= 2:
            self.plans.append(
                AttackPlan(
                    AttackKind.SYBIL,
                    0.0,
                    cfg.attack_start_s,
                    stop,
                    sybil_count=cfg.attack_sybil_count,
                )
            )
        self.insiders: List[VehicleActor] = []
        if cfg.attack_context_spoof and cfg.attack_spoof_rate_hz > 0:
            for k in range(2):
                node = NodeId.vehicle(8000 + k)
                seed = hashlib.sha256(self.master_secret + b"|insider|" + bytes([k])).digest()
                keypair = keypair_from_seed(seed)
                actor = VehicleActor(
                    index=8000 + k,
                    node=node,
                    keypair=keypair,
                    nonces=NonceStream(derive_rng(self.seed, "nonce", 8000 + k)),
                    cpu=Cpu(self.kernel, node.label, cfg.cost_effective_hz),
                    malicious_kind=AttackKind.CONTEXT.value,
                )
                self.registry[node.label] = keypair.public
                self.insiders.append(actor)
                self.actor_by_label[node.label] = actor
        self.sybils: List[Tuple[NodeId, KeyPair, Point]] = []
        for plan in self.plans:
            if plan.kind is AttackKind.SYBIL:
                base = self.fogs[0].position
                for s in range(plan.sybil_count):
                    node = NodeId.vehicle(9000 + s)
                    keypair = keypair_from_seed(bytes(self.attack_rng.bytes(32)))
                    offset = (float(s % 3), float(s // 3))  # all within a few meters
                    self.sybils.append(
                        (node, keypair, (base[0] + offset[0], base[1] + offset[1]))
                    )

    # ------------------------------------------------------------------
    # geometry helpers

    def _t_index(self, t_s: float) -> int:
        return min(self.duration, max(0, int(t_s)))

    def _linked(self, vehicle_index: int, fog_index: int, t_s: float) -> bool:
        return bool(self.linked_table[self._t_index(t_s), vehicle_index, fog_index])

    def _link_pred(self, veh: VehicleActor, fog: FogActor) -> Callable[[float], bool]:
        if veh.malicious_kind or veh.index >= self.n:
            return lambda t: True  # attacker radio is not range-limited
        return lambda t: self._linked(veh.index, fog.index, t)

    def _context_at(self, veh: VehicleActor, t_s: float) -> ContextVector:
        ti = self._t_index(t_s)
        return ContextVector(
            speed_mps=float(self.speeds[ti, veh.index]),
            location=(float(self.pos_x[ti, veh.index]), float(self.pos_y[ti, veh.index])),
            behavior=1.0,
            timestamp_s=t_s,
        )

    def _forged_context(self, t_s: float) -> ContextVector:
        x0, y0, x1, y1 = self.bbox
        return ContextVector(
            speed_mps=3.0 * self.v_max,
            location=(
                float(self.attack_rng.uniform(x0, x1)),
                float(self.attack_rng.uniform(y0, y1)),
            ),
            behavior=1.0,
            timestamp_s=t_s,
        )

    # ------------------------------------------------------------------
    # trust plumbing

    def _fog_psi(self, fog: FogActor, label: str, ctx: ContextVector) -> float:
        g_s = _falloff(abs(ctx.speed_mps - self.v_max), self.params.speed_tol_mps)
        prev = fog.last_report.get(label)
        if prev is None:
            g_l = 1.0
        else:
            dx = ctx.location[0] - prev[0]
            dy = ctx.location[1] - prev[1]
            g_l = _falloff(math.hypot(dx, dy), self.params.loc_tol_m)
        b = fog.behavior.get(label, 1.0)
        w_s, w_l, w_b = self.params.weights
        return w_s * g_s + w_l * g_l + w_b * b

    def _observe(self, fog: FogActor, label: str, ctx: ContextVector) -> None:
        """Out-of-band context sensing: one 1 Hz trust-filter step per vehicle."""
        value = self._fog_psi(fog, label, ctx)
        state = fog.trust.get(label)
        if state is None:
            state = TrustState(value=self.cfg.trust_initial, history_limit=2)
            fog.trust[label] = state
        state.record(ctx.timestamp_s, _filtered(self.params.alpha, state.value, value))
        fog.last_report[label] = (ctx.location[0], ctx.location[1], ctx.speed_mps, ctx.timestamp_s)
        self.cycles.charge("trust_update", None)  # background, no CPU occupancy

    def _ingest_report(self, label: str, x: float, y: float, t_s: float) -> None:
        """Co-location heuristic: >=2 distinct ids within 5 m inside a 1 s window."""
        cell = (int(x // SYBIL_RADIUS_M), int(y // SYBIL_RADIUS_M))
        for cx in (cell[0] - 1, cell[0], cell[0] + 1):
            for cy in (cell[1] - 1, cell[1], cell[1] + 1):
                bucket = self._report_cells.get((cx, cy))
                if not bucket:
                    continue
                for other, (ox, oy, ot) in bucket.items():
                    if other == label or t_s - ot > REPORT_WINDOW_S:
                        continue
                    if (x - ox) ** 2 + (y - oy) ** 2 <= SYBIL_RADIUS_M**2:
                        self.sybil_flags.add(label)
                        self.sybil_flags.add(other)
        old_cell = self._report_cell_of.get(label)
        if old_cell is not None and old_cell != cell:
            bucket = self._report_cells.get(old_cell)
            if bucket is not None:
                bucket.pop(label, None)
                if not bucket:
                    del self._report_cells[old_cell]
        self._report_cells.setdefault(cell, {})[label] = (x, y, t_s)
        self._report_cell_of[label] = cell

    # ------------------------------------------------------------------
    # attempt lifecycle

    def _new_attempt(self, vehicle: str, fog: str, kind: str) -> Attempt:
        att = Attempt(
            id=self._next_attempt_id,
            vehicle=vehicle,
            fog=fog,
            kind=kind,
            started_s=self.kernel.now,
        )
        self._next_attempt_id += 1
        self.attempts.append(att)
        return att

    def _finalize(
        self, att: Attempt, outcome: Outcome, latency_s: Optional[float]
    ) -> None:
        if att.done:
            return
        att.done = True
        actor = self.actor_by_label.get(att.vehicle)
        if actor is not None and actor.in_flight is att:
            actor.in_flight = None
        detected = False
        if att.kind == AttackKind.SPOOF.value:
            detected = outcome in (Outcome.REJECTED_SPOOF, Outcome.REJECTED_UNKNOWN)
        elif att.kind == AttackKind.REPLAY.value:
            detected = outcome is Outcome.REJECTED_REPLAY
        elif att.kind == AttackKind.SYBIL.value:
            detected = outcome is Outcome.REJECTED_UNKNOWN or att.vehicle in self.sybil_flags
        elif att.kind == AttackKind.CONTEXT.value:
            detected = outcome is Outcome.REJECTED_TRUST or att.via_fallback
        self.ledger.add_attempt(
            AttemptRecord(
                t_s=att.emit_s if att.emit_s is not None else att.started_s,
                vehicle=att.vehicle,
                fog=att.fog,
                outcome=outcome,
                latency_s=latency_s,
                comm_delay_s=att.comm_s,
                cycles=self.cycles.total(att.id),
                trust_before=att.trust_before,
                trust_after=att.trust_after,
                malicious=bool(att.kind),
                detected=detected,
                attack_kind=att.kind,
                behavior=att.behavior,
            )
        )

    def _start_attempt(self, veh: VehicleActor, fog: FogActor) -> None:
        att = self._new_attempt(veh.node.label, fog.node.label, veh.malicious_kind)
        veh.in_flight = att
        build_cycles = self.cycles.charge("hash", att.id) + self.cycles.charge("sign", att.id)
        veh.cpu.run(
            build_cycles,
            "build",
            lambda: self._emit_request(veh, fog, att),
            detail=f"attempt{att.id}",
        )

    def _emit_request(self, veh: VehicleActor, fog: FogActor, att: Attempt) -> None:
        now = self.kernel.now
        if veh.malicious_kind:
            ctx = self._forged_context(now)
            claimed = 1.0
        else:
            ctx = self._context_at(veh, now)
            claimed = veh.mirror.get(fog.node.label, self.cfg.trust_initial)
        req = build_request(veh.node, ctx, claimed, veh.keypair, veh.nonces, now)
        att.request = req
        att.emit_s = now
        self._send_request(veh, fog, att, req)

    def _send_request(
        self, veh: Optional[VehicleActor], fog: FogActor, att: Attempt, req: AuthRequest
    ) -> None:
        now = self.kernel.now
        link = self._link_pred(veh, fog) if veh is not None else (lambda t: True)
        src = veh.node.label if veh is not None else "atk"
        try:
            deliver_at = self.network.transmit(
                src,
                fog.node.label,
                "AUTH_REQ",
                lambda: self._on_request(fog, att, req),
                link,
                detail=f"attempt{att.id}",
            )
        except LinkDown:
            self._finalize(att, Outcome.ABORTED, None)
            return
        if deliver_at is not None:
            att.comm_s += deliver_at - now
        if veh is not None and not att.kind:
            self.kernel.schedule(
                att.emit_s + self.cfg.sim_auth_timeout_s,
                "auth_timeout",
                lambda: self._auth_timeout(att),
                src=src,
                detail=f"attempt{att.id}",
            )
        elif att.kind:
            # attackers do not wait on acks; close out stragglers at the horizon
            self.kernel.schedule(
                now + self.cfg.sim_auth_timeout_s + 1.0,
                "attack_timeout",
                lambda: self._auth_timeout(att),
                src=src,
                detail=f"attempt{att.id}",
            )

    def _auth_timeout(self, att: Attempt) -> None:
        if not att.done:
            self._finalize(att, Outcome.ABORTED, None)

    # fog side ----------------------------------------------------------

    def _on_request(self, fog: FogActor, att: Attempt, req: AuthRequest) -> None:
        now = self.kernel.now
        label = req.vehicle_id.label
        self._ingest_report(label, req.ctx.location[0], req.ctx.location[1], now)
        if label not in self.registry:
            stored = fog.trust.get(label)
            att.trust_before = att.trust_after = stored.value if stored else self.cfg.trust_initial
            self._finalize(att, Outcome.REJECTED_UNKNOWN, None)
            return
        self.cycles.charge("sig_verify", att.id)
        fog.cpu.run(
            self.cost_table.sig_verify,
            "verify",
            lambda: self._verify_done(fog, att, req),
            detail=f"attempt{att.id}",
        )

    def _verify_done(self, fog: FogActor, att: Attempt, req: AuthRequest) -> None:
        now = self.kernel.now
        label = req.vehicle_id.label
        result = verify_request(req, self.registry, fog.cache, now)
        self.verify_log.append(
            (fog.index, label, req.nonce.bytes, now,
             result.reason.value if result.reason else "ok")
        )
        stored = fog.trust.get(label)
        att.trust_before = att.trust_after = stored.value if stored else self.cfg.trust_initial
        if not result.verified:
            if result.reason is RejectReason.SPOOF_SUSPECTED:
                self._finalize(att, Outcome.REJECTED_SPOOF, None)
            elif result.reason is RejectReason.REPLAY_DETECTED:
                # a signature-valid but replayed message is attributable: ding the key owner
                b = fog.behavior.get(label, 1.0)
                fog.behavior[label] = _filtered(self.params.alpha, b, 0.0)
                self._finalize(att, Outcome.REJECTED_REPLAY, None)
            else:
                self._finalize(att, Outcome.REJECTED_UNKNOWN, None)
            return
        att.verified = True
        if not att.kind:
            self.captures[fog.index].append((now, req))
            if len(self.captures[fog.index]) > 128:
                del self.captures[fog.index][0]
        self.cycles.charge("trust_update", att.id)
        fog.cpu.run(
            self.cost_table.trust_update,
            "trust_update",
            lambda: self._trust_done(fog, att, req),
            detail=f"attempt{att.id}",
        )

    def _trust_done(self, fog: FogActor, att: Attempt, req: AuthRequest) -> None:
        label = req.vehicle_id.label
        state = fog.trust.get(label)
        if state is None:
            state = TrustState(value=self.cfg.trust_initial, history_limit=2)
            fog.trust[label] = state
        att.trust_before = state.value
        mismatch = abs(req.claimed_trust - state.value) > self.cfg.trust_mismatch_tol
        indicator = 0.0 if mismatch else 1.0
        b = _filtered(self.params.alpha, fog.behavior.get(label, 1.0), indicator)
        fog.behavior[label] = b
        psi_value = self._fog_psi(fog, label, req.ctx)
        new_state = update_trust(state, req.ctx, psi_value, self.params)
        fog.trust[label] = new_state
        fog.last_report[label] = (
            req.ctx.location[0],
            req.ctx.location[1],
            req.ctx.speed_mps,
            req.ctx.timestamp_s,
        )
        att.trust_after = new_state.value
        att.behavior = b
        if decide(new_state.value, self.params.theta) is Decision.ACCEPT:
            self._grant(fog, att, req, via_fallback=False)
        else:
            self._issue_challenge(fog, att, req)

    def _issue_challenge(self, fog: FogActor, att: Attempt, req: AuthRequest) -> None:
        now = self.kernel.now
        label = req.vehicle_id.label
        challenge = fog.challenges.next()
        att.challenge = challenge
        att.challenge_deadline = now + self.cfg.protocol_challenge_timeout_ms / 1e3
        fog.outstanding[label] = att
        actor = self.actor_by_label.get(label)
        link = self._link_pred(actor, fog) if actor is not None else (lambda t: True)
        try:
            deliver_at = self.network.transmit(
                fog.node.label,
                label,
                "CHALLENGE",
                lambda: self._on_challenge(fog, att, challenge),
                link,
                detail=f"attempt{att.id}",
            )
        except LinkDown:
            deliver_at = None
        if deliver_at is not None:
            att.comm_s += deliver_at - now
        self.kernel.schedule(
            att.challenge_deadline,
            "challenge_timeout",
            lambda: self._challenge_timeout(fog, att),
            src=fog.node.label,
            dst=label,
            detail=f"attempt{att.id}",
        )

    def _challenge_timeout(self, fog: FogActor, att: Attempt) -> None:
        if att.done or att.response_seen:
            return
        fog.outstanding.pop(att.vehicle, None)
        self._finalize(att, Outcome.REJECTED_TRUST, None)

    def _on_challenge(self, fog: FogActor, att: Attempt, challenge: bytes) -> None:
        actor = self.actor_by_label.get(att.vehicle)
        if actor is None or actor.in_flight is not att or att.done:
            return
        self.cycles.charge("sign", att.id)
        actor.cpu.run(
            self.cost_table.sign,
            "answer",
            lambda: self._send_response(actor, fog, att, challenge),
            detail=f"attempt{att.id}",
        )

    def _send_response(
        self, veh: VehicleActor, fog: FogActor, att: Attempt, challenge: bytes
    ) -> None:
        if att.done:
            return
        now = self.kernel.now
        signature = answer_challenge(challenge, veh.node.label, veh.keypair)
        try:
            deliver_at = self.network.transmit(
                veh.node.label,
                fog.node.label,
                "CHALLENGE_RESP",
                lambda: self._on_response(fog, att, challenge, signature),
                self._link_pred(veh, fog),
                detail=f"attempt{att.id}",
            )
        except LinkDown:
            return
        if deliver_at is not None:
            att.comm_s += deliver_at - now

    def _on_response(
        self, fog: FogActor, att: Attempt, challenge: bytes, signature: bytes
    ) -> None:
        now = self.kernel.now
        if att.done:
            return
        current = fog.outstanding.get(att.vehicle)
        if current is not att or challenge != att.challenge or now > att.challenge_deadline:
            if current is att:
                fog.outstanding.pop(att.vehicle, None)
            self._finalize(att, Outcome.REJECTED_TRUST, None)
            return
        att.response_seen = True
        fog.outstanding.pop(att.vehicle, None)
        self.cycles.charge("sig_verify", att.id)
        fog.cpu.run(
            self.cost_table.sig_verify,
            "judge",
            lambda: self._judge_done(fog, att, challenge, signature),
            detail=f"attempt{att.id}",
        )

    def _judge_done(
        self, fog: FogActor, att: Attempt, challenge: bytes, signature: bytes
    ) -> None:
        if att.done:
            return
        public = self.registry.get(att.vehicle)
        if public is not None and judge_fallback(challenge, signature, att.vehicle, public):
            self._grant(fog, att, att.request, via_fallback=True)
        else:
            self._finalize(att, Outcome.REJECTED_TRUST, None)

    def _grant(self, fog: FogActor, att: Attempt, req: AuthRequest, via_fallback: bool) -> None:
        att.via_fallback = via_fallback
        self.cycles.charge("hmac", att.id)
        fog.cpu.run(
            self.cost_table.hmac,
            "derive",
            lambda: self._establish_done(fog, att, req, via_fallback),
            detail=f"attempt{att.id}",
        )

    def _establish_done(
        self, fog: FogActor, att: Attempt, req: AuthRequest, via_fallback: bool
    ) -> None:
        if att.done:
            return
        now = self.kernel.now
        label = req.vehicle_id.label
        actor = self.actor_by_label.get(label)
        link_ok = True
        if actor is not None and not actor.malicious_kind:
            link_ok = self._linked(actor.index, fog.index, now)
        if not link_ok:
            self._finalize(att, Outcome.ABORTED, None)
            return
        record, token = establish_session(
            req,
            self._shared(label, fog.node.label),
            fog.node,
            now,
            self.cfg.session_lifetime_s,
            trust_at_grant=att.trust_after,
            via_fallback=via_fallback,
        )
        assert att.verified, "establish without verification"
        fog.sessions[label] = record
        self.grants.append(record)
        if actor is None or (att.kind and att.kind != AttackKind.CONTEXT.value):
            # no live requester waits for this ack (e.g. an accepted stale replay)
            outcome = Outcome.GRANTED_FALLBACK if via_fallback else Outcome.GRANTED
            self._finalize(att, outcome, now - att.emit_s if att.emit_s is not None else None)
            return
        link = self._link_pred(actor, fog)
        try:
            deliver_at = self.network.transmit(
                fog.node.label,
                label,
                "AUTH_ACK",
                lambda: self._on_ack(actor, fog, att, record),
                link,
                detail=f"attempt{att.id}",
            )
        except LinkDown:
            self._finalize(att, Outcome.ABORTED, None)
            return
        if deliver_at is not None:
            att.comm_s += deliver_at - now

    def _on_ack(
        self, veh: VehicleActor, fog: FogActor, att: Attempt, record: SessionRecord
    ) -> None:
        now = self.kernel.now
        if att.done or veh.in_flight is not att:
            return
        if att.request is None or record.key.bytes != derive_session_key(
            self._shared(veh.node.label, fog.node.label),
            att.request.nonce,
            established_s=record.established_s,
            lifetime_s=record.key.lifetime_s,
        ).bytes:
            self.key_agreements.append(False)
            self._finalize(att, Outcome.ABORTED, None)
            return
        self.key_agreements.append(True)
        veh.sessions[fog.node.label] = record.key
        veh.mirror[fog.node.label] = record.trust_at_grant
        outcome = Outcome.GRANTED_FALLBACK if record.via_fallback else Outcome.GRANTED
        self._finalize(att, outcome, now - att.emit_s)

    # ------------------------------------------------------------------
    # per-second tick

    def _tick(self, t: int) -> None:
        cfg = self.cfg
        now = float(t)
        linked_row = self.linked_table[t]
        nearest_row = self.nearest_table[t]
        w_s, w_l, w_b = self.params.weights
        alpha = self.params.alpha
        for veh in self.vehicles:
            i = veh.index
            x = float(self.pos_x[t, i])
            y = float(self.pos_y[t, i])
            v = float(self.speeds[t, i])
            ctx = ContextVector(speed_mps=v, location=(x, y), behavior=1.0, timestamp_s=now)
            g_s = _falloff(abs(v - self.v_max), self.params.speed_tol_mps)
            self._ingest_report(veh.node.label, x, y, now)
            label = veh.node.label
            for f in np.nonzero(linked_row[i])[0]:
                fog = self.fogs[int(f)]
                self._observe(fog, label, ctx)
                # the vehicle mirrors the fog's filter from its own context
                # (g_l is 1: it moved at most v*1s < loc_tol since last report)
                mirror_psi = w_s * g_s + w_l * 1.0 + w_b * 1.0
                old = veh.mirror.get(fog.node.label, cfg.trust_initial)
                veh.mirror[fog.node.label] = _filtered(alpha, old, mirror_psi)
            serving = int(nearest_row[i])
            if serving < 0:
                continue
            fog = self.fogs[serving]
            state = fog.trust.get(label)
            self.ledger.log_trust(now, label, state.value if state else cfg.trust_initial)
            if veh.in_flight is not None or now < veh.first_auth_s:
                continue
            key = veh.sessions.get(fog.node.label)
            if key is not None and now < key.expires_s:
                continue
            self._start_attempt(veh, fog)

    # ------------------------------------------------------------------
    # attack injection

    def _schedule_attacks(self) -> None:
        for plan in self.plans:
            if plan.kind in (AttackKind.SPOOF, AttackKind.CONTEXT):
                for when in plan.injection_times():
                    if plan.kind is AttackKind.SPOOF:
                        self.kernel.schedule(
                            when, "spoof_inject", self._make_spoof(when), src="atk"
                        )
                    else:
                        self.kernel.schedule(
                            when, "context_inject", self._make_context(when), src="atk"
                        )
            elif plan.kind is AttackKind.REPLAY:
                for when in plan.injection_times():
                    self.kernel.schedule(
                        when, "replay_inject", self._make_replay(when, plan), src="atk"
                    )
            elif plan.kind is AttackKind.SYBIL:
                when = plan.start_s
                while when < plan.stop_s:
                    self.kernel.schedule(
                        when, "sybil_inject", self._make_sybil(when), src="atk"
                    )
                    when += SYBIL_REQUEST_PERIOD_S

    def _make_spoof(self, when: float) -> Callable[[], None]:
        def inject() -> None:
            now = self.kernel.now
            victim = self.vehicles[int(self.attack_rng.integers(0, self.n))]
            ti = self._t_index(now)
            x = float(self.pos_x[ti, victim.index]) + float(self.attack_rng.normal(0.0, 3.0))
            y = float(self.pos_y[ti, victim.index]) + float(self.attack_rng.normal(0.0, 3.0))
            ctx = ContextVector(
                speed_mps=self.v_max, location=(x, y), behavior=1.0, timestamp_s=now
            )
            fog_idx = int(self.nearest_table[ti, victim.index])
            if fog_idx < 0:
                fog_idx = int(self.attack_rng.integers(0, len(self.fogs)))
            fog = self.fogs[fog_idx]
            req = spoof_attempt(victim.node, ctx, 0.9, self.attacker_key, self.attack_rng, now)
            att = self._new_attempt(victim.node.label, fog.node.label, AttackKind.SPOOF.value)
            att.emit_s = now
            att.request = req
            self._send_request(None, fog, att, req)

        return inject

    def _make_replay(self, when: float, plan: AttackPlan) -> Callable[[], None]:
        def inject() -> None:
            now = self.kernel.now
            target_delay = float(
                self.attack_rng.uniform(plan.replay_delay_min_s, plan.replay_delay_max_s)
            )
            candidates = [f for f in range(len(self.fogs)) if self.captures[f]]
            if not candidates:
                return
            fog_idx = candidates[int(self.attack_rng.integers(0, len(candidates)))]
            log = self.captures[fog_idx]
            best = min(range(len(log)), key=lambda k: abs((now - log[k][0]) - target_delay))
            _, captured = log.pop(best)
            fog = self.fogs[fog_idx]
            req = replay_attempt(captured, now)
            att = self._new_attempt(
                captured.vehicle_id.label, fog.node.label, AttackKind.REPLAY.value
            )
            att.emit_s = now
            att.request = req
            self._send_request(None, fog, att, req)

        return inject

    def _make_sybil(self, when: float) -> Callable[[], None]:
        def inject() -> None:
            now = self.kernel.now
            fog = self.fogs[0]
            for node, keypair, pos in self.sybils:
                ctx = ContextVector(
                    speed_mps=0.0, location=pos, behavior=1.0, timestamp_s=now
                )
                digest_req = build_request(
                    node,
                    ctx,
                    0.9,
                    keypair,
                    _OneShotNonces(self.attack_rng),
                    now,
                )
                att = self._new_attempt(node.label, fog.node.label, AttackKind.SYBIL.value)
                att.emit_s = now
                att.request = digest_req
                self._send_request(None, fog, att, digest_req)

        return inject

    def _make_context(self, when: float) -> Callable[[], None]:
        def inject() -> None:
            insider = self.insiders[int(self.attack_rng.integers(0, len(self.insiders)))]
            if insider.in_flight is not None:
                return
            fog = self.fogs[int(self.attack_rng.integers(0, len(self.fogs)))]
            self._start_attempt(insider, fog)

        return inject

    # ------------------------------------------------------------------
    # run + audits

    def run(self) -> MetricsLedger:
        for t in range(self.duration):
            self.kernel.schedule(float(t), "tick", (lambda tt: (lambda: self._tick(tt)))(t))
        self._schedule_attacks()
        self.kernel.run_until(self.duration + END_GRACE_S)
        for att in self.attempts:
            if not att.done:
                self._finalize(att, Outcome.ABORTED, None)
        self.ledger.background_cycles = self.cycles.background
        self.audit()
        return self.ledger

    def audit(self) -> None:
        # session soundness: non-fallback grants imply trust >= theta
        for record in self.grants:
            if not record.via_fallback and record.trust_at_grant < self.params.theta - 1e-12:
                raise InvariantViolation(
                    f"session for {record.vehicle_id.label} granted at "
                    f"{record.trust_at_grant} < theta"
                )
        # key agreement held for every acknowledged session
        if not all(self.key_agreements):
            raise InvariantViolation("vehicle- and fog-side session keys diverged")
        # replay totality: re-submissions of a resident (vehicle, nonce) rejected
        cache_model: Dict[Tuple[int, str, bytes], float] = {}
        ttl = self.cfg.replay_ttl_s
        for fog_idx, label, nonce, t_s, verdict in self.verify_log:
            key = (fog_idx, label, nonce)
            inserted = cache_model.get(key)
            resident = inserted is not None and (t_s - inserted) <= ttl
            if resident and verdict != RejectReason.REPLAY_DETECTED.value:
                raise InvariantViolation(
                    f"duplicate nonce for {label} accepted {t_s - inserted:.3f}s "
                    f"after insertion (ttl {ttl})"
                )
            if verdict == "ok":
                cache_model[key] = t_s
        # packet conservation
        stats = self.network.stats
        if stats.in_flight < 0 or (
            stats.sent
            != stats.delivered + stats.dropped + stats.undeliverable + stats.in_flight
        ):
            raise InvariantViolation("packet conservation failed")
        # causality: no leg faster than transmission + propagation
        min_leg = stats.min_leg_s - 1e-12
        for sent_at, delivered_at in stats.legs:
            if delivered_at - sent_at < min_leg:
                raise InvariantViolation("message delivered faster than the channel allows")
        # outcome partition: every attempt produced exactly one record
        if len(self.ledger.attempts) != len(self.attempts):
            raise InvariantViolation(
                f"{len(self.attempts)} attempts but {len(self.ledger.attempts)} records"
            )


class _OneShotNonces:
    """Nonce source for fabricated identities (no reuse bookkeeping needed)."""

    def __init__(self, rng):
        self._rng = rng

    def next(self):
        from .crypto import Nonce

        return Nonce(bytes(self._rng.bytes(16)))


# ----------------------------------------------------------------------
# entry points


def _simulate(cfg: ScenarioConfig, fleet_size: int, seed: int) -> Tuple[Simulation, Dict]:
    cfg_resolved = replace(cfg, seed=seed)
    sim = Simulation(cfg_resolved, fleet_size, seed)
    sim.run()
    summary = summarize(sim.ledger, fleet_size, cfg.sim_duration_s, cfg.trust_theta)
    return sim, summary


def _write_outputs(sim: Simulation, summary: Dict, cfg_resolved: ScenarioConfig, out_dir) -> None:
    write_run_outputs(out_dir, sim.ledger, summary, echo_config(cfg_resolved))
    if cfg_resolved.sim_trace_dump and sim.kernel.trace_rows is not None:
        trace_text = EVENT_TRACE_HEADER + "\n" + "\n".join(sim.kernel.trace_rows) + "\n"
        (Path(out_dir) / "trace.csv").write_text(trace_text, encoding="utf-8")


def run(cfg: ScenarioConfig, out_dir, seed: Optional[int] = None, fleet: Optional[int] = None) -> Dict:
    """Simulate one scenario and write the four normative output files."""
    fleet_size = fleet if fleet is not None else cfg.fleet_sizes[0]
    effective_seed = cfg.seed if seed is None else seed
    sim, summary = _simulate(cfg, fleet_size, effective_seed)
    _write_outputs(sim, summary, replace(cfg, seed=effective_seed), out_dir)
    return summary


def sweep(cfg: ScenarioConfig, out_dir, parallel: int = 1) -> List[Dict]:
    """One run per fleet size plus a combined sweep.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (cfg, size, _sub_seed(cfg.seed, "sweep", size), out / f"run_{size:04d}")
        for size in cfg.fleet_sizes
    ]
    if parallel > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
            summaries = list(pool.map(_sweep_worker, jobs))
    else:
        summaries = [_sweep_worker(job) for job in jobs]
    rows = ["fleet,mean_latency_ms,p95_latency_ms,s_rate,mean_cycles,detection_rate"]
    for size, summary in zip(cfg.fleet_sizes, summaries):
        detection = summary.get("detection", {}).get("combined")
        rows.append(
            ",".join(
                [
                    str(size),
                    f"{summary.get('mean_latency_ms', float('nan')):.6f}",
                    f"{summary.get('p95_latency_ms', float('nan')):.6f}",
                    f"{summary.get('s_rate', float('nan')):.6f}",
                    f"{summary.get('mean_cycles', float('nan')):.6f}",
                    f"{detection:.6f}" if detection is not None else "",
                ]
            )
        )
    (out / "sweep.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return summaries


def _sweep_worker(job) -> Dict:
    cfg, size, seed, run_dir = job
    return run(cfg, run_dir, seed=seed, fleet=size)


MODEL_NAMES = tuple(kind.value for kind in BaselineKind)


def compare(cfg: ScenarioConfig, out_dir, models: Optional[List[str]] = None) -> List[Dict]:
    """Replay one scenario under each authentication model; write compare.csv.

    The ZTMAF trace is simulated once; the baselines are per-attempt overlays
    (deterministic functions of each attempt plus the baseline stream), so
    every attempt is at least as expensive under a baseline by construction.
    """
    names = models if models is not None else list(MODEL_NAMES)
    for name in names:
        if name not in MODEL_NAMES:
            raise ConfigError(f"models: unknown model name {name!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fleet_size = cfg.fleet_sizes[0]
    sim, summary = _simulate(cfg, fleet_size, cfg.seed)
    _write_outputs(sim, summary, replace(cfg, seed=cfg.seed), out / "run_ztmaf")
    base_model = BaselineModel(
        kind=BaselineKind.ZTMAF,
        pki_chain_depth=cfg.baselines_pki_chain_depth,
        pki_cert_verify_s=cfg.baselines_pki_cert_verify_ms / 1e3,
        pki_cert_verify_cycles=cfg.baselines_pki_cert_verify_cycles,
        pki_revocation_rtt_s=cfg.baselines_pki_revocation_rtt_ms / 1e3,
        blockchain_interval_s=cfg.baselines_blockchain_interval_ms / 1e3,
        blockchain_consensus_cycles=cfg.baselines_blockchain_consensus_cycles,
    )
    granted = [
        r
        for r in sim.ledger.attempts
        if not r.malicious
        and r.outcome in (Outcome.GRANTED, Outcome.GRANTED_FALLBACK)
        and r.latency_s is not None
    ]
    results = []
    rows = ["model,fleet,mean_latency_ms,mean_cycles"]
    for name in names:
        model = replace(base_model, kind=BaselineKind(name))
        rng = derive_rng(cfg.seed, f"baseline-{name}")
        latencies = []
        cycle_counts = []
        for r in granted:
            lat, cyc = baseline_authenticate(
                model, r.latency_s, r.cycles, cfg.cost_sign, cfg.cost_sig_verify, rng
            )
            if lat < r.latency_s - 1e-12:
                raise InvariantViolation("baseline cheaper than measured attempt")
            latencies.append(lat)
            cycle_counts.append(cyc)
        mean_lat = sum(latencies) / len(latencies) if latencies else float("nan")
        mean_cyc = sum(cycle_counts) / len(cycle_counts) if cycle_counts else float("nan")
        results.append(
            {"model": name, "fleet": fleet_size, "mean_latency_ms": mean_lat * 1e3, "mean_cycles": mean_cyc}
        )
        rows.append(f"{name},{fleet_size},{mean_lat * 1e3:.6f},{mean_cyc:.6f}")
    (out / "compare.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return results
