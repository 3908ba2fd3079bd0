"""Scenario configuration: flat dotted-key text files, strict validation,
and a round-trippable resolved echo.

Format: one `key = value` per line, `#` starts a comment, values are JSON
scalars or lists (plus the literal `inf`, accepted for replay.ttl_s so the
never-evict replay cache is expressible). Unknown keys are hard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List


class ConfigError(ValueError):
    """Invalid key, type, or range; message names the dotted key path."""


@dataclass
class ScenarioConfig:
    seed: int = 1

    sim_duration_s: float = 600.0
    sim_auth_timeout_s: float = 1.0
    sim_start_jitter_s: float = 30.0
    sim_trace_dump: bool = False

    fleet_sizes: List[int] = field(default_factory=lambda: [100, 200, 300, 400, 500])

    fog_count: int = 10
    fog_grid_rows: int = 2
    fog_grid_cols: int = 5
    fog_comm_range_m: float = 450.0

    trust_alpha: float = 0.92
    trust_theta: float = 0.65
    trust_w_speed: float = 0.25
    trust_w_loc: float = 0.25
    trust_w_behavior: float = 0.5
    trust_speed_tol_mps: float = 5.0
    trust_loc_tol_m: float = 50.0
    trust_initial: float = 0.5
    trust_mismatch_tol: float = 0.05

    net_bandwidth_mbps: float = 10.0
    net_packet_bytes: int = 512
    net_propagation_ms: float = 1.0
    net_loss_prob: float = 0.0

    replay_ttl_s: float = 30.0
    session_lifetime_s: float = 120.0
    protocol_challenge_timeout_ms: float = 100.0
    context_beacon_hz: float = 1.0

    mobility_mode: str = "synthetic"  # synthetic | trace
    mobility_trace_path: str = ""
    mobility_tier: str = "medium"  # low (0.5x) | medium (1x) | high (2x)
    mobility_v_max_mps: float = 13.9
    mobility_accel_mps2: float = 2.6
    mobility_decel_mps2: float = 4.5
    mobility_tau_s: float = 1.0
    mobility_sigma: float = 0.5
    mobility_dt_s: float = 1.0
    mobility_loop_width_m: float = 2000.0
    mobility_loop_height_m: float = 1000.0
    mobility_lanes: int = 1
    mobility_vehicle_length_m: float = 5.0
    mobility_min_gap_m: float = 3.0

    attack_spoof_rate_hz: float = 0.0
    attack_replay_rate_hz: float = 0.0
    attack_sybil_count: int = 0
    attack_context_spoof: bool = False
    attack_start_s: float = 60.0
    attack_stop_s: float = 540.0
    attack_replay_delay_min_s: float = 5.0
    attack_replay_delay_max_s: float = 35.0

    cost_hash: int = 2000
    cost_hmac: int = 3000
    cost_sign: int = 6000
    cost_sig_verify: int = 8000
    cost_trust_update: int = 500
    cost_cert_verify: int = 12000
    cost_consensus_overhead: int = 15000
    cost_effective_hz: float = 103000.0

    baselines_pki_chain_depth: int = 2
    baselines_pki_cert_verify_ms: float = 20.0
    baselines_pki_cert_verify_cycles: int = 12000
    baselines_pki_revocation_rtt_ms: float = 40.0
    baselines_blockchain_interval_ms: float = 60.0
    baselines_blockchain_consensus_cycles: int = 15000

    @property
    def tier_factor(self) -> float:
        return {"low": 0.5, "medium": 1.0, "high": 2.0}[self.mobility_tier]

    @property
    def v_max_effective(self) -> float:
        return self.mobility_v_max_mps * self.tier_factor


def _attr_to_key(attr: str) -> str:
    if attr == "seed":
        return "seed"
    return attr.replace("_", ".", 1)


_KEY_TO_ATTR = {_attr_to_key(f.name): f.name for f in fields(ScenarioConfig)}


def _parse_value(key: str, raw: str) -> Any:
    raw = raw.strip()
    if raw == "inf":
        return math.inf
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{key}: unparseable value {raw!r}") from exc


def _coerce(key: str, attr: str, value: Any) -> Any:
    default = getattr(ScenarioConfig(), attr)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{key}: expected an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{key}: expected a list of integers")
        return list(value)
    raise ConfigError(f"{key}: unsupported type")


def parse_config_text(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        attr = _KEY_TO_ATTR.get(key)
        if attr is None:
            raise ConfigError(f"unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{key}: set twice")
        seen.add(key)
        setattr(cfg, attr, _coerce(key, attr, _parse_value(key, raw)))
    validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _require(cond: bool, key: str, why: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {why}")


def validate(cfg: ScenarioConfig) -> None:
    _require(cfg.sim_duration_s > 0, "sim.duration_s", "must be positive")
    _require(cfg.sim_auth_timeout_s > 0, "sim.auth_timeout_s", "must be positive")
    _require(cfg.sim_start_jitter_s >= 0, "sim.start_jitter_s", "must be >= 0")
    _require(bool(cfg.fleet_sizes), "fleet.sizes", "must be non-empty")
    _require(all(n >= 1 for n in cfg.fleet_sizes), "fleet.sizes", "sizes must be >= 1")
    _require(len(set(cfg.fleet_sizes)) == len(cfg.fleet_sizes), "fleet.sizes", "duplicate sizes")
    _require(cfg.fog_count >= 1, "fog.count", "must be >= 1")
    _require(
        cfg.fog_grid_rows * cfg.fog_grid_cols == cfg.fog_count,
        "fog.count",
        f"must equal fog.grid_rows*fog.grid_cols ({cfg.fog_grid_rows}x{cfg.fog_grid_cols})",
    )
    _require(cfg.fog_comm_range_m > 0, "fog.comm_range_m", "must be positive")
    _require(0.0 < cfg.trust_alpha < 1.0, "trust.alpha", "must be in (0, 1)")
    _require(0.0 <= cfg.trust_theta <= 1.0, "trust.theta", "must be in [0, 1]")
    weights = (cfg.trust_w_speed, cfg.trust_w_loc, cfg.trust_w_behavior)
    _require(all(w >= 0 for w in weights), "trust.w_speed", "weights must be >= 0")
    _require(abs(sum(weights) - 1.0) <= 1e-9, "trust.w_behavior", "weights must sum to 1")
    _require(cfg.trust_speed_tol_mps > 0, "trust.speed_tol_mps", "must be positive")
    _require(cfg.trust_loc_tol_m > 0, "trust.loc_tol_m", "must be positive")
    _require(0.0 <= cfg.trust_initial <= 1.0, "trust.initial", "must be in [0, 1]")
    _require(cfg.trust_mismatch_tol >= 0, "trust.mismatch_tol", "must be >= 0")
    _require(cfg.net_bandwidth_mbps > 0, "net.bandwidth_mbps", "must be positive")
    _require(cfg.net_packet_bytes > 0, "net.packet_bytes", "must be positive")
    _require(cfg.net_propagation_ms >= 0, "net.propagation_ms", "must be >= 0")
    _require(0.0 <= cfg.net_loss_prob <= 1.0, "net.loss_prob", "must be in [0, 1]")
    _require(cfg.replay_ttl_s > 0, "replay.ttl_s", "must be positive (inf allowed)")
    _require(cfg.session_lifetime_s > 0, "session.lifetime_s", "must be positive")
    _require(cfg.protocol_challenge_timeout_ms > 0, "protocol.challenge_timeout_ms", "must be positive")
    _require(cfg.context_beacon_hz > 0, "context.beacon_hz", "must be positive")
    _require(cfg.mobility_mode in ("synthetic", "trace"), "mobility.mode", "must be synthetic|trace")
    if cfg.mobility_mode == "trace":
        _require(bool(cfg.mobility_trace_path), "mobility.trace_path", "required in trace mode")
    _require(cfg.mobility_tier in ("low", "medium", "high"), "mobility.tier", "must be low|medium|high")
    for key, value in (
        ("mobility.v_max_mps", cfg.mobility_v_max_mps),
        ("mobility.accel_mps2", cfg.mobility_accel_mps2),
        ("mobility.decel_mps2", cfg.mobility_decel_mps2),
        ("mobility.tau_s", cfg.mobility_tau_s),
        ("mobility.dt_s", cfg.mobility_dt_s),
        ("mobility.loop_width_m", cfg.mobility_loop_width_m),
        ("mobility.loop_height_m", cfg.mobility_loop_height_m),
        ("mobility.vehicle_length_m", cfg.mobility_vehicle_length_m),
        ("cost.effective_hz", cfg.cost_effective_hz),
    ):
        _require(value > 0, key, "must be positive")
    _require(0.0 <= cfg.mobility_sigma <= 1.0, "mobility.sigma", "must be in [0, 1]")
    _require(cfg.mobility_lanes >= 1, "mobility.lanes", "must be >= 1")
    _require(cfg.mobility_min_gap_m >= 0, "mobility.min_gap_m", "must be >= 0")
    _require(cfg.attack_spoof_rate_hz >= 0, "attack.spoof_rate_hz", "must be >= 0")
    _require(cfg.attack_replay_rate_hz >= 0, "attack.replay_rate_hz", "must be >= 0")
    _require(
        cfg.attack_sybil_count == 0 or cfg.attack_sybil_count >= 2,
        "attack.sybil_count",
        "must be 0 or >= 2",
    )
    _require(cfg.attack_stop_s >= cfg.attack_start_s, "attack.stop_s", "must be >= attack.start_s")
    _require(cfg.attack_replay_delay_min_s >= 0, "attack.replay_delay_min_s", "must be >= 0")
    _require(
        cfg.attack_replay_delay_max_s >= cfg.attack_replay_delay_min_s,
        "attack.replay_delay_max_s",
        "must be >= attack.replay_delay_min_s",
    )
    for name in (
        "cost_hash",
        "cost_hmac",
        "cost_sign",
        "cost_sig_verify",
        "cost_trust_update",
        "cost_cert_verify",
        "cost_consensus_overhead",
        "baselines_pki_chain_depth",
        "baselines_pki_cert_verify_cycles",
        "baselines_blockchain_consensus_cycles",
    ):
        _require(getattr(cfg, name) >= 0, _attr_to_key(name), "must be >= 0")
    for name in (
        "baselines_pki_cert_verify_ms",
        "baselines_pki_revocation_rtt_ms",
        "baselines_blockchain_interval_ms",
    ):
        _require(getattr(cfg, name) >= 0, _attr_to_key(name), "must be >= 0")


def echo_config(cfg: ScenarioConfig) -> str:
    """Fully resolved configuration; feeding this back reproduces the run."""
    lines = []
    for f in fields(ScenarioConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, float) and math.isinf(value):
            rendered = "inf"
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = json.dumps(value)
        lines.append(f"{_attr_to_key(f.name)} = {rendered}")
    return "\n".join(lines) + "\n"
