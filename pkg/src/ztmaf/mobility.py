"""Vehicle trajectories: trace-file ingestion and a Krauss-style synthetic
traffic generator on a rectangular loop circuit.

Trace CSV schema (normative): header `time_s,vehicle_id,x_m,y_m,speed_mps`,
UTF-8, decimal point, LF line endings.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .domain import Point

TRACE_HEADER = "time_s,vehicle_id,x_m,y_m,speed_mps"


class TraceParseError(ValueError):
    """Malformed trace row; message carries the line number."""


class TraceOrderError(ValueError):
    """Timestamps within one vehicle are not strictly increasing."""


class PlacementError(ValueError):
    """The road is too short for the fleet at minimum spacing."""


@dataclass(frozen=True)
class TrajectorySample:
    t_s: float
    x_m: float
    y_m: float
    speed_mps: float


@dataclass
class Trajectory:
    vehicle: str
    samples: List[TrajectorySample]

    def __post_init__(self):
        times = [s.t_s for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TraceOrderError(f"{self.vehicle}: sample times not strictly increasing")
        if any(s.speed_mps < 0 for s in self.samples):
            raise ValueError(f"{self.vehicle}: negative speed in trajectory")


@dataclass(frozen=True)
class KraussParams:
    v_max_mps: float = 13.9
    accel_mps2: float = 2.6
    decel_mps2: float = 4.5
    tau_s: float = 1.0
    sigma: float = 0.5
    dt_s: float = 1.0

    def __post_init__(self):
        for name in ("v_max_mps", "accel_mps2", "decel_mps2", "tau_s", "dt_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must be in [0, 1]")


@dataclass(frozen=True)
class RoadLoop:
    """Rectangular loop circuit; positions are arc lengths along the perimeter."""

    width_m: float = 2000.0
    height_m: float = 1000.0
    lanes: int = 1
    vehicle_length_m: float = 5.0
    min_gap_m: float = 3.0

    @property
    def length_m(self) -> float:
        return 2.0 * (self.width_m + self.height_m)

    def point_at(self, arc_m: float, lane: int = 0) -> Point:
        """Map arc length (counter-clockwise from the origin corner) to 2-D."""
        inset = 3.5 * lane  # inner lanes sit on smaller concentric rectangles
        w = self.width_m - 2 * inset
        h = self.height_m - 2 * inset
        perim = 2.0 * (w + h)
        s = arc_m % perim
        if s < w:
            x, y = s, 0.0
        elif s < w + h:
            x, y = w, s - w
        elif s < 2 * w + h:
            x, y = w - (s - w - h), h
        else:
            x, y = 0.0, h - (s - 2 * w - h)
        return (x + inset, y + inset)


def load_trace(path) -> Dict[str, Trajectory]:
    """Read an exported positions CSV into one Trajectory per vehicle id."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceParseError(f"line 1: expected header {TRACE_HEADER!r}")
    rows: Dict[str, List[TrajectorySample]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise TraceParseError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            t = float(parts[0])
            vid = parts[1].strip()
            x, y, v = float(parts[2]), float(parts[3]), float(parts[4])
        except ValueError as exc:
            raise TraceParseError(f"line {lineno}: {exc}") from exc
        if not vid:
            raise TraceParseError(f"line {lineno}: empty vehicle id")
        prior = rows.setdefault(vid, [])
        if prior and t <= prior[-1].t_s:
            raise TraceOrderError(
                f"line {lineno}: {vid} time {t} not after {prior[-1].t_s}"
            )
        prior.append(TrajectorySample(t, x, y, v))
    return {vid: Trajectory(vid, samples) for vid, samples in rows.items()}


def save_trace(trajectories: Dict[str, Trajectory], path) -> None:
    """Write trajectories back out in the normative CSV schema."""
    out = [TRACE_HEADER]
    for vid in sorted(trajectories):
        for s in trajectories[vid].samples:
            out.append(f"{s.t_s:.3f},{vid},{s.x_m:.3f},{s.y_m:.3f},{s.speed_mps:.3f}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def sample(traj: Trajectory, t_s: float) -> Tuple[Point, float]:
    """Linear interpolation between bracketing samples, clamped outside."""
    samples = traj.samples
    if not samples:
        raise ValueError("trajectory is empty")
    times = [s.t_s for s in samples]
    if t_s <= times[0]:
        s = samples[0]
        return (s.x_m, s.y_m), s.speed_mps
    if t_s >= times[-1]:
        s = samples[-1]
        return (s.x_m, s.y_m), s.speed_mps
    hi = bisect.bisect_right(times, t_s)
    a, b = samples[hi - 1], samples[hi]
    frac = (t_s - a.t_s) / (b.t_s - a.t_s)
    return (
        (a.x_m + frac * (b.x_m - a.x_m), a.y_m + frac * (b.y_m - a.y_m)),
        a.speed_mps + frac * (b.speed_mps - a.speed_mps),
    )


def krauss_step(v: float, gap_m: float, leader_v: float, p: KraussParams, rng) -> float:
    """One car-following update; gap_m is the usable gap to the leader."""
    if gap_m < 0:
        raise ValueError("gap_m must be >= 0")
    v_safe = leader_v + (gap_m - leader_v * p.tau_s) / (
        (v + leader_v) / (2.0 * p.decel_mps2) + p.tau_s
    )
    v_des = min(v + p.accel_mps2 * p.dt_s, p.v_max_mps, v_safe)
    jitter = p.sigma * p.accel_mps2 * p.dt_s * float(rng.uniform(0.0, 1.0)) if p.sigma > 0 else 0.0
    return max(0.0, v_des - jitter)


def synth_fleet(
    n_vehicles: int,
    road: RoadLoop,
    p: KraussParams,
    rng,
    duration_s: float,
    labels: Sequence[str] = None,
) -> Dict[str, Trajectory]:
    """Advance a uniformly placed fleet around the loop with krauss_step.

    Vehicles are spread round-robin over lanes; each lane is an independent
    ring (no lane changing). Deterministic given the rng stream.
    """
    if n_vehicles < 1:
        raise ValueError("n_vehicles must be >= 1")
    if labels is None:
        labels = [f"v{i:03d}" for i in range(n_vehicles)]
    slot = road.vehicle_length_m + road.min_gap_m
    lane_count = max(1, road.lanes)
    per_lane = [n_vehicles // lane_count + (1 if i < n_vehicles % lane_count else 0)
                for i in range(lane_count)]
    if any(n * slot > road.length_m for n in per_lane):
        raise PlacementError(
            f"{n_vehicles} vehicles need more than {road.length_m:.0f} m of loop"
        )

    steps = int(math.floor(duration_s / p.dt_s)) + 1
    arcs: List[float] = []
    speeds: List[float] = []
    lane_of: List[int] = []
    lane_members: List[List[int]] = [[] for _ in range(lane_count)]
    idx = 0
    for lane, n in enumerate(per_lane):
        spacing = road.length_m / n if n else 0.0
        for k in range(n):
            arcs.append(k * spacing)
            speeds.append(0.0)
            lane_of.append(lane)
            lane_members[lane].append(idx)
            idx += 1

    tracks: List[List[TrajectorySample]] = [[] for _ in range(n_vehicles)]
    for step in range(steps):
        t = step * p.dt_s
        for i in range(n_vehicles):
            x, y = road.point_at(arcs[i], lane_of[i])
            tracks[i].append(TrajectorySample(t, x, y, speeds[i]))
        if step == steps - 1:
            break
        new_speeds = list(speeds)
        for lane, members in enumerate(lane_members):
            n = len(members)
            for j, i in enumerate(members):
                if n == 1:
                    gap = road.length_m  # free ring
                    leader_v = speeds[i]
                else:
                    lead = members[(j + 1) % n]
                    gap_raw = (arcs[lead] - arcs[i]) % road.length_m
                    if gap_raw == 0.0 and lead != i:
                        gap_raw = road.length_m
                    gap = max(0.0, gap_raw - road.vehicle_length_m - road.min_gap_m)
                    leader_v = speeds[lead]
                new_speeds[i] = krauss_step(speeds[i], gap, leader_v, p, rng)
        speeds = new_speeds
        for i in range(n_vehicles):
            arcs[i] = (arcs[i] + speeds[i] * p.dt_s) % road.length_m
    return {labels[i]: Trajectory(labels[i], tracks[i]) for i in range(n_vehicles)}
