"""Per-attempt records, aggregation, and the normative run-directory outputs.

Files written per run directory:
  attempts.csv  - one row per authentication attempt (honest and malicious)
  trust.csv     - 1 Hz trust series per vehicle, serving-fog view
  summary.json  - all aggregate fields with stable key names
  config.echo   - fully resolved configuration (re-feedable as input)

`recount` re-derives the headline aggregates from attempts.csv alone with a
separate single-pass implementation, as a cross-check on the in-memory
ledger; it deliberately shares no code with `summarize`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

ATTEMPTS_HEADER = (
    "t_s,vehicle,fog,outcome,latency_ms,comm_ms,cycles,"
    "trust_before,trust_after,malicious,detected,attack_kind"
)
TRUST_HEADER = "t_s,vehicle,trust"
DELTA_MAX_S = 0.200  # end-to-end latency budget for the security index


class Outcome(Enum):
    GRANTED = "Granted"
    GRANTED_FALLBACK = "GrantedFallback"
    REJECTED_SPOOF = "RejectedSpoof"
    REJECTED_REPLAY = "RejectedReplay"
    REJECTED_UNKNOWN = "RejectedUnknown"
    REJECTED_TRUST = "RejectedTrust"
    ABORTED = "Aborted"


GRANT_OUTCOMES = (Outcome.GRANTED, Outcome.GRANTED_FALLBACK)


@dataclass
class AttemptRecord:
    t_s: float
    vehicle: str
    fog: str
    outcome: Outcome
    latency_s: Optional[float]  # None when the attempt never completed
    comm_delay_s: float
    cycles: int
    trust_before: float
    trust_after: float
    malicious: bool
    detected: bool
    attack_kind: str = ""
    behavior: float = 1.0  # fog's behavior EMA at decision time; not serialized

    def csv_row(self) -> str:
        lat = f"{self.latency_s * 1000.0:.6f}" if self.latency_s is not None else ""
        return (
            f"{self.t_s:.6f},{self.vehicle},{self.fog},{self.outcome.value},"
            f"{lat},{self.comm_delay_s * 1000.0:.6f},{self.cycles},"
            f"{self.trust_before:.9f},{self.trust_after:.9f},"
            f"{int(self.malicious)},{int(self.detected)},{self.attack_kind}"
        )


def auth_latency(record: AttemptRecord) -> Optional[float]:
    """Seconds from request emission to acknowledgment receipt; None on timeout."""
    return record.latency_s


def end_to_end_delay(latency_s: float, comm_delay_s: float) -> float:
    if latency_s < 0 or comm_delay_s < 0:
        raise ValueError("delays must be non-negative")
    return latency_s + comm_delay_s


def session_success_rate(records: List[AttemptRecord]) -> Optional[float]:
    """Granted honest attempts over all honest attempts; None when undefined."""
    honest = [r for r in records if not r.malicious]
    if not honest:
        return None
    valid = sum(1 for r in honest if r.outcome in GRANT_OUTCOMES)
    return valid / len(honest)


def security_index(trust: float, delta_s: float, behavior: float, delta_max_s: float = DELTA_MAX_S) -> float:
    """Composite per-attempt score: trust x latency headroom x behavior."""
    if delta_max_s <= 0:
        raise ValueError("delta_max_s must be positive")
    headroom = min(1.0, max(0.0, 1.0 - delta_s / delta_max_s))
    return trust * headroom * behavior


def detection_rate(records: List[AttemptRecord], kind: Optional[str] = None) -> Optional[float]:
    """Detected-and-malicious over malicious, optionally filtered by kind."""
    malicious = [r for r in records if r.malicious and (kind is None or r.attack_kind == kind)]
    if not malicious:
        return None
    return sum(1 for r in malicious if r.detected) / len(malicious)


def false_positive_rate(records: List[AttemptRecord]) -> Optional[float]:
    """Honest attempts rejected as attacks, over honest attempts."""
    honest = [r for r in records if not r.malicious]
    if not honest:
        return None
    suspected = (Outcome.REJECTED_SPOOF, Outcome.REJECTED_REPLAY, Outcome.REJECTED_UNKNOWN)
    return sum(1 for r in honest if r.outcome in suspected) / len(honest)


def percentile_nearest_rank(values: List[float], q: float) -> float:
    """Nearest-rank percentile on a sorted copy (deterministic, no interpolation)."""
    if not values:
        raise ValueError("no values")
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def convergence_report(
    histories: Dict[str, List[Tuple[float, float]]],
    eps: float,
) -> Dict[str, Optional[float]]:
    """Earliest time after which every later value stays within eps of the
    terminal value; None marks a series that never settles. A series whose
    only in-band point is its final sample has not settled (oscillation up
    to the end counts as non-converged)."""
    report: Dict[str, Optional[float]] = {}
    for vehicle, series in histories.items():
        if not series:
            continue
        terminal = series[-1][1]
        settle: Optional[float] = None
        for t, v in series:
            if abs(v - terminal) <= eps:
                if settle is None:
                    settle = t
            else:
                settle = None
        if settle is not None and len(series) > 1 and settle >= series[-1][0]:
            settle = None
        report[vehicle] = settle
    return report


@dataclass
class MetricsLedger:
    attempts: List[AttemptRecord] = field(default_factory=list)
    trust_rows: List[Tuple[float, str, float]] = field(default_factory=list)
    background_cycles: int = 0

    def add_attempt(self, record: AttemptRecord) -> None:
        self.attempts.append(record)

    def log_trust(self, t_s: float, vehicle: str, value: float) -> None:
        self.trust_rows.append((t_s, vehicle, value))


def summarize(
    ledger: MetricsLedger,
    fleet: int,
    duration_s: float,
    theta: float,
    convergence_eps: float = 0.01,
) -> Dict:
    """Aggregate the ledger into the stable summary.json structure."""
    records = ledger.attempts
    honest = [r for r in records if not r.malicious]
    granted = [r for r in honest if r.outcome in GRANT_OUTCOMES and r.latency_s is not None]
    latencies_ms = [r.latency_s * 1000.0 for r in granted]

    summary: Dict = {
        "fleet": fleet,
        "duration_s": duration_s,
        "attempts_total": len(records),
        "attempts_honest": len(honest),
        "attempts_malicious": len(records) - len(honest),
        "outcome_counts": {
            o.value: sum(1 for r in records if r.outcome is o) for o in Outcome
        },
        "fallback_fraction": (
            sum(1 for r in granted if r.outcome is Outcome.GRANTED_FALLBACK) / len(granted)
            if granted
            else 0.0
        ),
        "background_cycles": ledger.background_cycles,
    }
    if latencies_ms:
        summary["mean_latency_ms"] = sum(latencies_ms) / len(latencies_ms)
        summary["p95_latency_ms"] = percentile_nearest_rank(latencies_ms, 0.95)
    s_rate = session_success_rate(records)
    if s_rate is not None:
        summary["s_rate"] = s_rate
    if honest:
        summary["mean_cycles"] = sum(r.cycles for r in honest) / len(honest)
        no_fallback = [r for r in honest if r.outcome is Outcome.GRANTED]
        if no_fallback:
            summary["mean_cycles_no_fallback"] = sum(r.cycles for r in no_fallback) / len(
                no_fallback
            )
        verified = [
            r
            for r in honest
            if r.outcome in (Outcome.GRANTED, Outcome.GRANTED_FALLBACK, Outcome.REJECTED_TRUST)
        ]
        if verified:
            summary["p_accept_empirical"] = sum(
                1 for r in verified if r.trust_after >= theta
            ) / len(verified)
    fp = false_positive_rate(records)
    if fp is not None:
        summary["false_positive_rate"] = fp

    kinds = sorted({r.attack_kind for r in records if r.malicious})
    detection: Dict[str, float] = {}
    for kind in kinds:
        rate = detection_rate(records, kind)
        if rate is not None:
            detection[kind] = rate
    combined = detection_rate(records)
    if combined is not None:
        detection["combined"] = combined
    if detection:
        summary["detection"] = detection

    if granted:
        indices = [
            security_index(
                r.trust_after,
                end_to_end_delay(r.latency_s, r.comm_delay_s),
                r.behavior,
            )
            for r in granted
        ]
        summary["security_index_mean"] = sum(indices) / len(indices)

    histories: Dict[str, List[Tuple[float, float]]] = {}
    for t, vehicle, value in ledger.trust_rows:
        histories.setdefault(vehicle, []).append((t, value))
    conv = convergence_report(histories, convergence_eps)
    if conv:
        converged = {v: t for v, t in conv.items() if t is not None}
        summary["trust_convergence"] = {
            "eps": convergence_eps,
            "n_vehicles": len(conv),
            "n_converged": len(converged),
            "mean_time_s": (sum(converged.values()) / len(converged)) if converged else None,
            "per_vehicle": {v: conv[v] for v in sorted(conv)},
        }
    return summary


def write_run_outputs(out_dir, ledger: MetricsLedger, summary: Dict, config_echo: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    attempts = [ATTEMPTS_HEADER]
    attempts.extend(r.csv_row() for r in ledger.attempts)
    (out / "attempts.csv").write_text("\n".join(attempts) + "\n", encoding="utf-8")
    trust = [TRUST_HEADER]
    trust.extend(f"{t:.6f},{v},{value:.9f}" for t, v, value in ledger.trust_rows)
    (out / "trust.csv").write_text("\n".join(trust) + "\n", encoding="utf-8")
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "config.echo").write_text(config_echo, encoding="utf-8")


def recount(attempts_csv_path) -> Dict:
    """Independent single-pass recount of the headline aggregates.

    Reads only the CSV text; kept separate from `summarize` on purpose so the
    two can disagree if either aggregation path goes wrong.
    """
    lines = Path(attempts_csv_path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != ATTEMPTS_HEADER:
        raise ValueError(f"unexpected attempts.csv header in {attempts_csv_path}")
    n_honest = 0
    n_granted = 0
    n_malicious = 0
    n_detected = 0
    honest_cycles = 0
    grant_latencies: List[float] = []
    outcome_counts: Dict[str, int] = {}
    for line in lines[1:]:
        if not line:
            continue
        cols = line.split(",")
        outcome = cols[3]
        latency_ms = cols[4]
        cycles = int(cols[6])
        malicious = cols[9] == "1"
        detected = cols[10] == "1"
        outcome_counts[outcome] = outcome_counts.get(outcome, 0) + 1
        if malicious:
            n_malicious += 1
            if detected:
                n_detected += 1
        else:
            n_honest += 1
            honest_cycles += cycles
            if outcome in ("Granted", "GrantedFallback"):
                n_granted += 1
                if latency_ms:
                    grant_latencies.append(float(latency_ms))
    result: Dict = {
        "attempts_total": n_honest + n_malicious,
        "attempts_honest": n_honest,
        "attempts_malicious": n_malicious,
        "outcome_counts": outcome_counts,
    }
    if n_honest:
        result["s_rate"] = n_granted / n_honest
        result["mean_cycles"] = honest_cycles / n_honest
    if grant_latencies:
        result["mean_latency_ms"] = sum(grant_latencies) / len(grant_latencies)
        ordered = sorted(grant_latencies)
        rank = max(1, math.ceil(0.95 * len(ordered)))
        result["p95_latency_ms"] = ordered[rank - 1]
    if n_malicious:
        result["detection_combined"] = n_detected / n_malicious
    return result
