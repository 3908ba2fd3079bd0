import json

import pytest

from ztmaf.metrics import (
    ATTEMPTS_HEADER,
    AttemptRecord,
    MetricsLedger,
    Outcome,
    auth_latency,
    convergence_report,
    detection_rate,
    end_to_end_delay,
    false_positive_rate,
    percentile_nearest_rank,
    recount,
    security_index,
    session_success_rate,
    summarize,
    write_run_outputs,
)


def _rec(outcome=Outcome.GRANTED, latency=0.1, malicious=False, detected=False,
         kind="", cycles=19500, trust=0.8):
    return AttemptRecord(
        t_s=1.0,
        vehicle="v001",
        fog="f00",
        outcome=outcome,
        latency_s=latency,
        comm_delay_s=0.003,
        cycles=cycles,
        trust_before=0.5,
        trust_after=trust,
        malicious=malicious,
        detected=detected,
        attack_kind=kind,
    )


def test_auth_latency_subtraction_semantics():
    assert auth_latency(_rec(latency=0.148)) == pytest.approx(0.148)
    assert auth_latency(_rec(outcome=Outcome.ABORTED, latency=None)) is None


def test_end_to_end_delay_sum():
    assert end_to_end_delay(0.150, 0.010) == pytest.approx(0.160)
    assert end_to_end_delay(0.150, 0.0) == pytest.approx(0.150)
    assert end_to_end_delay(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        end_to_end_delay(-0.1, 0.0)


def test_success_rate_counts_grants():
    records = [_rec() for _ in range(97)] + [_rec(outcome=Outcome.ABORTED, latency=None) for _ in range(3)]
    assert session_success_rate(records) == pytest.approx(0.97)


def test_success_rate_all_granted():
    assert session_success_rate([_rec(), _rec(outcome=Outcome.GRANTED_FALLBACK)]) == 1.0


def test_success_rate_undefined_without_honest_attempts():
    assert session_success_rate([]) is None
    assert session_success_rate([_rec(malicious=True, kind="spoof")]) is None


def test_success_rate_excludes_malicious():
    records = [_rec() for _ in range(9)] + [
        _rec(outcome=Outcome.REJECTED_SPOOF, latency=None, malicious=True, detected=True, kind="spoof")
    ]
    assert session_success_rate(records) == 1.0


def test_security_index_formula():
    assert security_index(0.8, 0.1, 0.9, 0.2) == pytest.approx(0.36)
    assert security_index(0.8, 0.25, 0.9, 0.2) == 0.0  # beyond the budget
    assert security_index(1.0, 0.0, 1.0, 0.2) == 1.0


def test_detection_rate_by_kind():
    records = (
        [_rec(outcome=Outcome.REJECTED_REPLAY, latency=None, malicious=True, detected=True, kind="replay")] * 97
        + [_rec(outcome=Outcome.GRANTED, malicious=True, detected=False, kind="replay")] * 3
        + [_rec(outcome=Outcome.REJECTED_SPOOF, latency=None, malicious=True, detected=True, kind="spoof")] * 10
    )
    assert detection_rate(records, "replay") == pytest.approx(0.97)
    assert detection_rate(records, "spoof") == 1.0
    assert detection_rate(records) == pytest.approx(107 / 110)
    assert detection_rate(records, "sybil") is None
    assert detection_rate([_rec()]) is None


def test_false_positive_rate():
    records = [_rec() for _ in range(9)] + [_rec(outcome=Outcome.REJECTED_REPLAY, latency=None)]
    assert false_positive_rate(records) == pytest.approx(0.1)


def test_percentile_nearest_rank():
    values = [float(i) for i in range(1, 101)]
    assert percentile_nearest_rank(values, 0.95) == 95.0
    assert percentile_nearest_rank([7.0], 0.95) == 7.0


def test_convergence_report_constant_psi():
    # alpha 0.92 from 0.5 toward 1.0 settles in the eps band at step 47
    alpha, value = 0.92, 0.5
    series = [(0.0, value)]
    for t in range(1, 120):
        value = alpha * value + (1 - alpha) * 1.0
        series.append((float(t), value))
    report = convergence_report({"v001": series}, eps=0.01)
    assert report["v001"] == 47.0


def test_convergence_report_already_converged():
    series = [(float(t), 0.9) for t in range(10)]
    assert convergence_report({"v": series}, eps=0.01)["v"] == 0.0


def test_convergence_report_oscillation_is_none():
    series = [(float(t), 0.5 + 0.2 * (-1) ** t) for t in range(50)]
    series.append((50.0, 0.5))
    assert convergence_report({"v": series}, eps=0.01)["v"] is None


def test_outcome_partition_in_summary():
    ledger = MetricsLedger()
    for outcome in Outcome:
        ledger.add_attempt(_rec(outcome=outcome, latency=0.1 if outcome in
                                (Outcome.GRANTED, Outcome.GRANTED_FALLBACK) else None))
    summary = summarize(ledger, fleet=10, duration_s=60.0, theta=0.65)
    counts = summary["outcome_counts"]
    assert sum(counts.values()) == summary["attempts_total"] == len(Outcome)


def test_write_and_recount_round_trip(tmp_path):
    ledger = MetricsLedger()
    for i in range(50):
        ledger.add_attempt(_rec(latency=0.1 + i * 0.001))
    for i in range(5):
        ledger.add_attempt(
            _rec(outcome=Outcome.REJECTED_SPOOF, latency=None, malicious=True,
                 detected=True, kind="spoof", cycles=8000)
        )
    ledger.log_trust(0.0, "v001", 0.5)
    summary = summarize(ledger, fleet=10, duration_s=60.0, theta=0.65)
    write_run_outputs(tmp_path, ledger, summary, "seed = 1\n")
    assert (tmp_path / "attempts.csv").read_text().splitlines()[0] == ATTEMPTS_HEADER
    counted = recount(tmp_path / "attempts.csv")
    assert counted["attempts_total"] == summary["attempts_total"]
    assert counted["s_rate"] == pytest.approx(summary["s_rate"])
    assert counted["mean_cycles"] == pytest.approx(summary["mean_cycles"])
    # latency aggregates agree at the CSV's printed precision
    assert counted["mean_latency_ms"] == pytest.approx(summary["mean_latency_ms"], abs=1e-5)
    assert counted["p95_latency_ms"] == pytest.approx(summary["p95_latency_ms"], abs=1e-5)
    assert counted["detection_combined"] == pytest.approx(summary["detection"]["combined"])
    echo = (tmp_path / "config.echo").read_text()
    assert echo == "seed = 1\n"
    assert json.loads((tmp_path / "summary.json").read_text()) == summary


def test_summary_omits_undefined_fields():
    ledger = MetricsLedger()
    ledger.add_attempt(_rec(outcome=Outcome.REJECTED_SPOOF, latency=None, malicious=True,
                            detected=True, kind="spoof"))
    summary = summarize(ledger, fleet=1, duration_s=10.0, theta=0.65)
    assert "s_rate" not in summary  # zero honest attempts
    assert "mean_latency_ms" not in summary
    assert summary["detection"]["spoof"] == 1.0
