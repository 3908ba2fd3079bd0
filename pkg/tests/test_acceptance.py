"""Acceptance gate: every headline criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass line per
criterion. The heavyweight scenarios (the five-point fleet sweep, the
fleet-300 model comparison, and the attack runs) are shared module-scoped
fixtures so the whole gate stays inside its runtime budgets.
"""

import json
import math
import time
from pathlib import Path

import pytest

from ztmaf.config import ScenarioConfig
from ztmaf.crypto import canonical_encode, keypair_from_seed, sign, verify
from ztmaf.domain import ContextVector, NodeId, TrustState
from ztmaf.metrics import convergence_report, recount
from ztmaf.runner import Simulation, compare, run, sweep
from ztmaf.simkernel import derive_rng
from ztmaf.trust import TrustParams, convergence_time, update_trust

SWEEP_BUDGET_S = 120.0


def _report(criterion: str, detail: str) -> None:
    print(f"[PASS] {criterion}: {detail}")


# ---------------------------------------------------------------------------
# shared scenario fixtures


@pytest.fixture(scope="module")
def sweep_result(tmp_path_factory):
    # default five-point sweep, high-mobility tier, attack-free
    cfg = ScenarioConfig()
    cfg.mobility_tier = "high"
    out = tmp_path_factory.mktemp("sweep")
    t0 = time.monotonic()
    sweep(cfg, out)
    elapsed = time.monotonic() - t0
    rows = []
    for line in (out / "sweep.csv").read_text().splitlines()[1:]:
        fleet, mean_ms, p95_ms, s_rate, cycles, _ = line.split(",")
        rows.append(
            {
                "fleet": int(fleet),
                "mean_latency_ms": float(mean_ms),
                "p95_latency_ms": float(p95_ms),
                "s_rate": float(s_rate),
                "mean_cycles": float(cycles),
            }
        )
    return {"rows": rows, "dir": out, "elapsed_s": elapsed}


@pytest.fixture(scope="module")
def compare_result(tmp_path_factory):
    cfg = ScenarioConfig()
    cfg.fleet_sizes = [300]
    out = tmp_path_factory.mktemp("compare")
    results = compare(cfg, out)
    return {r["model"]: r for r in results}


def _attack_cfg() -> ScenarioConfig:
    cfg = ScenarioConfig()
    cfg.fleet_sizes = [100]
    cfg.attack_spoof_rate_hz = 1.0
    cfg.attack_replay_rate_hz = 0.25
    return cfg


@pytest.fixture(scope="module")
def attack_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("attack")
    summary = run(_attack_cfg(), out)
    return {"summary": summary, "dir": out}


@pytest.fixture(scope="module")
def infinite_ttl_run(tmp_path_factory):
    cfg = _attack_cfg()
    cfg.replay_ttl_s = math.inf
    out = tmp_path_factory.mktemp("attack_inf")
    summary = run(cfg, out)
    return {"summary": summary, "dir": out}


# ---------------------------------------------------------------------------
# criterion: trust convergence


def test_trust_convergence_47_steps():
    t0 = time.monotonic()
    params = TrustParams(alpha=0.92)
    steps = convergence_time(0.5, 1.0, 0.92, 0.01)
    assert abs(steps - 47) <= 1

    # oracle: iterate the filter at 1 Hz and find the actual crossing
    state = TrustState(value=0.5)
    series = [(0.0, 0.5)]
    iterated = None
    for n in range(1, 121):
        ctx = ContextVector(speed_mps=0.0, location=(0.0, 0.0), behavior=1.0,
                            timestamp_s=float(n))
        state = update_trust(state, ctx, 1.0, params)
        series.append((float(n), state.value))
        if iterated is None and abs(state.value - 1.0) <= 0.01:
            iterated = n
    assert iterated == steps

    settled = convergence_report({"v": series}, eps=0.01)["v"]
    assert settled == float(steps)

    # the fifty-second stabilization figure, within 10 percent at 1 Hz
    assert abs(steps - 50) / 50 <= 0.10
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    _report(
        "trust convergence",
        f"closed form = iterated = report = {steps} steps (50 s +/- 10%), {elapsed:.3f}s runtime",
    )


# ---------------------------------------------------------------------------
# criteria: latency, success rate, scalability (one shared sweep)


def test_sweep_runtime_budget(sweep_result):
    assert sweep_result["elapsed_s"] < SWEEP_BUDGET_S
    _report("sweep runtime", f"{sweep_result['elapsed_s']:.1f}s for 5 fleets (< {SWEEP_BUDGET_S:.0f}s)")


def test_latency_below_200ms_at_400_vehicles(sweep_result):
    row = next(r for r in sweep_result["rows"] if r["fleet"] == 400)
    assert row["mean_latency_ms"] < 200.0
    _report("latency claim", f"fleet 400 mean latency {row['mean_latency_ms']:.1f} ms < 200 ms")


def test_success_rate_high_mobility_at_300(sweep_result):
    row = next(r for r in sweep_result["rows"] if r["fleet"] == 300)
    assert row["s_rate"] >= 0.95
    _report("success rate", f"high mobility, fleet 300, attack-free: {row['s_rate']:.4f} >= 0.95")


def test_scalability_100_to_500(sweep_result):
    rows = sorted(sweep_result["rows"], key=lambda r: r["fleet"])
    assert [r["fleet"] for r in rows] == [100, 200, 300, 400, 500]
    assert all(r["s_rate"] >= 0.95 for r in rows)
    violations = sum(
        1 for a, b in zip(rows, rows[1:]) if b["mean_latency_ms"] < a["mean_latency_ms"]
    )
    assert violations <= 1
    curve = " -> ".join(f"{r['mean_latency_ms']:.0f}" for r in rows)
    _report(
        "scalability",
        f"s_rate >= 0.95 at all 5 points, latency {curve} ms, {violations} monotonicity violation(s)",
    )


# ---------------------------------------------------------------------------
# criterion: cycle model


def test_cycle_model(sweep_result):
    run_300 = sweep_result["dir"] / "run_0300"
    summary = json.loads((run_300 / "summary.json").read_text())
    assert summary["mean_cycles"] < 25_000
    granted_cycles = set()
    for line in (run_300 / "attempts.csv").read_text().splitlines()[1:]:
        cols = line.split(",")
        if cols[3] == "Granted" and cols[9] == "0":
            granted_cycles.add(int(cols[6]))
    assert granted_cycles == {19_500}
    _report(
        "cycle model",
        f"mean {summary['mean_cycles']:.0f} < 25000; every non-fallback grant exactly 19500",
    )


# ---------------------------------------------------------------------------
# criterion: detection


def test_detection_exact_with_infinite_ttl(infinite_ttl_run):
    detection = infinite_ttl_run["summary"]["detection"]
    assert detection["spoof"] == 1.0
    assert detection["replay"] == 1.0
    assert detection["combined"] == 1.0
    _report("detection (infinite TTL)", "spoof and replay detection exactly 100%")


def test_detection_band_with_default_ttl(attack_run):
    detection = attack_run["summary"]["detection"]
    assert detection["spoof"] == 1.0
    assert 0.95 <= detection["combined"] <= 0.99
    _report(
        "detection (TTL 30 s)",
        f"combined {detection['combined']:.4f} in [0.95, 0.99] "
        f"(spoof {detection['spoof']:.2f}, replay {detection['replay']:.4f})",
    )


# ---------------------------------------------------------------------------
# criterion: comparative ratios


def test_comparative_ratios_at_300(compare_result):
    zt = compare_result["ztmaf"]["mean_latency_ms"]
    blockchain = compare_result["blockchain"]["mean_latency_ms"]
    pki = compare_result["pki"]["mean_latency_ms"]
    ratio_bc = zt / blockchain
    ratio_pki = zt / pki
    assert abs(ratio_bc - 0.79) <= 0.05
    assert abs(ratio_pki - 0.65) <= 0.05
    # the per-attempt ztmaf <= baseline assertion is enforced inside compare()
    _report(
        "comparative ratios",
        f"fleet 300: vs blockchain {ratio_bc:.3f} (0.79 +/- 0.05), vs PKI {ratio_pki:.3f} (0.65 +/- 0.05)",
    )


# ---------------------------------------------------------------------------
# criterion: property suites


def test_property_trust_bounds_convex_closed_form():
    rng = derive_rng(424242, "acceptance-trust")
    for _ in range(10_000):
        t0 = float(rng.uniform(0.0, 1.0))
        psi_value = float(rng.uniform(0.0, 1.0))
        alpha = float(rng.uniform(0.01, 0.99))
        params = TrustParams(alpha=alpha)
        ctx = ContextVector(speed_mps=0.0, location=(0.0, 0.0), behavior=1.0, timestamp_s=1.0)
        updated = update_trust(TrustState(value=t0), ctx, psi_value, params).value
        assert 0.0 <= updated <= 1.0
        assert min(t0, psi_value) - 1e-12 <= updated <= max(t0, psi_value) + 1e-12
    for _ in range(100):
        t0 = float(rng.uniform(0.0, 1.0))
        psi_star = float(rng.uniform(0.0, 1.0))
        alpha = float(rng.uniform(0.5, 0.99))
        params = TrustParams(alpha=alpha)
        state = TrustState(value=t0)
        for n in range(1, 201):
            ctx = ContextVector(speed_mps=0.0, location=(0.0, 0.0), behavior=1.0,
                                timestamp_s=float(n))
            state = update_trust(state, ctx, psi_star, params)
            closed = psi_star + alpha**n * (t0 - psi_star)
            assert abs(state.value - closed) < 1e-12
    _report("trust properties", "bounds/convexity on 1e4 cases, closed form to 1e-12 over 200 steps x 100")


def test_property_encoding_injectivity_1e5():
    rng = derive_rng(17, "acceptance-encoding")
    node = NodeId.vehicle(1)
    seen = {}
    collisions = 0
    for _ in range(100_000):
        quantized = (
            int(rng.integers(0, 50_001)),          # speed grid (1e-3 m/s)
            int(rng.integers(-1_000_000, 1_000_001)),  # x grid (1e-3 m)
            int(rng.integers(-1_000_000, 1_000_001)),  # y grid
            int(rng.integers(0, 1_000_001)),        # behavior grid (1e-6)
            int(rng.integers(0, 1_000_001)),        # trust grid (1e-6)
        )
        ctx = ContextVector(
            speed_mps=quantized[0] / 1e3,
            location=(quantized[1] / 1e3, quantized[2] / 1e3),
            behavior=quantized[3] / 1e6,
            timestamp_s=0.0,
        )
        encoded = canonical_encode(node, ctx, quantized[4] / 1e6)
        prior = seen.get(encoded)
        if prior is not None and prior != quantized:
            collisions += 1
        seen[encoded] = quantized
    assert collisions == 0
    _report("encoding injectivity", "1e5 random quantized tuples, zero collisions")


def test_property_sign_verify_1e3():
    rng = derive_rng(23, "acceptance-sign")
    for _ in range(1000):
        key = keypair_from_seed(bytes(rng.bytes(32)))
        msg = bytes(rng.bytes(int(rng.integers(1, 128))))
        assert verify(sign(msg, key), msg, key.public)
    _report("sign/verify", "1000 random (message, key) round trips accepted")


def test_property_hmac_conformance():
    import hashlib

    vectors = json.loads(
        (Path(__file__).parent / "fixtures" / "hmac_sha256_vectors.json").read_text()
    )

    def oracle(key: bytes, msg: bytes) -> str:
        if len(key) > 64:
            key = hashlib.sha256(key).digest()
        key = key + b"\x00" * (64 - len(key))
        inner = hashlib.sha256(bytes(b ^ 0x36 for b in key) + msg).digest()
        return hashlib.sha256(bytes(b ^ 0x5C for b in key) + inner).hexdigest()

    from ztmaf.crypto import Nonce, SharedSecret, derive_session_key

    for vec in vectors:
        assert oracle(bytes.fromhex(vec["key_hex"]), bytes.fromhex(vec["message_hex"])) == vec["digest_hex"]
    rng = derive_rng(29, "acceptance-hmac")
    for _ in range(100):
        shared = SharedSecret(bytes(rng.bytes(32)))
        nonce = Nonce(bytes(rng.bytes(16)))
        assert derive_session_key(shared, nonce).bytes.hex() == oracle(shared.bytes, nonce.bytes)
    _report("keyed-hash conformance", f"{len(vectors)} published vectors + 100 random oracle agreements")


def test_property_conservation_and_causality():
    rng = derive_rng(31, "acceptance-scenarios")
    for _ in range(10):
        cfg = ScenarioConfig()
        cfg.fleet_sizes = [int(rng.integers(3, 12))]
        cfg.sim_duration_s = float(rng.integers(30, 60))
        cfg.sim_start_jitter_s = 5.0
        cfg.net_loss_prob = float(rng.uniform(0.0, 0.25))
        cfg.attack_spoof_rate_hz = float(rng.uniform(0.0, 0.4))
        cfg.attack_start_s = 5.0
        cfg.attack_stop_s = 25.0
        cfg.seed = int(rng.integers(1, 1_000_000))
        sim = Simulation(cfg, cfg.fleet_sizes[0], cfg.seed)
        sim.run()  # audit raises on any conservation or causality breach
    _report("packet conservation + causality", "10 random scenarios audited clean")


def test_property_bitwise_determinism(attack_run, tmp_path):
    again = tmp_path / "again"
    run(_attack_cfg(), again)
    a = (attack_run["dir"] / "attempts.csv").read_bytes()
    b = (again / "attempts.csv").read_bytes()
    assert a == b
    _report("bitwise determinism", f"two identical invocations, identical attempts.csv ({len(a)} bytes)")


def test_property_summary_equals_recount(attack_run, sweep_result):
    for run_dir, summary in (
        (attack_run["dir"], attack_run["summary"]),
        (
            sweep_result["dir"] / "run_0300",
            json.loads((sweep_result["dir"] / "run_0300" / "summary.json").read_text()),
        ),
    ):
        counted = recount(run_dir / "attempts.csv")
        assert counted["attempts_total"] == summary["attempts_total"]
        assert counted["attempts_honest"] == summary["attempts_honest"]
        assert counted["outcome_counts"] == {
            k: v for k, v in summary["outcome_counts"].items() if v
        }
        assert counted["s_rate"] == pytest.approx(summary["s_rate"], abs=1e-12)
        assert counted["mean_cycles"] == pytest.approx(summary["mean_cycles"], abs=1e-9)
        assert counted["mean_latency_ms"] == pytest.approx(summary["mean_latency_ms"], abs=1e-5)
        assert counted["p95_latency_ms"] == pytest.approx(summary["p95_latency_ms"], abs=1e-5)
        if "detection" in summary:
            assert counted["detection_combined"] == pytest.approx(
                summary["detection"]["combined"], abs=1e-12
            )
    _report("summary vs recount", "independent single-pass recount agrees on both scenario kinds")
