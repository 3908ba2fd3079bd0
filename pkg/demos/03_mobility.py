"""Synthetic traffic on the loop circuit: car-following dynamics, density
effects, and the trace file round trip.

Run: python3 demos/03_mobility.py
"""

import statistics
import tempfile
from pathlib import Path

from ztmaf import KraussParams, RoadLoop, krauss_step, load_trace, sample, save_trace, synth_fleet
from ztmaf.simkernel import derive_rng

road = RoadLoop()  # 2 km x 1 km rectangle, 6 km of loop
params = KraussParams()  # urban defaults: v_max 13.9 m/s, 1 s timestep

# ---------------------------------------------------------------------------
# 1. One car on an empty loop accelerates to the speed limit and dithers
#    just below it (the random deceleration term).

fleet = synth_fleet(1, road, params, derive_rng(1, "mobility"), duration_s=60.0)
speeds = [s.speed_mps for s in fleet["v000"].samples]
print("lone vehicle: v(0..8) =", [round(v, 2) for v in speeds[:9]])
print("steady-state mean speed: %.2f m/s (limit %.1f)" % (statistics.mean(speeds[20:]), params.v_max_mps))

# ---------------------------------------------------------------------------
# 2. Density matters: pack 400 cars onto the same loop and the safe-speed
#    rule throttles everyone.

dense = synth_fleet(400, road, params, derive_rng(2, "mobility"), duration_s=120.0)
tail = [s.speed_mps for traj in dense.values() for s in traj.samples[60:]]
print("400-vehicle loop: mean speed %.2f m/s, max %.2f" % (statistics.mean(tail), max(tail)))

# ---------------------------------------------------------------------------
# 3. The safe-speed expression itself, for one follower-leader pair.

v_new = krauss_step(v=10.0, gap_m=20.0, leader_v=10.0, p=KraussParams(sigma=0.0), rng=derive_rng(3, "mobility"))
print("follower at 10 m/s, 20 m gap, leader 10 m/s -> %.3f m/s next step" % v_new)

# ---------------------------------------------------------------------------
# 4. Trajectories serialize to the normative CSV schema and read back
#    losslessly; continuous-time queries interpolate between samples.

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "fleet.csv"
    save_trace(fleet, path)
    reloaded = load_trace(path)
    print("round trip:", sorted(reloaded) == sorted(fleet), "|", path.read_text().splitlines()[0])
    (point, speed) = sample(reloaded["v000"], 12.5)
    print("interpolated position at t=12.5s:", tuple(round(c, 1) for c in point), "speed %.2f" % speed)
