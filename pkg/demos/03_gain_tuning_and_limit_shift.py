"""Pick controller gains from targets, then shift the voltage band online.

Part 1 re-derives the reference gain table from first principles: the
frequency droop gain from the allowed steady-state deviation, tau_Omega
from a rate-of-change-of-frequency budget, the consensus gain from the
ring's algebraic connectivity, and the leak gain beta from a sharing-error
budget.

Part 2 demonstrates the limit-shift capability: at 20 s the band is raised
to (1.01, 1.05) and the fleet glides to the new level while reactive
sharing recovers.

Run:  python3 demos/03_gain_tuning_and_limit_shift.py
"""

from dataclasses import replace

import numpy as np

import mgshare as mg

# --- part 1: tuning ---------------------------------------------------------
graph = mg.CommGraph.ring(5)
spec = mg.TuningSpec(delta_f_max=0.005, rocof_star=2.5)
tuned = mg.tune(spec, graph, 0.95, 1.05)

print("targets: |df| <= 0.5% of 50 Hz, RoCoF <= 2.5 Hz/s, sharing error <= 5e-4")
print(f"  m*        = {tuned.m_star:.4f} rad/s per p.u.  (gain table: 1.57)")
print(f"  m_V       = {tuned.m_v_volt[0]:.1f} V            (gain table: 11 V)")
print(f"  tau_Omega = {tuned.tau_omega:.2f} s, tau_d = {tuned.tau_d:.2f} s, "
      f"tau_v = {tuned.tau_v:.2f} s")
print(f"  sigma2    = {tuned.sigma2:.4f}  ->  k = k_d/sigma2 = {tuned.k:.4f} "
      f"(gain table: 7.24)")
print(f"  beta      = {tuned.beta}")

report = mg.validate(mg.parse_scenario("lv5").params, beta_error_budget=5e-4)
print(f"bundled scenario gains validate: {report.ok} "
      f"({len(report.checked)} rules checked)")

# --- part 2: limit shift ----------------------------------------------------
scenario = mg.parse_scenario("lv5")
events = (
    mg.Event(time=10.0, kind="activate"),
    mg.Event(time=20.0, kind="set-limits", v_min=1.01, v_max=1.05),
)
ts = mg.simulate(replace(scenario, t_end=40.0, events=events))

for t in (19.0, 21.0, 30.0, 40.0):
    i = ts.index_at(t)
    print(f"t = {t:4.0f} s  band ({ts.v_min[i][0]:.2f}, {ts.v_max[i][0]:.2f})  "
          f"V = {np.round(ts.V[i], 4)}")
i = ts.index_at(40.0)
sat = sorted(mg.detect_saturated_set(ts, 40.0))
unsat = [j for j in range(1, 6) if j not in sat]
gap = mg.sharing_error(ts, 40.0)[[j - 1 for j in unsat]].max()
print(f"after the shift: saturated {sat}; leak-free units share within {gap:.1e}")
