"""Fidelity of the routed states over a 39 hour run.

The source slowly loses spectral width and brightness, and the sorter
phase drifts between recalibrations. Each hour-long window is witnessed
with the targets chosen in the first window.
"""

import numpy as np

from hdrouter.experiments import load_config, run_longterm

cfg = load_config("fig5a_longrun")
res = run_longterm(cfg)
s = res["series"]
state = np.array(s["state"])
for which in cfg.longrun.states:
    sel = state == which
    t, F, err, B = (np.array(s[k])[sel] for k in ("t_h", "F", "F_err", "bound"))
    d = np.array(s["certified_d"])[sel]
    print(f"\n{which}: bound {B[0]:.4f}")
    for i in range(0, len(t), 6):
        bar = "#" * int(round(200 * (F[i] - 0.8)))
        print(f"  t = {t[i]:5.1f} h  F = {F[i]:.4f} +- {err[i]:.4f}  d = {d[i]}  {bar}")
    print(f"  F stays above the bound in {np.mean(F > B):.0%} of windows")
