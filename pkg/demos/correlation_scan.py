"""OAM correlation matrices before and after the router.

Uses the shipped calibrated profile (L = 6, crosstalk and white noise
fitted to the reported fidelities). Before routing the counts sit on the
anti-diagonal l_B = -l_A; after routing port B only shows even l_B and
port C only odd l_B.
"""

import numpy as np

from hdrouter.experiments import load_config, run_correlation_scan

cfg = load_config("fig3_scan")
mats = run_correlation_scan(cfg, exact=True)


def show(name, m):
    p = m.normalized().counts
    print(f"\n{name}  (rows l_A, columns l_B, percent of total)")
    print("      " + "".join(f"{l:6d}" for l in m.ells_b))
    for la, row in zip(m.ells_a, p):
        print(f"{la:4d}  " + "".join(f"{100 * x:6.1f}" if x > 5e-4 else "     ." for x in row))


for name, m in mats.items():
    show(name, m)

# fraction of counts on the anti-diagonal
for name, m in mats.items():
    anti = sum(m.counts[i, j] for i, la in enumerate(m.ells_a)
               for j, lb in enumerate(m.ells_b) if la == -lb)
    print(f"{name:10s} anti-diagonal share {anti / m.total:.3f}")
