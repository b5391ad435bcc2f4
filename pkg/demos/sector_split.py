"""Parity sorting of an 11-mode anti-correlated state.

A uniform superposition over l = -5..5 is sent through the sorter with the
Dove prisms at a relative angle of pi/2. Photon B's even modes leave port B,
the odd ones leave port C, and each branch keeps its coherence: a
5-dimensional state between A and B and a 6-dimensional one between A and C.
"""

import math

import numpy as np

from hdrouter.modes import ModeSpace, TwoPhotonPureState, fidelity_pure, normalize, parity_project
from hdrouter.router import SorterSettings, port_amplitudes, route_photon_b, switch

space = ModeSpace(5)
psi = TwoPhotonPureState.anti_correlated(space, np.ones(space.dim) / math.sqrt(space.dim))
settings = SorterSettings(delta_alpha=math.pi / 2, phi=0.0, visibility=1.0)

# transmission per mode of photon B
t_b, t_c = port_amplitudes(space.ells, settings)
print(" l_B   |t_B|^2  |t_C|^2")
for l, b, c in zip(space.ells, np.abs(t_b) ** 2, np.abs(t_c) ** 2):
    print(f"{l:4d}   {b:7.3f}  {c:7.3f}")

ports = route_photon_b(psi.density(), settings)
p_b, p_c = ports.probabilities
print(f"\nport B carries {p_b:.6f} (5/11 = {5 / 11:.6f})")
print(f"port C carries {p_c:.6f} (6/11 = {6 / 11:.6f})")

for name, port, parity in (("B", ports.port_b, "even"), ("C", ports.port_c, "odd")):
    sector = normalize(parity_project(psi, "B", parity))
    print(f"fidelity of port {name} with the {parity} sector state: "
          f"{fidelity_pure(port.normalized(), sector):.12f}")

# a phase step of pi reverses the sorting direction
p_b, p_c = route_photon_b(psi.density(), switch(settings)).probabilities
print(f"\nafter phi -> phi + pi: port B {p_b:.6f}, port C {p_c:.6f}")
