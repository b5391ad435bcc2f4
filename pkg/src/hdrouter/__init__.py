"""Simulation and certification toolkit for an OAM parity router acting on
high-dimensionally entangled photon pairs."""

__version__ = "0.1.0"

from .measurement import (CoincidenceConfig, CoincidenceMatrix, Projector,
                          coincidence_probability, scan_oam_basis, superposition_projector)
from .modes import (DegenerateStateError, DimensionMismatchError, KetVector, ModeSpace,
                    SchmidtSpectrum, TwoPhotonDensity, TwoPhotonPureState, fidelity_pure, mix,
                    normalize, parity_project, parity_project_density, schmidt_spectrum)
from .router import (PhaseController, PortResolvedState, SorterSettings, dove_prism,
                     phase_evolve, port_amplitudes, route_photon_b, switch)
from .source import (DriftModel, ExplicitSpectrum, GaussianSpectrum, NoiseModel, apply_noise,
                     drift_at, generate_pure)
from .witness import (DensityElementSet, TargetState, WitnessReport, bound,
                      certified_dimension, estimate_density_elements, fidelity_from_elements,
                      monte_carlo_errors, optimize_target, witness)
