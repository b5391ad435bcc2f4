"""The desk-scale reproductions: correlation scans, witness runs, the long
fidelity run and the switching trace. Each is a pure function of the config
(which carries the seed) and the ``exact`` flag."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..measurement import (coincidence_probability, expected_counts,
                           scan_oam_basis, stream_rng, substream, superposition_projector)
from ..modes import TwoPhotonDensity
from ..router import phase_evolve, route_photon_b, switch
from ..source import apply_noise, drift_at, generate_pure
from ..witness import (DensityElementSet, WitnessReport, cross_sector_bias,
                       estimate_density_elements, monte_carlo_errors, optimize_target,
                       report_for_target)
from .config import SCENARIOS, ScenarioConfig

# top-level stream tags, one per experiment
SCAN_TAG, WITNESS_TAG, LONGRUN_TAG, SWITCH_TAG = 11, 12, 13, 14


class NumericalError(RuntimeError):
    """A computation produced an unusable (non-finite or degenerate) result."""


def source_state(cfg: ScenarioConfig, t_h: float = 0.0):
    """Noisy source state after ``t_h`` hours of drift, and its count-rate factor."""
    spectrum, rate = drift_at(cfg.spectrum_model(), cfg.drift_model(), t_h)
    psi = generate_pure(cfg.space(), spectrum)
    return apply_noise(psi, cfg.noise_model()), rate


def scenario_state(rho: TwoPhotonDensity, which: str, settings):
    """The state a witness row is measured on, and the fraction of pairs it keeps.

    Routed states are renormalized per port; the port probability scales the
    count rate instead.
    """
    if which == "psi_AB":
        return rho, 1.0
    ports = route_photon_b(rho, settings)
    port = ports.port_b if which == "alpha_AB" else ports.port_c
    trace = port.trace
    if not trace > 1e-15:
        raise NumericalError(f"no intensity reaches the {which} port")
    return port.normalized(), min(trace, 1.0)


# correlation scans ------------------------------------------------------------

def run_correlation_scan(cfg: ScenarioConfig, exact: bool = False) -> dict:
    """OAM-basis scans before routing (A+B) and after routing (A+B, A+C)."""
    rho, rate = source_state(cfg)
    ports = route_photon_b(rho, cfg.sorter())
    ra = cfg.scan.range_a or None
    rb = cfg.scan.range_b or None
    coinc = cfg.coincidence_config()
    out = {}
    for k, (name, state) in enumerate([("before_AB", rho), ("after_AB", ports.port_b),
                                       ("after_AC", ports.port_c)]):
        seed = substream(cfg.seed, SCAN_TAG, k)
        out[name] = scan_oam_basis(state, ra, rb, coinc, seed, exact=exact, rate_scale=rate)
    return out


# witness table ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WitnessRun:
    which: str
    report: WitnessReport
    elements: DensityElementSet
    bias: float
    target_source: str
    optimized: WitnessReport | None = None

    def as_dict(self) -> dict:
        d = {"state": self.which, **self.report.as_dict(),
             "normalization": self.elements.normalization,
             "cross_sector_bias": self.bias, "target_source": self.target_source,
             "index_list": list(self.elements.ells)}
        if self.optimized is not None:
            d["optimized"] = self.optimized.as_dict()
        return d


def _check_finite(report: WitnessReport):
    if not (math.isfinite(report.fidelity) and math.isfinite(report.bound)):
        raise NumericalError("non-finite fidelity or bound")


def run_witness(cfg: ScenarioConfig, which: str, exact: bool = False) -> WitnessRun:
    """Measure the elements of one reference state, choose the target (shipped or
    optimized), and attach the Monte Carlo error.

    With a shipped target the optimizer's own choice is reported alongside.
    The cross-sector bias of the estimator on this state is always reported.
    """
    if which not in SCENARIOS:
        raise ValueError(f"unknown state {which!r}; choose from {SCENARIOS}")
    tag = SCENARIOS.index(which)
    rho, rate = source_state(cfg)
    state, keep = scenario_state(rho, which, cfg.sorter())
    ells = cfg.witness_modes(which)
    norm = cfg.witness.normalization
    el = estimate_density_elements(state, ells, cfg.coincidence_config(),
                                   substream(cfg.seed, WITNESS_TAG, tag, 0), exact=exact,
                                   rate_scale=rate * keep, normalization=norm)
    opt = optimize_target(el, substream(cfg.seed, WITNESS_TAG, tag, 1))
    shipped = cfg.target(which)
    if shipped is None:
        report, source, alt = opt, "optimized", None
    else:
        report, source, alt = report_for_target(el, shipped), "config", opt
    _check_finite(report)
    err = monte_carlo_errors(el, report.target, cfg.witness.trials,
                             substream(cfg.seed, WITNESS_TAG, tag, 2), workers=cfg.run.workers)
    report = replace(report, fidelity_err=err)
    bias = cross_sector_bias(state, ells, norm)
    return WitnessRun(which, report, el, bias, source, alt)


# long run ---------------------------------------------------------------------

def window_times(cfg: ScenarioConfig) -> np.ndarray:
    lr = cfg.longrun
    n = int(math.floor(lr.duration_h / lr.window_h + 1e-9))
    return np.arange(n + 1) * lr.window_h


def run_longterm(cfg: ScenarioConfig, exact: bool = False) -> dict:
    """Fidelity time series of the routed states over the long run.

    The source drifts (``[drift]``) while the sorter phase random-walks and is
    reset every recalibration interval. The target of each state is fixed by
    the first window (or shipped in the config) and kept for all later ones.
    Returns column arrays keyed by name.
    """
    times = window_times(cfg)
    ctl = cfg.phase_controller()
    settings = cfg.sorter()
    rng = stream_rng(substream(cfg.seed, LONGRUN_TAG, 0))
    substeps = max(1, math.ceil(cfg.longrun.window_h / ctl.recal_interval))
    norm = cfg.witness.normalization
    targets = {w: cfg.target(w) for w in cfg.longrun.states}
    cols = {k: [] for k in ("t_h", "state", "F", "F_err", "bound", "certified_d",
                            "rate_scale", "port_trace", "phi")}
    prev = 0.0
    for i, t in enumerate(times):
        for _ in range(substeps):
            settings = phase_evolve(ctl, settings, (t - prev) / substeps, rng)
        prev = t
        rho, rate = source_state(cfg, float(t))
        for s, which in enumerate(cfg.longrun.states):
            state, keep = scenario_state(rho, which, settings)
            ells = cfg.witness_modes(which)
            el = estimate_density_elements(state, ells, cfg.coincidence_config(),
                                           substream(cfg.seed, LONGRUN_TAG, 1, i, s),
                                           exact=exact, rate_scale=rate * keep,
                                           normalization=norm)
            if targets[which] is None:
                targets[which] = optimize_target(
                    el, substream(cfg.seed, LONGRUN_TAG, 2, s)).target
            rep = report_for_target(el, targets[which])
            _check_finite(rep)
            err = monte_carlo_errors(el, rep.target, cfg.longrun.trials,
                                     substream(cfg.seed, LONGRUN_TAG, 3, i, s),
                                     workers=cfg.run.workers)
            for k, v in (("t_h", float(t)), ("state", which), ("F", rep.fidelity),
                         ("F_err", err), ("bound", rep.bound), ("certified_d", rep.certified_d),
                         ("rate_scale", rate), ("port_trace", keep), ("phi", settings.phi)):
                cols[k].append(v)
    return {"series": cols, "targets": {w: t.as_dict() for w, t in targets.items()}}


# switching --------------------------------------------------------------------

def run_switching(cfg: ScenarioConfig, exact: bool = False) -> dict:
    """Square-wave switching of the sorter phase between ``phi`` and
    ``phi + pi``, with all detectors projecting onto the configured
    two-mode superposition. Returns the binned traces and the per-period and
    mean visibilities of both detector pairs.
    """
    sw = cfg.switch
    space = cfg.space()
    rho, rate = source_state(cfg)
    proj = superposition_projector(space, sw.superposition[0], sw.superposition[1], 0.0)
    base = cfg.sorter()
    half = 0.5 / sw.frequency_hz
    width = half / sw.bins_per_half
    coinc = cfg.coincidence_config()
    # per-second coincidence rates of both pairs in each switch position
    rates = []
    for settings in (base, switch(base)):
        ports = route_photon_b(rho, settings)
        p_ab = coincidence_probability(ports.port_b, proj, proj)
        p_ac = coincidence_probability(ports.port_c, proj, proj)
        unit = replace(coinc, integration_time=width)
        rates.append((expected_counts(p_ab, unit, rate), expected_counts(p_ac, unit, rate)))
    n_bins = 2 * sw.periods * sw.bins_per_half
    t = (np.arange(n_bins) + 0.5) * width
    position = (np.arange(n_bins) // sw.bins_per_half) % 2
    mu_ab = np.array([rates[p][0] for p in position])
    mu_ac = np.array([rates[p][1] for p in position])
    if exact:
        ab, ac = mu_ab, mu_ac
    else:
        ab = np.array([stream_rng(substream(cfg.seed, SWITCH_TAG), b, 0).poisson(m)
                       for b, m in enumerate(mu_ab)], dtype=float)
        ac = np.array([stream_rng(substream(cfg.seed, SWITCH_TAG), b, 1).poisson(m)
                       for b, m in enumerate(mu_ac)], dtype=float)
    # half-period totals, shape (periods, 2)
    h_ab = ab.reshape(sw.periods, 2, sw.bins_per_half).sum(axis=2)
    h_ac = ac.reshape(sw.periods, 2, sw.bins_per_half).sum(axis=2)

    def visibility(h):
        hi, lo = h.max(axis=1), h.min(axis=1)
        tot = hi + lo
        return np.where(tot > 0, (hi - lo) / np.where(tot > 0, tot, 1.0), 0.0)

    v_ab, v_ac = visibility(h_ab), visibility(h_ac)
    # anti-phase: AB peaks in the half where AC dips
    anti = np.mean(np.sign(h_ab[:, 0] - h_ab[:, 1]) == -np.sign(h_ac[:, 0] - h_ac[:, 1]))
    return {
        "series": {"t_s": t.tolist(), "position": position.tolist(),
                   "counts_AB": ab.tolist(), "counts_AC": ac.tolist()},
        "visibility_AB": float(v_ab.mean()), "visibility_AC": float(v_ac.mean()),
        "visibility": float(np.concatenate([v_ab, v_ac]).mean()),
        "visibility_std": float(np.concatenate([v_ab, v_ac]).std(ddof=1))
        if 2 * sw.periods > 1 else 0.0,
        "anti_phase_fraction": float(anti),
        "expected_per_half": {"AB": [r[0] * sw.bins_per_half for r in rates],
                              "AC": [r[1] * sw.bins_per_half for r in rates]},
    }
