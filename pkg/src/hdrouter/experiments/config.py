"""Scenario configuration: sectioned INI files, parsed strictly.

Every key has a default, so a file only lists what it changes. Unknown
sections or keys are errors. ``[run] base = <name or path>`` loads another
profile first and overrides it; bare names refer to the profiles shipped in
``hdrouter/experiments/scenarios``.

Value syntax beyond plain numbers:

* angles may be written with ``pi``: ``pi/2``, ``3*pi/2``, ``-0.5*pi``;
* mode lists are ``a:b`` or ``a:b:step`` (inclusive) or comma lists;
* mode tables are ``l:value`` pairs separated by commas.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from ..measurement import CoincidenceConfig
from ..modes import ModeSpace
from ..router import PhaseController, SorterSettings
from ..source import DriftModel, ExplicitSpectrum, GaussianSpectrum, NoiseModel
from ..witness import NORMALIZATIONS, TargetState

SCENARIOS = ("psi_AB", "alpha_AB", "pi_AC")


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


# value parsers ---------------------------------------------------------------

_ANGLE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    m = _ANGLE.match(text)
    if not m:
        raise ValueError(f"not an angle: {text!r}")
    coef = m.group(1)
    coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    den = float(m.group(2)) if m.group(2) else 1.0
    return coef * math.pi / den


def parse_modes(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    if ":" in text and "," not in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 2:
            a, b, step = parts[0], parts[1], 1
        elif len(parts) == 3:
            a, b, step = parts
        else:
            raise ValueError(f"bad mode range {text!r}")
        if step <= 0 or b < a:
            raise ValueError(f"bad mode range {text!r}")
        return tuple(range(a, b + 1, step))
    ells = tuple(int(p) for p in text.split(","))
    if len(set(ells)) != len(ells):
        raise ValueError(f"duplicate modes in {text!r}")
    return ells


def parse_table(text: str) -> dict:
    out = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        k, sep, v = item.partition(":")
        if not sep:
            raise ValueError(f"table entry {item!r} is not 'mode:value'")
        k = int(k)
        if k in out:
            raise ValueError(f"mode {k} listed twice")
        out[k] = float(v)
    return out


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return ", ".join(f"{k}:{v!r}" for k, v in sorted(value.items()))
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


# sections --------------------------------------------------------------------

@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ModesSection:
    L: int = 6


@dataclass(frozen=True)
class SpectrumSection:
    kind: str = "gaussian"
    sigma: float = 3.0
    # explicit amplitudes; with ``symmetric`` the keys are |l|
    weights: dict = field(default_factory=dict)
    symmetric: bool = True


@dataclass(frozen=True)
class NoiseSection:
    white_weight: float = 0.0
    crosstalk: float = 0.0
    crosstalk_phase: float = 0.0
    damping_a: dict = field(default_factory=dict)
    damping_b: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DriftSection:
    amplitude_decay: float = 0.0
    rate_decay: float = 0.0


@dataclass(frozen=True)
class RouterSection:
    delta_alpha: float = math.pi / 2
    phi: float = 0.0
    visibility: float = 1.0


@dataclass(frozen=True)
class PhaseSection:
    drift_rate: float = 0.0  # rad / sqrt(h)
    recal_interval_min: float = 26.0


@dataclass(frozen=True)
class CoincidenceSection:
    pair_rate: float = 1e5
    efficiency_a: float = 1.0
    efficiency_b: float = 1.0
    accidental_rate: float = 0.0
    integration_time: float = 1.0


@dataclass(frozen=True)
class ScanSection:
    range_a: tuple = ()  # empty: the whole mode space
    range_b: tuple = ()


@dataclass(frozen=True)
class WitnessSection:
    trials: int = 1000
    normalization: str = "subspace"
    # empty mode lists default to all / even / odd modes of the space
    modes_psi_AB: tuple = ()
    modes_alpha_AB: tuple = ()
    modes_pi_AC: tuple = ()
    # fixed targets (mode:amplitude); empty means "optimize"
    target_psi_AB: dict = field(default_factory=dict)
    target_alpha_AB: dict = field(default_factory=dict)
    target_pi_AC: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LongrunSection:
    duration_h: float = 39.0
    window_h: float = 1.0
    states: tuple = ("alpha_AB", "pi_AC")
    trials: int = 200


@dataclass(frozen=True)
class SwitchSection:
    frequency_hz: float = 5.0
    periods: int = 10
    bins_per_half: int = 5
    superposition: tuple = (0, 2)


_SECTIONS = {
    "run": RunSection, "modes": ModesSection, "spectrum": SpectrumSection,
    "noise": NoiseSection, "drift": DriftSection, "router": RouterSection,
    "phase": PhaseSection, "coincidence": CoincidenceSection, "scan": ScanSection,
    "witness": WitnessSection, "longrun": LongrunSection, "switch": SwitchSection,
}

# execution-only keys: they cannot change any output, so they stay out of
# the snapshot and its hash
_NOT_SNAPSHOT = {("run", "workers")}

_ANGLE_KEYS = {("router", "delta_alpha"), ("router", "phi"), ("noise", "crosstalk_phase")}


def _parser_for(section: str, name: str, default):
    if (section, name) in _ANGLE_KEYS:
        return parse_angle
    if isinstance(default, bool):
        return parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if isinstance(default, dict):
        return parse_table
    if isinstance(default, tuple):
        if name == "states":
            return lambda t: tuple(s.strip() for s in t.split(",") if s.strip())
        return parse_modes
    return lambda t: t.strip()


@dataclass(frozen=True)
class ScenarioConfig:
    run: RunSection = field(default_factory=RunSection)
    modes: ModesSection = field(default_factory=ModesSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    drift: DriftSection = field(default_factory=DriftSection)
    router: RouterSection = field(default_factory=RouterSection)
    phase: PhaseSection = field(default_factory=PhaseSection)
    coincidence: CoincidenceSection = field(default_factory=CoincidenceSection)
    scan: ScanSection = field(default_factory=ScanSection)
    witness: WitnessSection = field(default_factory=WitnessSection)
    longrun: LongrunSection = field(default_factory=LongrunSection)
    switch: SwitchSection = field(default_factory=SwitchSection)

    def __post_init__(self):
        try:
            self.validate()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    # domain objects -----------------------------------------------------

    @property
    def seed(self) -> int:
        return self.run.seed

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, run=replace(self.run, seed=int(seed)))

    def with_workers(self, workers: int) -> ScenarioConfig:
        return replace(self, run=replace(self.run, workers=int(workers)))

    def space(self) -> ModeSpace:
        return ModeSpace(self.modes.L)

    def spectrum_model(self):
        s = self.spectrum
        if s.kind == "gaussian":
            return GaussianSpectrum(s.sigma)
        if s.symmetric:
            table = {sign * k: v for k, v in s.weights.items() for sign in (1, -1)}
        else:
            table = dict(s.weights)
        return ExplicitSpectrum(table)

    def noise_model(self) -> NoiseModel:
        n = self.noise
        return NoiseModel(n.white_weight, n.crosstalk, n.crosstalk_phase, n.damping_a, n.damping_b)

    def drift_model(self) -> DriftModel:
        return DriftModel(self.drift.amplitude_decay, self.drift.rate_decay)

    def sorter(self) -> SorterSettings:
        r = self.router
        return SorterSettings(r.delta_alpha, r.phi, r.visibility)

    def phase_controller(self) -> PhaseController:
        return PhaseController(self.router.phi, self.phase.drift_rate,
                               self.phase.recal_interval_min / 60.0)

    def coincidence_config(self) -> CoincidenceConfig:
        c = self.coincidence
        return CoincidenceConfig(c.pair_rate, c.efficiency_a, c.efficiency_b,
                                 c.accidental_rate, c.integration_time)

    def witness_modes(self, which: str) -> tuple:
        if which not in SCENARIOS:
            raise ConfigError(f"unknown witness state {which!r}; choose from {SCENARIOS}")
        given = getattr(self.witness, f"modes_{which}")
        if given:
            return given
        ells = self.space().ells
        if which == "alpha_AB":
            return tuple(int(l) for l in ells if l % 2 == 0)
        if which == "pi_AC":
            return tuple(int(l) for l in ells if l % 2)
        return tuple(int(l) for l in ells)

    def target(self, which: str) -> TargetState | None:
        table = getattr(self.witness, f"target_{which}")
        if not table:
            return None
        ells = sorted(table)
        return TargetState.from_weights(ells, [table[l] for l in ells])

    # validation -------------------------------------------------------------

    def validate(self):
        if self.run.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        space = self.space()
        if self.spectrum.kind not in ("gaussian", "table"):
            raise ConfigError("spectrum.kind must be 'gaussian' or 'table'")
        if self.spectrum.kind == "table" and not self.spectrum.weights:
            raise ConfigError("spectrum.kind = table needs spectrum.weights")
        self.spectrum_model()
        self.noise_model()
        self.drift_model()
        self.sorter()
        self.phase_controller()
        self.coincidence_config()
        for name in ("range_a", "range_b"):
            for l in getattr(self.scan, name):
                if l not in space:
                    raise ConfigError(f"scan.{name}: mode {l} outside [-{space.L}, {space.L}]")
        if self.witness.trials < 100:
            raise ConfigError("witness.trials must be >= 100")
        if self.witness.normalization not in NORMALIZATIONS:
            raise ConfigError(f"witness.normalization must be one of {NORMALIZATIONS}")
        for which in SCENARIOS:
            ells = self.witness_modes(which)
            for l in ells:
                if l not in space or -l not in space:
                    raise ConfigError(f"witness.modes_{which}: mode {l} outside the space")
            target = self.target(which)
            if target is not None and not set(target.ells) <= set(ells):
                raise ConfigError(f"witness.target_{which} uses modes outside modes_{which}")
        lr = self.longrun
        if not lr.duration_h > 0 or not lr.window_h > 0:
            raise ConfigError("longrun.duration_h and longrun.window_h must be positive")
        if lr.trials < 100:
            raise ConfigError("longrun.trials must be >= 100")
        for s in lr.states:
            if s not in SCENARIOS[1:]:
                raise ConfigError(f"longrun.states: {s!r} is not a routed state")
        sw = self.switch
        if not sw.frequency_hz > 0:
            raise ConfigError("switch.frequency_hz must be positive")
        if sw.periods < 1 or sw.bins_per_half < 1:
            raise ConfigError("switch.periods and switch.bins_per_half must be >= 1")
        if len(sw.superposition) != 2 or any(l not in space for l in sw.superposition):
            raise ConfigError("switch.superposition needs two modes inside the space")

    # serialization ----------------------------------------------------------

    def to_text(self) -> str:
        """Canonical snapshot: every section and key, defaults included."""
        lines = []
        for name in _SECTIONS:
            lines.append(f"[{name}]")
            sec = getattr(self, name)
            for f in fields(sec):
                if (name, f.name) in _NOT_SNAPSHOT:
                    continue
                lines.append(f"{f.name} = {_fmt(getattr(sec, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {name: {f.name: _fmt(getattr(getattr(self, name), f.name))
                       for f in fields(getattr(self, name)) if (name, f.name) not in _NOT_SNAPSHOT}
                for name in _SECTIONS}

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


# loading ---------------------------------------------------------------------

def builtin_path(name: str) -> Path:
    return Path(str(resources.files("hdrouter.experiments") / "scenarios" / f"{name}.ini"))


def builtin_names() -> list:
    root = Path(str(resources.files("hdrouter.experiments") / "scenarios"))
    return sorted(p.stem for p in root.glob("*.ini"))


def resolve(ref: str, relative_to: Path | None = None) -> Path:
    p = Path(ref)
    if relative_to is not None and not p.is_absolute():
        candidate = relative_to / p
        if candidate.exists():
            return candidate
    if p.exists():
        return p
    if builtin_path(ref).exists():
        return builtin_path(ref)
    raise ConfigError(f"config {ref!r} not found (built-in profiles: {', '.join(builtin_names())})")


def _read_raw(path: Path, seen: tuple = ()) -> dict:
    if path.resolve() in seen:
        raise ConfigError(f"circular base reference through {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    base = raw.get("run", {}).pop("base", None)
    if base:
        merged = _read_raw(resolve(base.strip(), path.parent), seen + (path.resolve(),))
        for sec, items in raw.items():
            merged.setdefault(sec, {}).update(items)
        raw = merged
    return raw


def from_raw(raw: dict, origin: str = "<config>") -> ScenarioConfig:
    sections = {}
    for sec, items in raw.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{sec}]")
        cls = _SECTIONS[sec]
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        values = {}
        for key, text in items.items():
            if key not in known:
                raise ConfigError(f"{origin}: unknown key '{key}' in [{sec}]")
            parse = _parser_for(sec, key, getattr(defaults, key))
            try:
                values[key] = parse(text)
            except ValueError as exc:
                raise ConfigError(f"{origin}: [{sec}] {key}: {exc}") from exc
        try:
            sections[sec] = cls(**values)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{origin}: [{sec}]: {exc}") from exc
    return ScenarioConfig(**sections)


def load_config(ref: str | Path) -> ScenarioConfig:
    path = resolve(str(ref))
    return from_raw(_read_raw(path), str(path))


def parse_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    if raw.get("run", {}).pop("base", None):
        raise ConfigError("base profiles are only supported when loading from a file")
    return from_raw(raw)
