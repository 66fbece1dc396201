"""Experiment configuration: TOML schema, validation, defaults.

One flat TOML document drives every command.  Top-level keys set the
global seed and output directory; each command reads its own table and
ignores the others, so a single file can describe a whole study.  Every
table is optional — an empty document yields the canonical defaults —
but unknown keys and wrong types are rejected outright so that typos
fail loudly before any computation starts.

Grid geometry: periods are specified as multiples of pi
(``period_over_pi``), which keeps frequency spacings exact for the
power-of-two point counts the FFT layer requires.  The top-level
``[grid]`` table is the default geometry; any command table may carry
its own ``points`` / ``period_over_pi`` / ``dim`` keys.  The
``[reconstruction]`` table alone does not inherit ``[grid]``: its
default is the wide period-32*pi torus whose frequency spacing 1/16
resolves the small truncation radii of the default noise ladder, and
changing the shared grid must not silently destroy that resolution.
"""

import math
import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coefficients import (
    BorderlineEntry,
    CoefficientFamily,
    ConstantEntry,
    LinearEntry,
    SampledEntry,
)
from .errors import ConfigError, DomainError
from .grids import GridSpec

__all__ = [
    "ExperimentConfig",
    "LpSettings",
    "EnergySettings",
    "ReconstructionSettings",
    "ForwardSettings",
    "WeightTableSettings",
    "load_config",
    "DEFAULT_GAMMAS",
    "DEFAULT_THETAS",
    "DEFAULT_SEEDS",
]

DEFAULT_GAMMAS = (1.0, 10.0, 100.0, 1000.0)
DEFAULT_THETAS = tuple(10.0**-k for k in range(2, 13))
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

_REQUIRED = object()


class _Table:
    """One TOML table with typed, consume-and-verify access."""

    def __init__(self, name, mapping):
        if not isinstance(mapping, dict):
            raise ConfigError(f"[{name}] must be a table, got {type(mapping).__name__}")
        self.name = name
        self._data = dict(mapping)

    def _take(self, key, default):
        """Pop ``key``; absent keys return (default, False), present (value, True)."""
        if key in self._data:
            return self._data.pop(key), True
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] is missing required key {key!r}")
        return default, False

    def take_int(self, key, default=_REQUIRED):
        value, present = self._take(key, default)
        if not present:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{self.name}] {key} must be an integer, got {value!r}")
        return value

    def take_float(self, key, default=_REQUIRED):
        value, present = self._take(key, default)
        if not present:
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{self.name}] {key} must be a number, got {value!r}")
        return float(value)

    def take_str(self, key, default=_REQUIRED):
        value, present = self._take(key, default)
        if not present:
            return value
        if not isinstance(value, str):
            raise ConfigError(f"[{self.name}] {key} must be a string, got {value!r}")
        return value

    def take_float_list(self, key, default=_REQUIRED):
        value, present = self._take(key, default)
        if not present:
            return value
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"[{self.name}] {key} must be a list of numbers")
        return tuple(float(v) for v in value)

    def take_int_list(self, key, default=_REQUIRED):
        value, present = self._take(key, default)
        if not present:
            return value
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, int) for v in value
        ):
            raise ConfigError(f"[{self.name}] {key} must be a list of integers")
        return tuple(value)

    def take_table(self, key):
        value, present = self._take(key, {})
        return value if present else {}

    def finish(self):
        if self._data:
            keys = ", ".join(sorted(self._data))
            raise ConfigError(f"[{self.name}] has unknown keys: {keys}")


def _build_grid(table, fallback):
    """Resolve a grid from override keys in ``table``, else ``fallback``."""
    points = table.take_int("points", None)
    period_over_pi = table.take_float("period_over_pi", None)
    dim = table.take_int("dim", None)
    if points is None and period_over_pi is None and dim is None:
        return fallback
    try:
        return GridSpec(
            dim=dim if dim is not None else fallback.dim,
            period=(period_over_pi if period_over_pi is not None
                    else fallback.period / math.pi) * math.pi,
            points=points if points is not None else fallback.points,
        )
    except DomainError as exc:
        raise ConfigError(f"[{table.name}] grid override invalid: {exc}") from exc


def _build_family(table, config_dir):
    kind = table.take_str("kind", "constant")
    dim = table.take_int("dim", 1)
    kappa = table.take_float("kappa", None)
    if kind == "constant":
        level = table.take_float("level", 1.0)
        entry = ConstantEntry(level)
        default_kappa = level
        declared = "constant"
        label = "heat" if level == 1.0 else f"constant[{level:g}]"
    elif kind == "linear":
        intercept = table.take_float("intercept", 1.0)
        slope = table.take_float("slope", 0.25)
        entry = LinearEntry(intercept, slope)
        default_kappa = None
        declared = "lipschitz"
        label = f"linear[{intercept:g},{slope:g}]"
    elif kind == "borderline":
        base = table.take_float("base", 1.0)
        amplitude = table.take_float("amplitude", 0.5)
        entry = BorderlineEntry(base, amplitude)
        default_kappa = 1.0 / (1.0 + amplitude) if base == 1.0 else None
        declared = "log-lipschitz"
        label = f"borderline[{amplitude:g}]"
    elif kind == "sampled":
        csv_path = table.take_str("csv")
        if not os.path.isabs(csv_path):
            csv_path = os.path.join(config_dir, csv_path)
        try:
            entry = SampledEntry.from_csv(csv_path)
        except (OSError, DomainError) as exc:
            raise ConfigError(f"[family] cannot load csv {csv_path!r}: {exc}") from exc
        default_kappa = None
        declared = "log-lipschitz"
        label = f"sampled[{os.path.basename(csv_path)}]"
    else:
        raise ConfigError(
            f"[family] kind must be constant, linear, borderline, or sampled; "
            f"got {kind!r}"
        )
    if kappa is None:
        if default_kappa is None:
            raise ConfigError(f"[family] kind {kind!r} requires an explicit kappa")
        kappa = default_kappa
    table.finish()
    try:
        return CoefficientFamily.isotropic(
            entry, dim=dim, kappa=kappa, declared_class=declared, label=label
        )
    except DomainError as exc:
        raise ConfigError(f"[family] invalid: {exc}") from exc


@dataclass(frozen=True)
class LpSettings:
    grid: GridSpec
    sweep_size: int
    order: int
    max_order: int
    shells: int
    modulation: float


@dataclass(frozen=True)
class EnergySettings:
    grid: GridSpec
    final_time: float
    corpus_size: int
    steps: int
    lam: float | None  # None: use the admissibility floor for the family
    gammas: tuple
    beta: float | None
    alpha1: float | None


@dataclass(frozen=True)
class ReconstructionSettings:
    grid: GridSpec
    final_time: float
    theta_list: tuple
    seeds: tuple
    decay: float
    amplitude: float
    apriori_h1: float | None  # None: measure the truth's H1 norm


@dataclass(frozen=True)
class ForwardSettings:
    grid: GridSpec
    final_time: float
    initial: str
    decay: float
    amplitude: float
    shell_lo: int
    shell_hi: int
    initial_seed: int


@dataclass(frozen=True)
class WeightTableSettings:
    final_time: float
    lam: float
    gamma: float
    beta: float | None
    alpha1: float | None
    samples: int


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    grid: GridSpec
    family: CoefficientFamily
    lp: LpSettings
    energy: EnergySettings
    reconstruction: ReconstructionSettings
    forward: ForwardSettings
    weights: WeightTableSettings


def _parse(document, config_dir):
    top = _Table("<top>", document)
    seed = top.take_int("seed", 0)
    out_dir = top.take_str("out_dir", "out")

    grid_table = _Table("grid", top.take_table("grid"))
    try:
        base_grid = GridSpec(
            dim=grid_table.take_int("dim", 1),
            period=grid_table.take_float("period_over_pi", 2.0) * math.pi,
            points=grid_table.take_int("points", 2048),
        )
    except DomainError as exc:
        raise ConfigError(f"[grid] invalid: {exc}") from exc
    grid_table.finish()

    family = _build_family(_Table("family", top.take_table("family")), config_dir)

    lp = _Table("lp", top.take_table("lp"))
    lp_grid = _build_grid(lp, base_grid)
    lp_settings = LpSettings(
        grid=lp_grid,
        sweep_size=lp.take_int("sweep_size", 100),
        order=lp.take_int("order", 10),
        max_order=lp.take_int("max_order", 20),
        shells=lp.take_int("shells", 8),
        modulation=lp.take_float("modulation", 0.5),
    )
    lp.finish()
    if lp_settings.sweep_size < 1:
        raise ConfigError("[lp] sweep_size must be at least 1")
    if not 0.0 <= lp_settings.modulation < 1.0:
        raise ConfigError("[lp] modulation must lie in [0, 1) to keep the "
                          "symbol bounded away from zero")

    en = _Table("energy", top.take_table("energy"))
    en_grid = _build_grid(en, base_grid)
    energy = EnergySettings(
        grid=en_grid,
        final_time=en.take_float("final_time", 1.0),
        corpus_size=en.take_int("corpus_size", 50),
        steps=en.take_int("steps", 64),
        lam=en.take_float("lam", None),
        gammas=en.take_float_list("gammas", DEFAULT_GAMMAS),
        beta=en.take_float("beta", None),
        alpha1=en.take_float("alpha1", None),
    )
    en.finish()
    if energy.corpus_size < 0:
        raise ConfigError("[energy] corpus_size must be nonnegative")
    if energy.steps < 2:
        raise ConfigError("[energy] steps must be at least 2")

    # The noise sweep carries its own default geometry rather than
    # inheriting [grid]: its truncation radii (at most ~3.1 for the
    # default noise ladder) need the fine frequency spacing 1/16 of a
    # period-32*pi torus to be resolved by many modes.
    rc = _Table("reconstruction", top.take_table("reconstruction"))
    rc_grid = _build_grid(rc, GridSpec(dim=1, period=32.0 * math.pi, points=2048))
    recon = ReconstructionSettings(
        grid=rc_grid,
        final_time=rc.take_float("final_time", 1.0),
        theta_list=rc.take_float_list("theta_list", DEFAULT_THETAS),
        seeds=rc.take_int_list("seeds", DEFAULT_SEEDS),
        decay=rc.take_float("decay", 1.25),
        amplitude=rc.take_float("amplitude", 1.0),
        apriori_h1=rc.take_float("apriori_h1", None),
    )
    rc.finish()

    fw = _Table("forward", top.take_table("forward"))
    fw_grid = _build_grid(fw, base_grid)
    forward = ForwardSettings(
        grid=fw_grid,
        final_time=fw.take_float("final_time", 1.0),
        initial=fw.take_str("initial", "algebraic"),
        decay=fw.take_float("decay", 1.25),
        amplitude=fw.take_float("amplitude", 1.0),
        shell_lo=fw.take_int("shell_lo", 0),
        shell_hi=fw.take_int("shell_hi", 2),
        initial_seed=fw.take_int("initial_seed", 0),
    )
    fw.finish()
    if forward.initial not in ("algebraic", "band"):
        raise ConfigError(
            f"[forward] initial must be 'algebraic' or 'band', "
            f"got {forward.initial!r}"
        )

    wt = _Table("weights", top.take_table("weights"))
    weights = WeightTableSettings(
        final_time=wt.take_float("final_time", 1.0),
        lam=wt.take_float("lam", 2.0),
        gamma=wt.take_float("gamma", 1.0),
        beta=wt.take_float("beta", None),
        alpha1=wt.take_float("alpha1", None),
        samples=wt.take_int("samples", 33),
    )
    wt.finish()
    if weights.samples < 2:
        raise ConfigError("[weights] samples must be at least 2")

    top.finish()
    return ExperimentConfig(
        seed=seed,
        out_dir=out_dir,
        grid=base_grid,
        family=family,
        lp=lp_settings,
        energy=energy,
        reconstruction=recon,
        forward=forward,
        weights=weights,
    )


def load_config(path=None):
    """Parse a TOML config file; ``None`` yields the canonical defaults."""
    if path is None:
        return _parse({}, os.getcwd())
    try:
        with open(path, "rb") as handle:
            document = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid TOML: {exc}") from exc
    return _parse(document, os.path.dirname(os.path.abspath(path)))
