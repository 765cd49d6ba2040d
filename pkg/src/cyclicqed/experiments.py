"""
Scenario definitions: steady-state (delta, g) sweeps of the single-ensemble
model, single-ensemble evolutions from Fock-state preparations, and
two-ensemble runs by master equation or quantum trajectories.

Scenario files are INI documents. Frequencies are given as nu = omega/2pi in
MHz and times in microseconds; :func:`config_from_sections` is the only
place where they are converted to the rad/s and seconds used internally.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .dynamics import (
    EvolutionRecord,
    TrajectoryRecord,
    build_liouvillian,
    evolve_master,
    evolve_trajectories,
    steady_state,
)
from .errors import ConfigError, InvariantError, SolverError
from .hilbert import basis_ket, number
from .models import (
    MicroscopicParams,
    SingleEnsembleParams,
    TwoEnsembleParams,
    build_hamiltonian,
    collapse_operators,
    single_excitation_energies,
)
from .observables import (
    DOUBLE_LINEAR,
    DOUBLE_OBSERVABLES,
    SINGLE_OBSERVABLES,
    ObservableSet,
    Undefined,
    as_float,
    fidelity_pure,
)

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # rad/s per MHz of nu
US = 1e-6

RUNS = ("steady_sweep", "single_evolution", "double_evolution")
G_WEAK_RATIO = 0.1
G_STRONG_RATIO = 10.0
W_THRESHOLD = 1e-4

# Rates in MHz (nu); drives default to drive_ratio * kappa of the driven mode.
PRESETS = {
    "lossless": {"kappa": 0.0, "gamma_1": 0.0, "gamma_phi": 0.0, "drive_ratio": 0.0},
    "weak-damping": {"kappa": 0.1, "gamma_1": 0.02, "gamma_phi": 0.1, "drive_ratio": 0.1},
    "strong-damping": {"kappa": 0.4, "gamma_1": 0.02, "gamma_phi": 0.3, "drive_ratio": 0.1},
}

FIDELITY_KETS = ("11g", "10e", "20g", "02g", "01e")
FIDELITY_NAMES = tuple(f"F{i}" for i in range(len(FIDELITY_KETS)))
SWEEP_DIAGNOSTICS = ("residual", "trace_err", "min_eig", "rcond")

RUN_DEFAULTS = {
    "steady_sweep": {
        "preset": "strong-damping",
        "model": {"J": 1.0, "g": 0.0, "delta": 0.0, "delta_b": 1.0, "n_fock": 4},
        "grid": {"delta_min": -5.0, "delta_max": 5.0, "delta_steps": 41,
                 "g_min": 0.0, "g_max": 4.0, "g_steps": 21},
        "observables": tuple(SINGLE_OBSERVABLES),
    },
    "single_evolution": {
        "preset": "lossless",
        "model": {"J": 1.0, "g": 1.0, "delta": "resonant", "delta_b": 0.0, "n_fock": 8},
        "time": {"t_max": 2.0, "samples": 400},
        "initial": "11g",
        "observables": ("S", "xi2_x") + FIDELITY_NAMES + ("n_a", "n_b", "sigma_ee"),
    },
    "double_evolution": {
        "preset": "strong-damping",
        "model": {"J": 1.0, "g": 0.1, "delta": "resonant", "delta_b": 0.0, "n_fock": 3},
        "time": {"t_max": 2.0, "samples": 400},
        "initial": "010g",
        "observables": tuple(DOUBLE_OBSERVABLES),
    },
}

_DOUBLE_MODES = ("1", "b", "2")


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved scenario in internal units (rad/s, s).

    ``sections`` keeps the user-unit document the scenario was built from,
    so the configuration can be echoed and re-parsed verbatim.
    """

    run: str
    params: Union[SingleEnsembleParams, TwoEnsembleParams]
    name: str = ""
    preset: str = "strong-damping"
    resonant_delta: bool = False
    delta_axis: Optional[tuple] = None
    g_axis: Optional[tuple] = None
    t_max: Optional[float] = None
    samples: int = 400
    initial: Optional[str] = None
    observables: tuple = ()
    n_traj: int = 25
    seed: int = 1234
    method: str = "trajectories"
    rtol: float = 1e-8
    atol: float = 1e-10
    integrator: str = "RK45"
    max_step: Optional[float] = None
    rate_scale: float = 1.0
    sections: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.run not in RUNS:
            raise ConfigError(f"unknown run {self.run!r}; expected one of {RUNS}", "scenario.run")
        want = TwoEnsembleParams if self.run == "double_evolution" else SingleEnsembleParams
        if not isinstance(self.params, want):
            raise ConfigError(f"run {self.run!r} needs {want.__name__}", "model")
        if self.run == "steady_sweep":
            for key, axis in (("grid.delta_steps", self.delta_axis), ("grid.g_steps", self.g_axis)):
                if axis is None or int(axis[2]) < 2:
                    raise ConfigError("a swept axis needs at least 2 steps", key)
        else:
            if self.t_max is None or not self.t_max > 0:
                raise ConfigError("t_max must be > 0", "time.t_max")
            if self.samples < 2:
                raise ConfigError("samples must be >= 2", "time.samples")
            if not self.initial:
                raise ConfigError("an initial state is required", "initial.state")
            try:
                basis_ket(self.params.space(), self.initial)
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"bad initial state {self.initial!r}: {exc}", "initial.state") from None
        known = set(self.catalogue())
        unknown = [o for o in self.observables if o not in known]
        if unknown:
            raise ConfigError(f"unknown observables {unknown}", "observables.names")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1", "trajectories.n_traj")
        if self.method not in ("trajectories", "master"):
            raise ConfigError(f"unknown method {self.method!r}", "trajectories.method")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("tolerances must be positive", "solver.rtol")
        if self.integrator.lower() == "rk4" and not self.max_step:
            raise ConfigError("fixed-step RK4 needs max_step", "solver.max_step")

    @property
    def model(self) -> str:
        return "double" if isinstance(self.params, TwoEnsembleParams) else "single"

    def catalogue(self) -> tuple:
        if self.run == "double_evolution":
            return tuple(DOUBLE_OBSERVABLES)
        if self.run == "single_evolution":
            return tuple(SINGLE_OBSERVABLES) + FIDELITY_NAMES
        return tuple(SINGLE_OBSERVABLES)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.samples)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        """Copy with top-level fields replaced (``sections`` is updated for
        the run-control fields that appear in it)."""
        sections = json.loads(json.dumps(self.sections))
        for key in ("n_traj", "seed", "method"):
            if key in changes:
                sections.setdefault("trajectories", {})[key] = changes[key]
        return replace(self, sections=sections, **changes)

    def config_hash(self) -> str:
        blob = json.dumps(self.sections, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Config parsing (the units boundary)
# ---------------------------------------------------------------------------

_MODEL_FLOAT_KEYS = {
    "single": ("J", "g", "delta", "delta_b", "E_a", "E_b", "kappa", "kappa_a", "kappa_b",
               "gamma_1", "gamma_phi", "drive_ratio"),
    "double": ("J", "J_1", "J_2", "g", "delta", "delta_b", "E_1", "E_2", "E_b", "kappa",
               "kappa_1", "kappa_2", "kappa_b", "gamma_1", "gamma_phi", "drive_ratio"),
}
_MODEL_INT_KEYS = {
    "single": ("n_fock", "n_fock_a", "n_fock_b"),
    "double": ("n_fock", "n_fock_1", "n_fock_b", "n_fock_2"),
}
_SECTION_KEYS = {
    "scenario": ("run", "name", "preset"),
    "grid": ("delta_min", "delta_max", "delta_steps", "g_min", "g_max", "g_steps"),
    "time": ("t_max", "samples"),
    "initial": ("state",),
    "observables": ("names",),
    "trajectories": ("method", "n_traj", "seed"),
    "solver": ("rtol", "atol", "integrator", "max_step", "decay_convention"),
}


def _num(value, key, kind=float):
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a {kind.__name__} for {key}, got {value!r}", key) from None
    if kind is float and not math.isfinite(out):
        raise ConfigError(f"{key} must be finite", key)
    return out


def _model_params(model: str, m: dict, preset: dict):
    """Build the parameter record from user-unit model entries."""
    fl = {k: _num(v, f"model.{k}") for k, v in m.items()
          if k in _MODEL_FLOAT_KEYS[model] and not (k == "delta" and str(v).strip() == "resonant")}
    ints = {k: _num(v, f"model.{k}", int) for k, v in m.items() if k in _MODEL_INT_KEYS[model]}
    kappa = fl.get("kappa", preset["kappa"])
    ratio = fl.get("drive_ratio", preset["drive_ratio"])
    n_default = ints.get("n_fock")
    n_single = 4 if n_default is None else n_default
    n_double = 3 if n_default is None else n_default
    common = {
        "delta": fl.get("delta", 0.0) * MHZ,
        "delta_b": fl.get("delta_b", 0.0) * MHZ,
        "g": fl.get("g", 0.0) * MHZ,
        "gamma_1": fl.get("gamma_1", preset["gamma_1"]) * MHZ,
        "gamma_phi": fl.get("gamma_phi", preset["gamma_phi"]) * MHZ,
    }
    try:
        if model == "single":
            ka, kb = fl.get("kappa_a", kappa), fl.get("kappa_b", kappa)
            return SingleEnsembleParams(
                J=fl.get("J", 1.0) * MHZ,
                E_a=fl.get("E_a", ratio * ka) * MHZ,
                E_b=fl.get("E_b", ratio * kb) * MHZ,
                kappa_a=ka * MHZ,
                kappa_b=kb * MHZ,
                n_fock_a=ints.get("n_fock_a", n_single),
                n_fock_b=ints.get("n_fock_b", n_single),
                **common,
            )
        J = fl.get("J", 1.0)
        k1, k2, kb = (fl.get(f"kappa_{s}", kappa) for s in _DOUBLE_MODES)
        return TwoEnsembleParams(
            J_1=fl.get("J_1", J) * MHZ,
            J_2=fl.get("J_2", J) * MHZ,
            E_1=fl.get("E_1", ratio * k1) * MHZ,
            E_2=fl.get("E_2", ratio * k2) * MHZ,
            E_b=fl.get("E_b", ratio * kb) * MHZ,
            kappa_1=k1 * MHZ,
            kappa_2=k2 * MHZ,
            kappa_b=kb * MHZ,
            n_fock_1=ints.get("n_fock_1", n_double),
            n_fock_b=ints.get("n_fock_b", n_double),
            n_fock_2=ints.get("n_fock_2", n_double),
            **common,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "model") from None


def _resonant_delta(p) -> float:
    if isinstance(p, TwoEnsembleParams):
        J = p.J_1
    else:
        J = p.J
    return math.sqrt(p.g ** 2 + J ** 2)


def config_from_sections(sections: dict) -> ScenarioConfig:
    """Resolve a user-unit section mapping (as read from a scenario file)."""
    sections = {str(s).lower(): {str(k): v for k, v in body.items()} for s, body in sections.items()}
    for sec, body in sections.items():
        if sec == "model":
            continue
        if sec not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{sec}]", sec)
        for key in body:
            if key not in _SECTION_KEYS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", f"{sec}.{key}")
    scen = sections.get("scenario", {})
    run = str(scen.get("run", "")).strip()
    if run not in RUNS:
        raise ConfigError(f"scenario.run must be one of {RUNS}, got {run!r}", "scenario.run")
    defaults = RUN_DEFAULTS[run]
    preset_name = str(scen.get("preset", defaults["preset"])).strip()
    if preset_name not in PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}; have {sorted(PRESETS)}", "scenario.preset")
    model = "double" if run == "double_evolution" else "single"

    m = dict(defaults["model"])
    m.update(sections.get("model", {}))
    allowed = set(_MODEL_FLOAT_KEYS[model]) | set(_MODEL_INT_KEYS[model])
    for key in m:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [model] for the {model} model", f"model.{key}")
    resonant = str(m.get("delta", "")).strip() == "resonant"
    params = _model_params(model, m, PRESETS[preset_name])
    if resonant:
        params = params.replace(delta=_resonant_delta(params))

    kw = {}
    if run == "steady_sweep":
        grid = dict(defaults["grid"])
        grid.update(sections.get("grid", {}))
        kw["delta_axis"] = (_num(grid["delta_min"], "grid.delta_min") * MHZ,
                            _num(grid["delta_max"], "grid.delta_max") * MHZ,
                            _num(grid["delta_steps"], "grid.delta_steps", int))
        kw["g_axis"] = (_num(grid["g_min"], "grid.g_min") * MHZ,
                        _num(grid["g_max"], "grid.g_max") * MHZ,
                        _num(grid["g_steps"], "grid.g_steps", int))
    else:
        tsec = dict(defaults["time"])
        tsec.update(sections.get("time", {}))
        kw["t_max"] = _num(tsec["t_max"], "time.t_max") * US
        kw["samples"] = _num(tsec["samples"], "time.samples", int)
        kw["initial"] = str(sections.get("initial", {}).get("state", defaults["initial"])).strip()

    names = sections.get("observables", {}).get("names")
    if names is None:
        observables = tuple(defaults["observables"])
    else:
        observables = tuple(n.strip() for n in str(names).split(",") if n.strip())

    traj = sections.get("trajectories", {})
    solver = sections.get("solver", {})
    convention = str(solver.get("decay_convention", "standard")).strip()
    if convention not in ("standard", "doubled"):
        raise ConfigError("decay_convention must be 'standard' or 'doubled'", "solver.decay_convention")
    max_step = solver.get("max_step")
    return ScenarioConfig(
        run=run,
        params=params,
        name=str(scen.get("name", run)),
        preset=preset_name,
        resonant_delta=resonant,
        observables=observables,
        n_traj=_num(traj.get("n_traj", 25), "trajectories.n_traj", int),
        seed=_num(traj.get("seed", 1234), "trajectories.seed", int),
        method=str(traj.get("method", "trajectories")).strip(),
        rtol=_num(solver.get("rtol", 1e-8), "solver.rtol"),
        atol=_num(solver.get("atol", 1e-10), "solver.atol"),
        integrator=str(solver.get("integrator", "RK45")).strip(),
        max_step=None if max_step is None else _num(max_step, "solver.max_step") * US,
        rate_scale=2.0 if convention == "doubled" else 1.0,
        sections=sections,
        **kw,
    )


def load_config(path) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "path") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".splitlines()[0], "syntax") from None
    return config_from_sections({s: dict(parser[s]) for s in parser.sections()})


_MICRO_REQUIRED = ("Omega", "g_a", "g_b")
_MICRO_FRAME = ("varpi_a", "varpi_A", "omega_b", "omega_B")
_MICRO_DETUNING = ("Delta", "Delta_a", "Delta_b")
_MICRO_OPTIONAL = ("g", "Omega_A", "E_b", "omega_0")


def microscopic_from_section(body: dict) -> MicroscopicParams:
    """Ensemble parameters from a ``[microscopic]`` mapping in MHz.

    Either the four frame frequencies (varpi_a, varpi_A, omega_b, omega_B)
    or the detunings (Delta, Delta_a, Delta_b, optionally omega_b) are given.
    """
    allowed = set(_MICRO_REQUIRED + _MICRO_FRAME + _MICRO_DETUNING + _MICRO_OPTIONAL)
    for key in body:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [microscopic]", f"microscopic.{key}")
    for key in _MICRO_REQUIRED:
        if key not in body:
            raise ConfigError(f"missing required key {key!r}", f"microscopic.{key}")
    vals = {k: _num(v, f"microscopic.{k}") * MHZ for k, v in body.items()}
    opt = {k: vals[k] for k in _MICRO_OPTIONAL if k in vals}
    req = {k: vals[k] for k in _MICRO_REQUIRED}
    has_frame = any(k in vals for k in ("varpi_a", "varpi_A", "omega_B"))
    has_det = any(k in vals for k in _MICRO_DETUNING)
    if has_frame and has_det:
        raise ConfigError("give either frame frequencies or detunings, not both", "microscopic.Delta")
    try:
        if has_det:
            for key in _MICRO_DETUNING:
                if key not in vals:
                    raise ConfigError(f"missing required key {key!r}", f"microscopic.{key}")
            return MicroscopicParams.from_detunings(
                **req, **{k: vals[k] for k in _MICRO_DETUNING}, omega_b=vals.get("omega_b", 0.0), **opt
            )
        for key in _MICRO_FRAME:
            if key not in vals:
                raise ConfigError(f"missing required key {key!r}", f"microscopic.{key}")
        return MicroscopicParams(**req, **{k: vals[k] for k in _MICRO_FRAME}, **opt)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "microscopic") from None


def load_microscopic(path) -> MicroscopicParams:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "path") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".splitlines()[0], "syntax") from None
    if "microscopic" not in parser:
        raise ConfigError("missing section [microscopic]", "microscopic")
    extra = [s for s in parser.sections() if s != "microscopic"]
    if extra:
        raise ConfigError(f"unknown section [{extra[0]}]", extra[0])
    return microscopic_from_section(dict(parser["microscopic"]))


def default_config(run: str, **sections) -> ScenarioConfig:
    """Scenario with run defaults; ``sections`` maps section names to
    user-unit overrides, e.g. ``model={"g": 2.0}``."""
    doc = {"scenario": {"run": run}}
    for sec, body in sections.items():
        doc.setdefault(sec, {}).update(body)
    return config_from_sections(doc)


# ---------------------------------------------------------------------------
# Provenance
# ---------------------------------------------------------------------------


def provenance(cfg: ScenarioConfig, seeds=(), **extra) -> dict:
    out = {
        "config": cfg.sections,
        "config_hash": cfg.config_hash(),
        "versions": {
            "cyclicqed": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "seeds": list(seeds),
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Steady sweep
# ---------------------------------------------------------------------------


@dataclass
class GridResult:
    """Long-format sweep result: cell ``k`` has ``delta = delta_values[k // n_g]``
    and ``g = g_values[k % n_g]``."""

    delta_values: np.ndarray
    g_values: np.ndarray
    cells: list
    columns: tuple
    branches: np.ndarray
    provenance: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.cells) != len(self.delta_values) * len(self.g_values):
            raise ValueError("cell count does not match the grid size")

    def rows(self):
        n_g = len(self.g_values)
        for k, cell in enumerate(self.cells):
            yield self.delta_values[k // n_g], self.g_values[k % n_g], cell

    def column(self, name: str) -> np.ndarray:
        """Observable as an ``(n_delta, n_g)`` float array (NaN = undefined)."""
        vals = np.array([as_float(c[name]) for c in self.cells])
        return vals.reshape(len(self.delta_values), len(self.g_values))


def sweep_axes(cfg: ScenarioConfig) -> tuple:
    d0, d1, nd = cfg.delta_axis
    g0, g1, ng = cfg.g_axis
    return np.linspace(d0, d1, nd), np.linspace(g0, g1, ng)


def resonance_branches(p: SingleEnsembleParams, g_values) -> np.ndarray:
    """Detunings ``delta`` at which a single-excitation level is degenerate
    with the ground state, one row of three per ``g`` (ascending)."""
    out = []
    for g in g_values:
        base = p.replace(g=float(g), delta=0.0, E_a=0.0, E_b=0.0, n_fock_a=2, n_fock_b=2)
        out.append(np.sort(-single_excitation_energies(build_hamiltonian(base))))
    return np.array(out)


def _steady_cell(args):
    p, names, rate_scale = args
    with threadpool_limits(limits=1):
        try:
            H = build_hamiltonian(p)
            L = build_liouvillian(H, collapse_operators(p, rate_scale=rate_scale))
            rho, info = steady_state(L, return_info=True)
        except SolverError as exc:
            bad = Undefined(f"solver: {exc}")
            values = {n: bad for n in names}
            values.update({k: bad for k in SWEEP_DIAGNOSTICS})
            return values, str(exc)
        values = {n: SINGLE_OBSERVABLES[n](rho) for n in names}
        values.update({
            "residual": info["residual"],
            "trace_err": float(info["trace_error"]),
            "min_eig": info["min_eig"],
            "rcond": info["rcond"],
        })
        return values, None


def run_steady_sweep(cfg: ScenarioConfig, threads: int = 1) -> GridResult:
    if cfg.run != "steady_sweep":
        raise ConfigError("run_steady_sweep needs a steady_sweep scenario", "scenario.run")
    start = time.perf_counter()
    deltas, gs = sweep_axes(cfg)
    names = tuple(cfg.observables)
    tasks = [(cfg.params.replace(delta=float(d), g=float(g)), names, cfg.rate_scale)
             for d in deltas for g in gs]
    threads = max(1, int(threads))
    if threads == 1:
        results = [_steady_cell(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_steady_cell, tasks, chunksize=chunk))
    modes = ("a", "b")
    cells, warnings = [], []
    for k, (values, err) in enumerate(results):
        cells.append(ObservableSet(values, modes))
        if err is not None:
            warnings.append(f"cell {k} (delta index {k // len(gs)}, g index {k % len(gs)}): {err}")
    branches = resonance_branches(cfg.params, gs)
    return GridResult(
        delta_values=deltas,
        g_values=gs,
        cells=cells,
        columns=names + SWEEP_DIAGNOSTICS,
        branches=branches,
        provenance=provenance(cfg, wall_time_s=time.perf_counter() - start, threads=threads),
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Evolutions
# ---------------------------------------------------------------------------


def _integrator_kw(cfg: ScenarioConfig) -> dict:
    return {"rtol": cfg.rtol, "atol": cfg.atol, "method": cfg.integrator, "max_step": cfg.max_step}


def run_single_evolution(cfg: ScenarioConfig) -> EvolutionRecord:
    """Master-equation evolution of the single-ensemble model. Raises
    :class:`SolverError` (with a ``partial`` record) on integrator failure."""
    if cfg.run != "single_evolution":
        raise ConfigError("run_single_evolution needs a single_evolution scenario", "scenario.run")
    start = time.perf_counter()
    p = cfg.params
    space = p.space()
    e_ops = {}
    for name in cfg.observables:
        if name in SINGLE_OBSERVABLES:
            e_ops[name] = SINGLE_OBSERVABLES[name]
        else:
            ket = basis_ket(space, FIDELITY_KETS[FIDELITY_NAMES.index(name)])
            e_ops[name] = lambda r, ket=ket: fidelity_pure(r, ket)
    with threadpool_limits(limits=1):
        rec = evolve_master(
            build_hamiltonian(p),
            collapse_operators(p, rate_scale=cfg.rate_scale),
            basis_ket(space, cfg.initial),
            cfg.times(),
            e_ops=e_ops,
            **_integrator_kw(cfg),
        )
    rec.diagnostics["provenance"] = provenance(cfg, wall_time_s=time.perf_counter() - start)
    return rec


def run_double_evolution(cfg: ScenarioConfig, threads: int = 1) -> EvolutionRecord:
    """Two-ensemble evolution. With ``method = trajectories`` a
    :class:`TrajectoryRecord` is returned whose linear observables carry
    standard errors; the nonlinear ones (lambda_ij, S) are evaluated on the
    trajectory-averaged density matrix."""
    if cfg.run != "double_evolution":
        raise ConfigError("run_double_evolution needs a double_evolution scenario", "scenario.run")
    start = time.perf_counter()
    p = cfg.params
    space = p.space()
    H = build_hamiltonian(p)
    collapses = collapse_operators(p, rate_scale=cfg.rate_scale)
    psi0 = basis_ket(space, cfg.initial)
    times = cfg.times()
    names = list(cfg.observables)

    if cfg.method == "master":
        with threadpool_limits(limits=1):
            rec = evolve_master(H, collapses, psi0, times,
                                e_ops={n: DOUBLE_OBSERVABLES[n] for n in names}, **_integrator_kw(cfg))
        rec.diagnostics["provenance"] = provenance(cfg, wall_time_s=time.perf_counter() - start)
        return rec

    linear = {n: number(space, DOUBLE_LINEAR[n]) for n in names if n in DOUBLE_LINEAR}
    if "sigma_ee" in names:
        linear["sigma_ee"] = number(space, "atom")
    rec = evolve_trajectories(H, collapses, psi0, times, cfg.n_traj, cfg.seed,
                              e_ops=linear, threads=threads)
    derived = [n for n in names if n not in linear]
    series = {n: [] for n in derived}
    for i in range(len(times)):
        rho = rec.density_at(i)
        for n in derived:
            series[n].append(DOUBLE_OBSERVABLES[n](rho))
    ordered = {n: (rec.observables[n] if n in linear else series[n]) for n in names}
    rec.observables = ordered
    rec.stderr = {n: rec.stderr[n] for n in names if n in rec.stderr}
    rec.diagnostics["provenance"] = provenance(
        cfg, seeds=[cfg.seed], n_traj=cfg.n_traj,
        n_jumps=int(sum(len(log) for log in rec.jump_log)),
        wall_time_s=time.perf_counter() - start, threads=threads,
    )
    return rec


def run_scenario(cfg: ScenarioConfig, threads: int = 1):
    if cfg.run == "steady_sweep":
        return run_steady_sweep(cfg, threads)
    if cfg.run == "single_evolution":
        return run_single_evolution(cfg)
    return run_double_evolution(cfg, threads)


def check_record_invariants(record: EvolutionRecord, rtol: float = 1e-8, herm_tol: float = 1e-9):
    """Raise :class:`InvariantError` if a master-equation record drifted in
    trace (beyond ``10 rtol``, floored at 1e-12) or Hermiticity."""
    diag = record.diagnostics
    tr = np.asarray(diag.get("trace_error", []))
    herm = np.asarray(diag.get("hermiticity", []))
    limit = max(10 * rtol, 1e-12)
    if tr.size and tr.max() > limit:
        raise InvariantError(f"trace drifted by {tr.max():.3e} (limit {limit:.1e})")
    if herm.size and herm.max() > herm_tol:
        raise InvariantError(f"Hermiticity error {herm.max():.3e} exceeds {herm_tol:.1e}")


def w_state_windows(record: EvolutionRecord, threshold: float = W_THRESHOLD, t_range=None) -> list:
    """Contiguous sample runs where at least two of lambda_12, lambda_1b,
    lambda_2b exceed ``threshold``, as ``(t_start, t_end)`` pairs, longest
    first. ``t_range`` restricts the search to samples in the open interval."""
    lam = np.array([record.series(n) for n in ("lambda_12", "lambda_1b", "lambda_2b")])
    hit = np.sum(np.nan_to_num(lam, nan=-np.inf) > threshold, axis=0) >= 2
    t = record.times
    if t_range is not None:
        hit &= (t > t_range[0]) & (t < t_range[1])
    windows, start = [], None
    for i, flag in enumerate(hit):
        if flag and start is None:
            start = i
        if not flag and start is not None:
            windows.append((t[start], t[i - 1]))
            start = None
    if start is not None:
        windows.append((t[start], t[-1]))
    return sorted(windows, key=lambda w: w[0] - w[1])
