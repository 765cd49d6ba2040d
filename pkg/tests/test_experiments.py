import math

import numpy as np
import pytest

from cyclicqed.dynamics import EvolutionRecord, TrajectoryRecord
from cyclicqed.errors import ConfigError, InvariantError
from cyclicqed.experiments import (
    MHZ,
    PRESETS,
    US,
    check_record_invariants,
    config_from_sections,
    default_config,
    load_config,
    microscopic_from_section,
    run_double_evolution,
    run_scenario,
    run_single_evolution,
    run_steady_sweep,
    w_state_windows,
)
from cyclicqed.observables import is_undefined

# Coupled driven modes at g = 0 (kappa = 0.4, E = 0.04, J = 1, delta_b = 1, MHz),
# evaluated independently with 20-digit arithmetic.
COHERENT_G0 = {0.0: 0.0015384615384615384615, -2.5: 0.0001301871440195280716, 5.0: 0.000099750623441396508728}


def small_sweep(**grid):
    axes = {"delta_min": -5, "delta_max": 5, "delta_steps": 5, "g_min": 0, "g_max": 4, "g_steps": 3}
    axes.update(grid)
    return default_config("steady_sweep", grid=axes)


@pytest.fixture(scope="module")
def sweep():
    return run_steady_sweep(small_sweep())


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def test_sweep_defaults_in_internal_units():
    cfg = default_config("steady_sweep")
    p = cfg.params
    assert p.J == pytest.approx(MHZ) and p.delta_b == pytest.approx(MHZ)
    assert p.kappa_a == pytest.approx(0.4 * MHZ) and p.E_a == pytest.approx(0.04 * MHZ)
    assert p.gamma_1 == pytest.approx(0.02 * MHZ) and p.gamma_phi == pytest.approx(0.3 * MHZ)
    assert cfg.delta_axis[2] == 41 and cfg.g_axis[2] == 21
    assert cfg.g_axis[1] == pytest.approx(4 * MHZ)
    assert len(cfg.observables) == 9


def test_evolution_defaults():
    cfg = default_config("single_evolution", model={"g": 2.0})
    assert cfg.params.E_a == 0 and cfg.params.kappa_a == 0
    assert cfg.params.delta == pytest.approx(math.sqrt(5) * MHZ)
    assert cfg.t_max == pytest.approx(2 * US) and cfg.samples == 400
    dbl = default_config("double_evolution")
    assert dbl.params.n_fock_1 == 3 and dbl.n_traj == 25 and dbl.initial == "010g"
    assert dbl.params.E_1 == pytest.approx(0.04 * MHZ)


def test_presets():
    assert PRESETS["weak-damping"]["kappa"] == 0.1
    assert PRESETS["strong-damping"]["kappa"] == 0.4
    cfg = default_config("double_evolution", scenario={"preset": "weak-damping"})
    assert cfg.params.kappa_b == pytest.approx(0.1 * MHZ)


def test_doubled_decay_convention():
    # resonant empty cavity: E^2 / (kappa/2)^2 -> 0.04 photons, or 0.01 when rates are doubled
    from cyclicqed.dynamics import build_liouvillian, steady_state
    from cyclicqed.hilbert import HilbertSpace, annihilator, expectation

    for conv, expect in (("standard", 0.04), ("doubled", 0.01)):
        cfg = default_config("steady_sweep", solver={"decay_convention": conv})
        assert cfg.rate_scale == (2.0 if conv == "doubled" else 1.0)
        sp = HilbertSpace((12,), ("a",))
        a = annihilator(sp, "a")
        E, k = 0.1 * 0.4, 0.4
        rho = steady_state(build_liouvillian((a + a.dag()) * E, [(cfg.rate_scale * k, a)]))
        assert expectation(rho, a.dag() @ a).real == pytest.approx(expect, rel=1e-6)


@pytest.mark.parametrize(
    "sections, key",
    [
        ({"scenario": {"run": "nope"}}, "scenario.run"),
        ({"scenario": {"run": "steady_sweep", "preset": "x"}}, "scenario.preset"),
        ({"scenario": {"run": "steady_sweep"}, "bogus": {}}, "bogus"),
        ({"scenario": {"run": "steady_sweep"}, "grid": {"extra": 1}}, "grid.extra"),
        ({"scenario": {"run": "steady_sweep"}, "grid": {"g_steps": 1}}, "grid.g_steps"),
        ({"scenario": {"run": "steady_sweep"}, "grid": {"delta_min": "abc"}}, "grid.delta_min"),
        ({"scenario": {"run": "steady_sweep"}, "model": {"J_1": 1}}, "model.J_1"),
        ({"scenario": {"run": "steady_sweep"}, "model": {"g": "nan"}}, "model.g"),
        ({"scenario": {"run": "steady_sweep"}, "model": {"n_fock": 0}}, "model"),
        ({"scenario": {"run": "steady_sweep"}, "observables": {"names": "n_a,foo"}}, "observables.names"),
        ({"scenario": {"run": "single_evolution"}, "time": {"t_max": 0}}, "time.t_max"),
        ({"scenario": {"run": "single_evolution"}, "time": {"samples": 1}}, "time.samples"),
        ({"scenario": {"run": "single_evolution"}, "initial": {"state": "99g"}}, "initial.state"),
        ({"scenario": {"run": "double_evolution"}, "trajectories": {"n_traj": 0}}, "trajectories.n_traj"),
        ({"scenario": {"run": "double_evolution"}, "trajectories": {"method": "x"}}, "trajectories.method"),
        ({"scenario": {"run": "double_evolution"}, "solver": {"integrator": "rk4"}}, "solver.max_step"),
        ({"scenario": {"run": "double_evolution"}, "solver": {"rtol": -1}}, "solver.rtol"),
        ({"scenario": {"run": "double_evolution"}, "solver": {"decay_convention": "x"}}, "solver.decay_convention"),
    ],
)
def test_config_errors_name_the_key(sections, key):
    with pytest.raises(ConfigError) as exc:
        config_from_sections(sections)
    assert exc.value.key == key


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(
        "[scenario]\nrun = double_evolution\npreset = weak-damping  # low damping\n"
        "[model]\ng = 0.1\ndelta = resonant\n"
        "[time]\nt_max = 1.0\nsamples = 50\n"
        "[trajectories]\nn_traj = 7\nseed = 3\n"
    )
    cfg = load_config(path)
    assert cfg.n_traj == 7 and cfg.seed == 3 and cfg.samples == 50
    assert cfg.params.delta == pytest.approx(math.sqrt(1.01) * MHZ)
    again = config_from_sections(cfg.sections)
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "missing.ini")
    assert exc.value.key == "path"
    bad = tmp_path / "bad.ini"
    bad.write_text("no section header\n")
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert exc.value.key == "syntax" and "\n" not in str(exc.value)


def test_with_overrides_updates_echo():
    cfg = default_config("double_evolution")
    new = cfg.with_overrides(seed=99, n_traj=3)
    assert new.seed == 99 and new.sections["trajectories"]["seed"] == 99
    assert new.config_hash() != cfg.config_hash()
    assert cfg.seed == 1234


def test_microscopic_section_forms():
    det = microscopic_from_section({"Omega": 1000, "g_a": 10, "g_b": 5, "Delta": 100, "Delta_a": 200, "Delta_b": 100})
    assert det.Omega == pytest.approx(1000 * MHZ)
    assert det.Delta_a == pytest.approx(200 * MHZ)
    frame = microscopic_from_section({"Omega": 1000, "g_a": 10, "g_b": 5, "varpi_a": 1, "varpi_A": 2,
                                      "omega_b": 3, "omega_B": 4})
    assert frame.g_b == pytest.approx(5 * MHZ)
    with pytest.raises(ConfigError) as exc:
        microscopic_from_section({"Omega": 1, "g_a": 1})
    assert exc.value.key == "microscopic.g_b"
    with pytest.raises(ConfigError):
        microscopic_from_section({"Omega": 1, "g_a": 1, "g_b": 1, "Delta": 1, "varpi_a": 1})
    with pytest.raises(ConfigError) as exc:
        microscopic_from_section({"Omega": 1, "g_a": 1, "g_b": 1, "Delta": 1, "Delta_a": 1, "Delta_b": 1, "zz": 0})
    assert exc.value.key == "microscopic.zz"


# ---------------------------------------------------------------------------
# Steady sweep
# ---------------------------------------------------------------------------


def test_grid_shape_and_order(sweep):
    assert len(sweep.cells) == 15
    d, g, _ = next(iter(sweep.rows()))
    assert d == pytest.approx(-5 * MHZ) and g == 0
    rows = list(sweep.rows())
    assert rows[1][0] == rows[0][0] and rows[1][1] == pytest.approx(2 * MHZ)
    assert sweep.column("n_a").shape == (5, 3)
    assert len(sweep.columns) == 13
    assert not sweep.warnings
    prov = sweep.provenance
    assert prov["config_hash"] and "numpy" in prov["versions"]


def test_g_zero_column_matches_coherent_oracle(sweep):
    deltas = np.round(sweep.delta_values / MHZ, 9)
    for d, expect in COHERENT_G0.items():
        i = int(np.flatnonzero(deltas == d)[0])
        cell = sweep.cells[i * 3]
        assert cell["n_a"] == pytest.approx(expect, rel=1e-6)
        assert cell["n_b"] == pytest.approx(expect, rel=1e-6)
        # qubit decoupled and undriven; coherent product has lambda_ab = 0
        assert abs(cell["sigma_ee"]) < 1e-12
        assert abs(cell["lambda_ab"]) < 1e-9


def test_far_detuned_cells_bounded(sweep):
    # empty-cavity response measured from the nearest dressed branch
    E, kappa = 0.04, 0.4
    for k, (d, g, cell) in enumerate(sweep.rows()):
        if abs(d / MHZ) < 5 - 1e-9:
            continue
        branches = sweep.branches[k % len(sweep.g_values)] / MHZ
        dist = np.min(np.abs(d / MHZ - branches))
        bound = E**2 / (dist**2 + kappa**2 / 4) * 1.01
        assert cell["n_a"] < bound and cell["n_b"] < bound


def test_branches_at_zero_coupling(sweep):
    assert np.allclose(sweep.branches[0] / MHZ, [-1, 1, 1])


def test_sweep_diagnostics(sweep):
    assert np.nanmax(sweep.column("residual")) < 1e-9
    assert np.nanmax(sweep.column("trace_err")) < 1e-10
    assert np.nanmin(sweep.column("min_eig")) > -1e-9


def test_sweep_worker_independent(sweep):
    par = run_steady_sweep(small_sweep(), threads=2)
    for a, b in zip(sweep.cells, par.cells):
        assert a.values == b.values


def test_sweep_rejects_other_runs():
    with pytest.raises(ConfigError):
        run_steady_sweep(default_config("single_evolution"))


def test_tolerance_refinement():
    # halving the tolerances moves observables by less than the coarse budget
    base = {"model": {"g": 1.0, "n_fock": 4}, "time": {"t_max": 1.0, "samples": 21}, "observables": {"names": "n_a,S"}}
    coarse = run_single_evolution(default_config("single_evolution", **base, solver={"rtol": 1e-6, "atol": 1e-8}))
    fine = run_single_evolution(default_config("single_evolution", **base, solver={"rtol": 5e-7, "atol": 5e-9}))
    for name in ("n_a", "S"):
        assert np.max(np.abs(coarse.series(name) - fine.series(name))) < 1e-4


# ---------------------------------------------------------------------------
# Evolutions
# ---------------------------------------------------------------------------


def test_single_evolution_fidelities():
    cfg = default_config("single_evolution", model={"g": 1.0, "n_fock": 4}, time={"t_max": 1.0, "samples": 41})
    rec = run_single_evolution(cfg)
    f = np.array([rec.series(f"F{i}") for i in range(5)])
    assert f[0, 0] == pytest.approx(1)
    assert np.all(f.sum(axis=0) <= 1 + 1e-8)
    assert np.all(rec.series("n_a") >= -1e-12)
    check_record_invariants(rec, cfg.rtol)


def test_damped_single_run_keeps_entropy_peaks():
    cfg = default_config("single_evolution", model={"g": 1.0, "kappa": 0.1, "gamma_phi": 0.1, "n_fock": 5},
                         observables={"names": "S"}, time={"samples": 200})
    assert np.max(run_single_evolution(cfg).series("S")) > 1


def test_double_master_swap_symmetry():
    cfg = default_config("double_evolution", trajectories={"method": "master"}, time={"t_max": 1.0, "samples": 51})
    rec = run_double_evolution(cfg)
    assert np.max(np.abs(rec.series("n_1") - rec.series("n_2"))) < 1e-8


def test_strong_coupling_localizes_excitation():
    cfg = default_config("double_evolution", model={"g": 10.0}, trajectories={"method": "master"},
                         time={"samples": 200})
    rec = run_double_evolution(cfg)
    assert np.max(rec.series("n_1") + rec.series("n_2")) < 0.05
    s = rec.series("sigma_ee")
    assert s.max() > 0.5 and s.min() < 0.05


def test_double_trajectories_record():
    cfg = default_config("double_evolution", time={"t_max": 0.5, "samples": 11}, trajectories={"n_traj": 4, "seed": 7})
    rec = run_scenario(cfg)
    assert isinstance(rec, TrajectoryRecord)
    assert list(rec.observables) == list(cfg.observables)
    assert set(rec.stderr) == {"n_1", "n_b", "n_2", "sigma_ee"}
    assert rec.diagnostics["provenance"]["seeds"] == [7]
    again = run_double_evolution(cfg, threads=2)
    for name in rec.observables:
        a, b = np.array(rec.series(name)), np.array(again.series(name))
        assert np.array_equal(a, b)


def test_w_state_windows_synthetic():
    t = np.linspace(0, 1, 11)
    lam = np.zeros((3, 11)) - 1
    lam[0, 3:6] = lam[1, 3:6] = 1e-3
    lam[0, 8] = lam[2, 8] = 1e-3
    rec = EvolutionRecord(t, {"lambda_12": lam[0], "lambda_1b": lam[1], "lambda_2b": lam[2]})
    wins = w_state_windows(rec)
    assert wins[0] == (t[3], t[5]) and wins[1] == (t[8], t[8])
    assert w_state_windows(rec, t_range=(0.65, 1.0)) == [(t[8], t[8])]
    assert w_state_windows(rec, threshold=1e-2) == []


def test_w_window_ignores_undefined():
    t = np.linspace(0, 1, 3)
    from cyclicqed.observables import UNDEF

    rec = EvolutionRecord(t, {"lambda_12": [UNDEF] * 3, "lambda_1b": [1.0] * 3, "lambda_2b": [-1.0] * 3})
    assert w_state_windows(rec) == []


def test_invariant_checks():
    t = np.array([0.0, 1.0])
    ok = EvolutionRecord(t, diagnostics={"trace_error": np.array([0, 1e-9]), "hermiticity": np.zeros(2)})
    check_record_invariants(ok, 1e-8)
    bad = EvolutionRecord(t, diagnostics={"trace_error": np.array([0, 1e-3]), "hermiticity": np.zeros(2)})
    with pytest.raises(InvariantError):
        check_record_invariants(bad, 1e-8)
    herm = EvolutionRecord(t, diagnostics={"trace_error": np.zeros(2), "hermiticity": np.array([0, 1e-6])})
    with pytest.raises(InvariantError):
        check_record_invariants(herm, 1e-8)
