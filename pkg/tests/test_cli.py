import json
import math
import subprocess
import sys
import types

import numpy as np
import pytest

from cyclicqed import cli
from cyclicqed.cli import darkstate_table, fmt, main, render_table
from cyclicqed.errors import InvariantError, SolverError
from cyclicqed.observables import UNDEF

SWEEP_INI = """[scenario]
run = steady_sweep
[grid]
delta_min = -2
delta_max = 2
delta_steps = 3
g_min = 0
g_max = 1
g_steps = 2
"""

DOUBLE_INI = """[scenario]
run = double_evolution
[time]
t_max = 0.3
samples = 7
[trajectories]
seed = 5
"""

SINGLE_INI = """[scenario]
run = single_evolution
[model]
n_fock = 4
[time]
t_max = 0.2
samples = 5
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def parse_csv(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def micro(tmp_path, **kw):
    body = {"Omega": 1000, "g_a": 10, "g_b": 5, "Delta": 0, "Delta_a": 0, "Delta_b": 0}
    body.update(kw)
    text = "[microscopic]\n" + "".join(f"{k} = {v}\n" for k, v in body.items())
    return write(tmp_path, "m.ini", text)


def test_fmt_round_trip():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, math.pi):
        assert float(fmt(x)) == x
    assert fmt(UNDEF) == "undef" and fmt(None) == "undef"
    assert fmt(-0.0) == "0.0" and fmt(3) == "3" and fmt(np.int64(4)) == "4"
    assert fmt(1 + 0j) == "1.0"


def test_render_table_rejects_ragged_rows():
    assert render_table(["a", "b"], [[1, UNDEF]]) == "a,b\n1,undef\n"
    with pytest.raises(InvariantError):
        render_table(["a", "b"], [[1]])


# ---------------------------------------------------------------------------
# coeffs
# ---------------------------------------------------------------------------


def test_coeffs_compare_converges(tmp_path, capsys):
    path = micro(tmp_path, Omega=1000, g_a=10, g_b=7, Delta=0, Delta_a=0, Delta_b=0, Omega_A=1, E_b=1, g=1)
    assert main(["coeffs", path, "--compare"]) == 0
    header, rows = parse_csv(capsys.readouterr().out)
    row = dict(zip(header, rows[0]))
    assert float(row["relerr_J"]) < 1e-3
    assert float(row["exact_J_MHz"]) == pytest.approx(float(row["approx_J_MHz"]), rel=1e-3)


def test_coeffs_zero_ga_gives_zero_J(tmp_path, capsys):
    assert main(["coeffs", micro(tmp_path, g_a=0)]) == 0
    header, rows = parse_csv(capsys.readouterr().out)
    assert float(dict(zip(header, rows[0]))["J_MHz"]) == 0.0


def test_coeffs_approx_columns(tmp_path, capsys):
    assert main(["coeffs", micro(tmp_path), "--approx"]) == 0
    header, _ = parse_csv(capsys.readouterr().out)
    assert all(h.endswith("_MHz") for h in header) and "J_MHz" in header


def test_coeffs_resonance_names_symbol(tmp_path, capsys):
    path = write(tmp_path, "r.ini", "[microscopic]\nOmega = 1\ng_a = 0.1\ng_b = 0.1\n"
                 "varpi_a = 0\nvarpi_A = 0\nomega_b = 1\nomega_B = 0\n")
    assert main(["coeffs", path]) == 2
    err = capsys.readouterr().err
    assert "omega_b-Omega_+" in err


@pytest.mark.parametrize(
    "text, key",
    [
        ("[microscopic]\nOmega = 1\ng_a = x\ng_b = 1\nDelta = 0\nDelta_a = 0\nDelta_b = 0\n", "microscopic.g_a"),
        ("[microscopic]\nOmega = 1\ng_a = 1\n", "microscopic.g_b"),
        ("[other]\nx = 1\n", "microscopic"),
        ("garbage", "syntax"),
    ],
)
def test_coeffs_malformed_config(tmp_path, capsys, text, key):
    assert main(["coeffs", write(tmp_path, "bad.ini", text)]) == 2
    err = capsys.readouterr().err
    assert len(err.strip().splitlines()) == 1 and key in err


# ---------------------------------------------------------------------------
# darkstate
# ---------------------------------------------------------------------------


def test_darkstate_single_spectrum(capsys):
    assert main(["darkstate", "single", "1", "1"]) == 0
    header, rows = parse_csv(capsys.readouterr().out)
    row = dict(zip(header, map(float, rows[0])))
    energies = sorted(row[f"E{i}_MHz"] for i in range(3))
    assert np.allclose(energies, [-math.sqrt(2), 0, math.sqrt(2)], atol=1e-12)
    assert row["residual"] < 1e-10


def test_darkstate_double_strong_coupling_limit():
    amps = []
    for g in (10.0, 100.0, 1000.0):
        header, row = darkstate_table("double", g, 1.0)
        vals = dict(zip(header, row))
        assert vals["residual"] < 1e-10
        amps.append(abs(vals["amp_000e"]))
    assert amps[0] > amps[1] > amps[2] and amps[2] < 2e-3


@pytest.mark.parametrize("kind", ["single", "double"])
@pytest.mark.parametrize("g, J", [(0.1, 1.0), (1.0, 0.0), (0.0, 2.0), (7.3, 0.4)])
def test_darkstate_residual_small(kind, g, J):
    header, row = darkstate_table(kind, g, J)
    assert dict(zip(header, row))["residual"] < 1e-10


def test_darkstate_degenerate(capsys):
    assert main(["darkstate", "single", "0", "0"]) == 2
    assert "[g]" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_outputs_and_rerun(tmp_path):
    cfg = write(tmp_path, "s.ini", SWEEP_INI)
    out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main(["sweep", cfg, "--out", out1]) == 0
    assert main(["sweep", cfg, "--out", out2, "--threads", "2"]) == 0
    text = open(out1).read()
    assert text == open(out2).read()
    header, rows = parse_csv(text)
    assert header[:2] == ["delta_MHz", "g_MHz"] and len(header) == 2 + 13
    assert len(rows) == 6
    meta = json.load(open(out1 + ".meta.json"))
    assert meta["provenance"]["config"]["grid"]["g_steps"] == "2"
    assert "wall_time_s" in meta["provenance"]
    bh, brows = parse_csv(open(out1 + ".branches.csv").read())
    assert bh[0] == "g_MHz" and len(brows) == 2


def test_sweep_cell_failure_reports_undef(tmp_path, capsys, monkeypatch):
    import cyclicqed.experiments as ex

    real = ex.steady_state
    calls = {"n": 0}

    def flaky(L, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise SolverError("singular")
        return real(L, **kw)

    monkeypatch.setattr(ex, "steady_state", flaky)
    assert main(["sweep", write(tmp_path, "s.ini", SWEEP_INI)]) == 0
    captured = capsys.readouterr()
    _, rows = parse_csv(captured.out)
    assert rows[1][2:] == ["undef"] * 13
    assert "undef" not in rows[0][-4:]
    assert "1 cell(s)" in captured.err


def test_sweep_wrong_run(tmp_path, capsys):
    assert main(["sweep", write(tmp_path, "d.ini", DOUBLE_INI)]) == 2
    assert "scenario.run" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evolve / trajectories
# ---------------------------------------------------------------------------


def test_evolve_single_to_stdout(tmp_path, capsys):
    assert main(["evolve", write(tmp_path, "e.ini", SINGLE_INI)]) == 0
    header, rows = parse_csv(capsys.readouterr().out)
    assert header[0] == "time_us" and "S" in header and "F0" in header
    assert len(rows) == 5 and float(rows[-1][0]) == pytest.approx(0.2)


def test_evolve_double_uses_master(tmp_path, capsys):
    assert main(["evolve", write(tmp_path, "d.ini", DOUBLE_INI)]) == 0
    header, _ = parse_csv(capsys.readouterr().out)
    assert not any(h.endswith("_se") for h in header)


def test_trajectories_stderr_columns_and_rerun(tmp_path):
    cfg = write(tmp_path, "d.ini", DOUBLE_INI)
    outs = [str(tmp_path / f"t{i}.csv") for i in range(2)]
    for o in outs:
        assert main(["trajectories", cfg, "--ntraj", "1", "--seed", "3", "--out", o]) == 0
    assert open(outs[0]).read() == open(outs[1]).read()
    header, _ = parse_csv(open(outs[0]).read())
    assert {"n_1_se", "n_b_se", "n_2_se", "sigma_ee_se"} <= set(header)
    meta = json.load(open(outs[0] + ".meta.json"))
    assert meta["provenance"]["seeds"] == [3] and meta["provenance"]["n_traj"] == 1


def test_trajectories_default_count():
    args = cli.build_parser().parse_args(["trajectories", "x.ini"])
    assert args.ntraj == 25 and args.threads == 1 and args.out is None


def test_trajectories_bad_ntraj(tmp_path, capsys):
    assert main(["trajectories", write(tmp_path, "d.ini", DOUBLE_INI), "--ntraj", "0"]) == 2


def test_solver_failure_keeps_partial(tmp_path, capsys, monkeypatch):
    import cyclicqed.dynamics as dyn

    def failing(fun, span, y0, t_eval, **kw):
        return types.SimpleNamespace(status=-1, message="step size too small", t=t_eval[:3],
                                     y=np.stack([y0] * 3, axis=1))

    monkeypatch.setattr(dyn, "solve_ivp", failing)
    out = str(tmp_path / "run.csv")
    assert main(["evolve", write(tmp_path, "e.ini", SINGLE_INI), "--out", out]) == 3
    assert "solver error" in capsys.readouterr().err
    header, rows = parse_csv(open(out + ".partial").read())
    assert header[0] == "time_us" and len(rows) == 3
    assert "error" in json.load(open(out + ".partial.meta.json"))


def test_invariant_violation_exit_code(tmp_path, capsys, monkeypatch):
    def boom(record, rtol):
        raise InvariantError("trace drifted")

    monkeypatch.setattr(cli, "check_record_invariants", boom)
    assert main(["evolve", write(tmp_path, "e.ini", SINGLE_INI)]) == 4
    assert "invariant" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cyclicqed.cli", "darkstate", "single", "1", "2"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("g_MHz,J_MHz,")
    proc = subprocess.run([sys.executable, "-m", "cyclicqed.cli", "sweep", str(tmp_path / "none.ini")],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.count("\n") == 1
