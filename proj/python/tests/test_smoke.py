import math
import os
from pathlib import Path

import numpy as np
import pytest

import govdamp

ROOT = Path(__file__).resolve().parents[2]
DATA = Path(os.environ.get("GOVDAMP_DATA_DIR", ROOT / "data"))
TEST_DATA = Path(os.environ.get("GOVDAMP_TEST_DATA_DIR", ROOT / "tests" / "data"))
CASE = DATA / "two_area.json"


def read_sdpa(text):
    """Minimal SDPA sparse reader: returns c, F0 and the list of F_i as dense block-diagonal matrices."""
    lines = [ln for ln in text.splitlines() if ln.strip() and ln[0] not in "*\""]
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(s) for s in lines[2].replace(",", " ").replace("{", " ").replace("}", " ").split()[:nblocks]]
    n = sum(abs(s) for s in sizes)
    offsets = np.cumsum([0] + [abs(s) for s in sizes])
    c = np.array([float(v) for v in lines[3].replace(",", " ").split()[:m]]) if m else np.zeros(0)
    F = [np.zeros((n, n)) for _ in range(m + 1)]
    for ln in lines[4:]:
        k, b, i, j, v = ln.split()[:5]
        k, b, i, j, v = int(k), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        r, s = offsets[b] + i, offsets[b] + j
        F[k][r, s] = v
        F[k][s, r] = v
    return c, F[0], F[1:]


def solve_with_cvxpy(c, F0, Fs):
    # CVXOPT: first-order solvers (SCS) and Clarabel stop short of the optimum on the design problem
    cp = pytest.importorskip("cvxpy")

    x = cp.Variable(len(Fs))
    lhs = sum(Fs[i] * x[i] for i in range(len(Fs))) - F0
    prob = cp.Problem(cp.Minimize(c @ x), [0.5 * (lhs + lhs.T) >> 0])
    prob.solve(solver=cp.CVXOPT)
    return prob.status, prob.value


def test_pf_reports_tie_flow():
    code, rep = govdamp.pf(CASE)
    assert code == 0
    assert rep["tool"] == "govdamp"
    assert rep["result"]["converged"] is True


def test_modal_inter_area_mode_in_band():
    code, rep = govdamp.modal(CASE)
    assert code == 0
    modes = rep["result"]["inter_area_modes"]
    assert any(0.4 <= m["freq_hz"] <= 0.8 and 2.0 <= m["damping_pct"] <= 12.0 for m in modes)


def test_controllers_raise_minimum_damping():
    _, base = govdamp.modal(CASE)
    _, rob = govdamp.modal(CASE, controllers="all")
    z0 = base["result"]["minimum_damping"]["damping_pct"]
    z1 = rob["result"]["minimum_damping"]["damping_pct"]
    assert z1 >= 2 * z0


def test_exit_codes_for_bad_input():
    code, rep = govdamp.modal(DATA / "does_not_exist.json")
    assert code == 2 and "error" in rep
    with pytest.raises(ValueError):
        govdamp.run("modal", {"case": str(CASE), "bogus": 1})


def test_spearman_and_ringdown():
    assert govdamp.spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    dt, f, zeta = 0.01, 0.6, 0.05
    t = np.arange(0, 30, dt)
    wn = 2 * math.pi * f / math.sqrt(1 - zeta**2)
    y = np.exp(-zeta * wn * t) * np.cos(2 * math.pi * f * t)
    rd = govdamp.ringdown(y, dt, 0.25, 1.0)
    assert rd["zeta"] == pytest.approx(zeta, abs=0.005)
    assert rd["frequency_hz"] == pytest.approx(f, rel=0.05)


def test_golden_toy_export_solves_to_one_in_cvxpy():
    c, F0, Fs = read_sdpa((TEST_DATA / "toy.dat-s").read_text())
    status, value = solve_with_cvxpy(c, F0, Fs)
    assert status == "optimal"
    assert value == pytest.approx(1.0, abs=1e-5)


def test_design_export_matches_independent_solver():
    res = govdamp.run("design", {"case": str(CASE)})
    assert res["exit_code"] == 0
    ours = res["report"]["result"]["solver"]["objective"]
    text = res["files"][res["report"]["result"]["sdpa_file"]]
    c, F0, Fs = read_sdpa(text)
    assert len(Fs) == res["report"]["result"]["solver"]["variables"]
    status, value = solve_with_cvxpy(c, F0, Fs)
    assert status == "optimal"
    assert value == pytest.approx(ours, rel=1e-6)


def test_out_dir_written(tmp_path):
    res = govdamp.run("export-sdpa", {"case": str(CASE), "out": str(tmp_path / "x")})
    assert res["exit_code"] == 0
    assert (tmp_path / "x" / "report.json").exists()
    assert (tmp_path / "x" / "problem.dat-s").read_text() == res["files"]["problem.dat-s"]
