"""Acceptance criteria 1-11. Each test records one PASS/FAIL line, printed at the
end of the pytest run (and by running this file directly)."""

import json
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from toric_sasaki.catalog import builtin_entries, get_entry, weighted_s3
from toric_sasaki.cli import main
from toric_sasaki.document import to_document
from toric_sasaki.errors import Unbounded
from toric_sasaki.ma_solver import IDENTITY, SolverConfig, blowup_diagnostics, continuity_path
from toric_sasaki.pipeline import analyze
from toric_sasaki.polytope import HPolytope, enumerate_vertices
from toric_sasaki.potential import claim_bound_check
from toric_sasaki.shooting import compare_with_grid

NO_IDENTITY_FILTER = SolverConfig(mass_tol=math.inf, moment_tol=math.inf)
PATH_WEIGHTS = ("5/4", "3/2", "7/4")


def record(k: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _cli_json(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip().startswith("{") else None), err


@pytest.fixture(scope="module")
def m1_runs():
    runs = {}
    for a in PATH_WEIGHTS:
        geo = analyze(weighted_s3(F(a)).cone)
        t0 = time.perf_counter()
        res = continuity_path(geo.grid(N=2048))
        runs[a] = (geo, res, time.perf_counter() - t0)
    return runs


def test_criterion_01_exact_formula(tmp_path, capsys):
    cases = [("round S3", 1, [[1, 0], [0, 1]], [1, 1], "1"),
             ("round S5", 2, [[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 1, 1], "1"),
             ("xi=(3/2,1/2)", 1, [[1, 0], [0, 1]], ["3/2", "1/2"], "1/2"),
             ("xi=(4/3,2/3)", 1, [[1, 0], [0, 1]], ["4/3", "2/3"], "2/3")]
    ok, parts = True, []
    for label, m, lam, xi, R in cases:
        path = tmp_path / "in.json"
        path.write_text(json.dumps({"m": m, "lambda": lam, "xi": xi}))
        t0 = time.perf_counter()
        code, rep, _ = _cli_json(capsys, "r", str(path))
        dt = time.perf_counter() - t0
        good = code == 0 and rep["R"]["exact"] == R and F(rep["R"]["exact"]) == F(R) and dt < 1
        ok &= good
        parts.append(f"{label} R={rep['R']['exact']} ({dt:.3f}s)")
    record(1, ok, "; ".join(parts))


def test_criterion_02_cross_derivation():
    t0 = time.perf_counter()
    checked, ok = [], True
    for e in builtin_entries():
        geo = analyze(e.cone)
        if geo.rreport.Q is None:
            continue
        ratio = geo.crosscheck()
        ok &= ratio == geo.rreport.R
        checked.append(f"{e.name}:{geo.rreport.R}")
    dt = time.perf_counter() - t0
    record(2, ok and dt < 1 and len(checked) >= 7,
           f"compute_R == |OQ|/|P_cQ| on {len(checked)} entries ({', '.join(checked)}) in {dt:.3f}s")


def test_criterion_03_toric_fano():
    t0 = time.perf_counter()
    # independent route: shoelace barycenter of the anticanonical polygon of the fan
    # (1,0), (0,1), (-1,-1), (1,1), then the ray from P_c through O
    poly = [(F(-1), F(0)), (F(0), F(-1)), (F(2), F(-1)), (F(-1), F(2))]
    rays = [(1, 0), (0, 1), (-1, -1), (1, 1)]
    area = cx = cy = F(0)
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        cr = x0 * y1 - x1 * y0
        area, cx, cy = area + cr, cx + (x0 + x1) * cr, cy + (y0 + y1) * cr
    area /= 2
    pc = (cx / (6 * area), cy / (6 * area))
    s = min(F(1) / (pc[0] * a + pc[1] * b) for a, b in rays if pc[0] * a + pc[1] * b > 0)
    R_poly = s / (1 + s)
    R_pipe = analyze(get_entry("BlpCP2").cone).rreport.R
    dt = time.perf_counter() - t0
    record(3, R_poly == R_pipe == F(6, 7) and dt < 1,
           f"anticanonical polygon R={R_poly}, cone pipeline R={R_pipe} ({dt:.3f}s)")


def test_criterion_04_path_vs_formula(m1_runs):
    ok, parts = True, []
    for a, (geo, res, dt) in m1_runs.items():
        b = res.bracket
        R = float(geo.rreport.R)
        width = b.t_hi - b.t_lo if b.t_hi is not None else math.inf
        good = (b.R_numeric is not None and abs(b.R_numeric - R) <= 0.05 and width <= 1e-2
                and dt <= 300 and res.grid.nominal_n == 2048)
        ok &= good
        parts.append(f"a={a} R={geo.rreport.R} bracket=[{b.t_lo:.5f},{b.t_hi:.5f}] "
                     f"R_num={b.R_numeric:.6f} ({b.reason}, {dt:.1f}s)")
    record(4, ok, "; ".join(parts))


def test_criterion_05_identity_residuals(m1_runs):
    ok, parts = True, []
    for a, (geo, res, _) in m1_runs.items():
        ok &= res.bracket.reason != IDENTITY
        # rerun without the residual filter so acceptance does not depend on the residuals
        free = continuity_path(geo.grid(N=2048), NO_IDENTITY_FILTER)
        worst = max(max(s.mass_residual, s.moment_residual) for s in free.states)
        ok &= worst <= 1e-6
        parts.append(f"m=1 a={a}: {len(free.states)} states, max {worst:.1e}")
    geo = analyze(get_entry("weighted-S5-6/5,9/10,9/10").cone)
    t0 = time.perf_counter()
    smoke = continuity_path(geo.grid(N=160), NO_IDENTITY_FILTER, t_max=0.5)
    dt = time.perf_counter() - t0
    worst2 = max(max(s.mass_residual, s.moment_residual) for s in smoke.states)
    ok &= worst2 <= 1e-3 and len(smoke.states) >= 2
    parts.append(f"m=2 weighted S5 smoke (N=160, t<={smoke.states[-1].t:g}): "
                 f"{len(smoke.states)} states, max {worst2:.1e} ({dt:.0f}s)")
    record(5, ok, "; ".join(parts))


def test_criterion_06_blowup_structure(m1_runs):
    geo, res, _ = m1_runs["3/2"]
    states = res.states
    d = blowup_diagnostics(res, geo.rreport.binding_facets)
    dists = [s.min_facet_distance for s in states]
    tail = dists[-4:]
    decreasing = all(y < x for x, y in zip(tail, tail[1:]))
    m0 = abs(states[0].m_t)
    ratios = [abs(s.m_t) / m0 for s in states]
    ok = (decreasing and dists[-1] < 0.05 and d["final"]["argmin_facets"] == list(
        geo.rreport.binding_facets) and max(ratios) <= 3 and min(ratios) >= 1 / 3)
    record(6, ok, f"min facet distance {dists[0]:.3f} -> {dists[-1]:.4f} at t={states[-1].t}, "
                  f"argmin {d['final']['argmin_facets']} vs binding {list(geo.rreport.binding_facets)}, "
                  f"|m_t|/|m_0| in [{min(ratios):.3f}, {max(ratios):.3f}]")


def test_criterion_07_co_blowup(m1_runs):
    ok, parts = True, []
    for a, (geo, res, _) in m1_runs.items():
        assert geo.rreport.R < 1
        g = blowup_diagnostics(res, geo.rreport.binding_facets)["growth"]
        gap = g["co_blowup_gap"]
        ok &= gap is not None and gap <= 2
        parts.append(f"a={a}: |x_t| step {g['first_step_x_above_cap']}, "
                     f"sup phi step {g['first_step_phi_above_cap']}, gap {gap}")
    record(7, ok, "; ".join(parts))


def test_criterion_08_claim():
    ok, worst_change, count = True, 0.0, 0
    for e in builtin_entries():
        K = analyze(e.cone).potential()
        for a in range(K.d):
            rep = claim_bound_check(K, a, radii=(50.0, 100.0))
            ok &= rep.finite and rep.relative_change < 0.05
            worst_change = max(worst_change, rep.relative_change)
            count += 1
    record(8, ok, f"{count} (entry, facet) pairs finite; max change 50->100 = {worst_change:.1e}")


def test_criterion_09_potential_consistency():
    rng = np.random.default_rng(9)
    h = 1e-4
    t0 = time.perf_counter()
    ok, worst = True, [0.0, 0.0, 0.0]
    for e in builtin_entries():
        geo = analyze(e.cone)
        K = geo.potential()
        verts = np.array([[float(x) for x in v] for v in geo.vpoly.vertices])
        bary = np.array([float(x) for x in geo.summary.barycenter])
        v = 0.98 * (rng.dirichlet(np.ones(len(verts)), 100) @ verts - bary) + bary
        e1 = np.abs(K.legendre_dual(K.G.grad_G(v)) - v).max()
        e2 = np.abs(K.hess_u0(K.G.grad_G(v)) @ K.G.hess_G(v) - np.eye(geo.m)).max()
        x = rng.uniform(-10, 10, (100, geo.m))
        grad, hess = K.grad_u0(x), K.hess_u0(x)
        e3 = 0.0
        for j in range(geo.m):
            step = np.zeros(geo.m)
            step[j] = h
            fd = (K.eval_u0(x + step) - K.eval_u0(x - step)) / (2 * h)
            scale = 1 + np.abs(hess).max()
            e3 = max(e3, np.abs(fd - grad[:, j]).max() / (h * h * scale))
        worst = [max(worst[0], e1), max(worst[1], e2), max(worst[2], e3)]
        ok &= e1 <= 1e-10 and e2 <= 1e-9 and e3 <= 1e2
    dt = time.perf_counter() - t0
    record(9, ok and dt < 30,
           f"involution {worst[0]:.1e}, Hessian inverse {worst[1]:.1e}, "
           f"FD gradient {worst[2]:.1f} h^2 (limit 100 h^2) in {dt:.1f}s")


def test_criterion_10_shooting(w32):
    G = w32.grid(N=2048)
    from toric_sasaki.ma_solver import solve_step
    phi, parts, ok = None, [], True
    for t in (0.0, 0.2, 0.4):
        s = solve_step(G, t, phi)
        phi = s.phi
        diff, _ = compare_with_grid(G, s)
        ok &= diff <= 1e-6
        parts.append(f"t={t}: {diff:.1e}")
    record(10, ok, "sup |grid - shooting| " + ", ".join(parts))


def test_criterion_11_robustness(tmp_path, capsys):
    cases = [
        ("no gamma", {"m": 1, "lambda": [[1, 0], [0, 1], [-1, -2]], "xi": [1, 1]}, 2,
         "InconsistentChernCondition"),
        ("Reeb not positive", {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1, -1]}, 2,
         "ReebNotPositive"),
        ("Reeb on boundary (unbounded section)", {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1, 0]},
         2, "ReebNotPositive"),
        ("float in xi", {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1.5, 0.5]}, 1, None),
        ("missing field", {"m": 1, "lambda": [[1, 0], [0, 1]]}, 1, None),
    ]
    ok, parts = True, []
    for label, doc, want, err_code in cases:
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        for cmd in ("validate", "r"):
            code, rep, err = _cli_json(capsys, cmd, str(path))
            good = code == want and "Traceback" not in err
            if err_code is not None:
                block = rep["validation"] if cmd == "validate" else rep
                good &= block["error"]["code"] == err_code
            ok &= good
        parts.append(f"{label} -> exit {code}")
    try:
        enumerate_vertices(HPolytope.from_facets([((1, 0), 1), ((0, 1), 1)]))
        ok = False
    except Unbounded as exc:
        parts.append(f"unbounded polytope -> {exc.to_dict()['code']}")
    code = main(["solve-path", str(tmp_path / "bad.json")])
    capsys.readouterr()
    ok &= code == 1
    record(11, ok, "; ".join(parts))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
