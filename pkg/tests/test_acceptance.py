"""Acceptance gate: every criterion at its stated tolerance, one line each."""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats as sstats

from katoflow import bounds, cli, coupling, feynman_kac as fk
from katoflow import functions, potentials, spaces

E1 = spaces.euclidean(1)
E3 = spaces.euclidean(3)
S2 = spaces.sphere2(1.0)

SURVIVAL_2_1 = 0.5204998778130465  # 2*Phi(2/(2*sqrt(2))) - 1


def _line(num, name, ok, detail=""):
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def test_c01_coupling_maximality():
    t0 = time.time()
    taus = coupling.simulate_reflection_taus(2.0, 1.0, 0.125, 100_000, seed=101)
    p_hat = float(np.mean(taus > 1.0))
    se = math.sqrt(p_hat * (1 - p_hat) / taus.size)
    ok = abs(p_hat - SURVIVAL_2_1) <= 3 * se + 1e-3
    details = [f"sep=2,t=1: |{p_hat:.5f}-0.52050|<={3 * se + 1e-3:.2g}"]
    for sep in (0.5, 1.0, 2.0):
        taus = coupling.simulate_reflection_taus(sep, 4.0, 0.125, 100_000,
                                                 seed=int(300 + 10 * sep))
        for t in (0.25, 1.0, 4.0):
            p = float(np.mean(taus > t))
            se = math.sqrt(max(p * (1 - p), 1e-12) / taus.size)
            exact = coupling.reflection_survival_exact(sep, t)
            ok &= abs(p - exact) <= 3 * se + 1e-3
    elapsed = time.time() - t0
    ok &= elapsed < 60.0
    _line(1, "coupling maximality", ok, f"{details[0]} runtime={elapsed:.1f}s")


def test_c02_marginal_correctness():
    x = np.array([0.0])
    y = np.array([2.0])
    xs, ys, _ = coupling.simulate_reflection_endpoints(
        E1, x, y, 1.0, 0.125, 100_000, seed=202
    )
    sig = math.sqrt(2.0)
    p_x = sstats.kstest(xs[:, 0], "norm", args=(0.0, sig)).pvalue
    p_y = sstats.kstest(ys[:, 0], "norm", args=(2.0, sig)).pvalue
    ok = p_x > 1e-3 and p_y > 1e-3
    _line(2, "coupling marginals KS", ok, f"p_X={p_x:.3g} p_Y={p_y:.3g}")


def test_c03_lipschitz_smoothing():
    t0 = time.time()
    ok = True
    details = []
    for t in (0.25, 1.0, 4.0):
        rep = bounds.lipschitz_quotient(E1, t, functions.Sign())
        target = 1.0 / math.sqrt(math.pi * t)
        ok &= abs(rep.empirical_value - target) / target < 0.01
        ok &= rep.empirical_value <= bounds.f_K(0.0, t) + 1e-9
        details.append(f"t={t}: q={rep.empirical_value:.5f}")
    elapsed = time.time() - t0
    ok &= elapsed < 10.0
    _line(3, "Lipschitz smoothing", ok, "; ".join(details) + f" ({elapsed:.1f}s)")


def test_c04_holder_self_improvement():
    ok = True
    for t in (0.25, 1.0, 4.0):
        for alpha in (0.25, 0.5, 0.75, 1.0):
            rep = bounds.holder_quotient(E1, t, alpha, functions.Sign())
            cap = 2 ** (1 - alpha) * bounds.f_K(0.0, t) ** alpha
            ok &= rep.empirical_value <= cap + 1e-9
    _line(4, "Hoelder self-improvement", ok)


def test_c05_kato_closed_forms():
    coul = potentials.CoulombPotential(E3, charge=1.0, attractive=False)
    ok = True
    worst = 0.0
    for alpha in (0.0, 0.25, 0.5, 0.75, 0.9):
        for t in (0.25, 1.0):
            exact = (2 / math.sqrt(math.pi)) * t ** ((1 - alpha) / 2) / (1 - alpha)
            quad = potentials.kato_integral(coul, alpha, t, method="quadrature")
            rel = abs(quad.bound - exact) / exact
            worst = max(worst, rel)
            ok &= rel < 1e-6
    mc_ok = True
    for alpha in (0.0, 0.25, 0.5, 0.75, 0.9):
        mc = potentials.kato_integral(
            coul, alpha, 1.0, method="monte_carlo", n_samples=100_000, seed=505
        )
        exact = (2 / math.sqrt(math.pi)) / (1 - alpha)
        mc_ok &= abs(mc.bound - exact) <= 3 * mc.stderr
    _line(5, "Kato closed forms", ok and mc_ok,
          f"worst quadrature rel err={worst:.2e}; MC within 3 sigma={mc_ok}")


def test_c06_alpha_blowup_slope():
    mol = potentials.hydrogen()
    alphas = np.linspace(0.8, 0.98, 10)
    vals = [bounds.C_constant(mol, 0.0, a, 1.0) for a in alphas]
    slope = bounds.fit_blowup_exponent(alphas, vals)
    ok = abs(slope + 1.0) <= 0.1
    _line(6, "alpha->1 blow-up slope", ok, f"slope={slope:.3f}")


def test_c07_feynman_kac_eigen_oracles():
    t0 = time.time()
    target_h = math.exp(0.125) * math.exp(-0.5)
    est_h = fk.fk_evaluate(
        potentials.hydrogen(), functions.HydrogenGround(),
        np.array([1.0, 0.0, 0.0]), 0.5, 100_000, seed=12345, grid_step=0.005,
    )
    rel_h = abs(est_h.value - target_h) / target_h
    elapsed = time.time() - t0
    target_o = math.exp(-0.5) * math.exp(-0.5 * 0.16)
    est_o = fk.fk_evaluate(
        potentials.OscillatorPotential(E1), functions.OscillatorGround(),
        np.array([0.4]), 0.5, 100_000, seed=7, grid_step=0.005,
    )
    rel_o = abs(est_o.value - target_o) / target_o
    ok = rel_h <= 0.02 and rel_o <= 0.01 and elapsed < 300.0
    _line(7, "Feynman-Kac eigen-oracles", ok,
          f"hydrogen rel={rel_h:.4f} ({elapsed:.0f}s), oscillator rel={rel_o:.4f}")


def test_c08_khashminskii_bound():
    r = math.pi / 16
    coul = potentials.CoulombPotential(E3, charge=1.0, attractive=True)
    cert = fk.khashminskii_certify(coul, r)
    mean, se = fk.exp_action_moment(
        coul, np.zeros(3), r, 100_000, seed=9, grid_step=r / 100
    )
    ok = cert.bound_on_C_exp == pytest.approx(2.0, rel=1e-9)
    ok &= mean <= 2.0 + 3 * se
    _line(8, "Khashminskii exponential moment", ok,
          f"E exp(int|V|)={mean:.4f}+-{se:.4f} <= 2")


def test_c09_duhamel_refinement():
    bump = potentials.BoundedPotential(
        E1, functions.SmoothBump(1.0, 1.0), sup_norm=1.0, lower_bound=0.0
    )
    phi = functions.SmoothBump(1.0, 1.5)
    residuals = [fk.duhamel_residual(bump, phi, 0.5, m) for m in (8, 16, 32, 64)]
    ratios = [a / b for a, b in zip(residuals, residuals[1:])]
    ok = len(ratios) == 3 and all(r >= 3.5 for r in ratios)
    _line(9, "Duhamel residual refinement", ok,
          "ratios=" + ",".join(f"{r:.2f}" for r in ratios))


def test_c10_main_theorem_verdicts():
    mol = potentials.hydrogen()
    phi = functions.BallIndicator(np.zeros(3), 1.0)
    ok = True
    for t in (0.5, 1.0):
        rep = bounds.verify_main_theorem(
            mol, phi, 0.0, 0.5, t, n_paths=10_000, seed=606
        )
        ok &= rep.verdict == "holds"
    # V = 0 degenerate reduction agrees with the quadrature criteria to 1e-10
    for t in (0.25, 1.0, 4.0):
        for alpha in (0.25, 0.5, 0.75, 1.0):
            rep0 = bounds.verify_main_theorem(
                potentials.ZeroPotential(E1), functions.Sign(), 0.0, alpha, t
            )
            ref = bounds.holder_quotient(E1, t, alpha, functions.Sign())
            ok &= abs(rep0.empirical_value - ref.empirical_value) < 1e-10
            ok &= abs(rep0.theoretical_value - ref.theoretical_value) < 1e-10
    _line(10, "main-theorem verdicts", ok)


def test_c11_sphere_suite():
    ok = spaces.conservativeness_defect(S2, 0.5, np.array([0.0, 0.0, 1.0])) < 1e-8
    ok &= spaces.conservativeness_defect(S2, 1.0, np.array([1.0, 0.0, 0.0])) < 1e-8
    details = []
    for t in (0.5, 1.0):
        rep = bounds.lipschitz_quotient(S2, t, functions.HemisphereIndicator())
        cap = bounds.f_K(1.0, t)
        ok &= rep.empirical_value <= cap + 1e-9
        details.append(f"t={t}: {rep.empirical_value:.4f}<={cap:.4f}")
    _line(11, "sphere suite", ok, "; ".join(details))


def test_c12_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "couple": {"n_runs": 20000, "t_grid": [0.25, 1.0]},
        "moments": {"n_samples": 12000},
        "kato": {"mc_samples": 20000},
        "fk": {},
        "kernel-checks": {"n_ks": 12000},
        "khashminskii": {"n_paths": 12000},
        "theorem": {"n_paths": 1200, "t_grid": [0.5]},
        "molecule": {"n_paths": 1200},
        "holder": {"t_grid": [0.5]},
        "duhamel": {},
    }))
    outs = [tmp_path / n for n in ("a", "b", "w8")]
    for out, workers in zip(outs, ("1", "1", "8")):
        code = cli.main(["all", "--config", str(cfg), "--seed", "99",
                         "--out", str(out), "--workers", workers])
        assert code == 0
    files = sorted(p.name for p in outs[0].glob("*_results.csv"))
    files.append("records.ndjson")
    ok = True
    for name in files:
        ok &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        ok &= (outs[0] / name).read_bytes() == (outs[2] / name).read_bytes()
    _line(12, "determinism and worker invariance", ok,
          f"{len(files)} artifacts byte-compared")
