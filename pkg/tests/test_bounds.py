import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from katoflow import bounds, feynman_kac as fk, functions, potentials, spaces
from katoflow.errors import TimeDomainError

E1 = spaces.euclidean(1)
E3 = spaces.euclidean(3)
S2 = spaces.sphere2(1.0)

COULOMB = potentials.CoulombPotential(E3, charge=1.0, attractive=False)
HYDROGEN = potentials.hydrogen(E3)


def test_f_K_values():
    assert bounds.f_K(0.0, 2.0) == pytest.approx(0.5, rel=1e-14)
    assert bounds.f_K(1.0, 1.0) == pytest.approx(
        math.sqrt(1.0 / (math.e**2 - 1.0)), rel=1e-14
    )
    assert bounds.f_K(1.0, 1.0) == pytest.approx(0.39562, abs=5e-6)
    with pytest.raises(TimeDomainError):
        bounds.f_K(0.0, 0.0)


@given(st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=60, deadline=None)
def test_f_K_continuous_at_zero_curvature(t):
    base = bounds.f_K(0.0, t)
    for k in (1e-6, -1e-6):
        assert abs(bounds.f_K(k * 1e-3 / t, t) - base) / base < 1e-6


def test_f_K_small_K_limit():
    t = 0.7
    assert abs(bounds.f_K(1e-6, t) - bounds.f_K(0.0, t)) / bounds.f_K(0.0, t) < 1e-6


def test_heat_semigroup_sign_closed_form():
    # P_t sign(x) = erf(x / (2 sqrt(t)))
    t = 0.6
    xs = np.array([-1.0, -0.2, 0.0, 0.4, 2.0])
    vals = bounds.heat_semigroup_1d(t, functions.Sign(), xs)
    expected = [math.erf(x / (2 * math.sqrt(t))) for x in xs]
    assert np.allclose(vals, expected, atol=1e-10)


@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_lipschitz_quotient_sign(t):
    report = bounds.lipschitz_quotient(E1, t, functions.Sign())
    target = 1.0 / math.sqrt(math.pi * t)
    assert report.verdict == "holds"
    assert report.empirical_value == pytest.approx(target, rel=0.01)
    assert report.empirical_value <= bounds.f_K(0.0, t)
    assert report.theoretical_value == pytest.approx(1.0 / math.sqrt(2 * t))


def test_lipschitz_quotient_constant_zero():
    report = bounds.lipschitz_quotient(E1, 1.0, functions.Constant(1.0))
    assert report.empirical_value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_holder_quotient_caps(alpha, t):
    report = bounds.holder_quotient(E1, t, alpha, functions.Sign())
    assert report.verdict == "holds"
    cap = 2 ** (1 - alpha) * bounds.f_K(0.0, t) ** alpha
    assert report.theoretical_value == pytest.approx(cap, rel=1e-12)


def test_holder_cap_alpha_half_value():
    assert bounds.holder_cap(0.0, 1.0, 0.5) == pytest.approx(2**0.25, rel=1e-12)
    assert bounds.holder_cap(0.0, 1.0, 0.5) == pytest.approx(1.18921, abs=5e-6)


def test_holder_alpha_one_matches_lipschitz():
    rep_l = bounds.lipschitz_quotient(E1, 0.5, functions.Sign())
    rep_h = bounds.holder_quotient(E1, 0.5, 1.0, functions.Sign())
    assert rep_h.empirical_value == pytest.approx(rep_l.empirical_value, rel=1e-12)
    assert rep_h.theoretical_value == pytest.approx(rep_l.theoretical_value, rel=1e-12)


def test_sphere_conservativeness_and_lipschitz():
    f = functions.HemisphereIndicator()
    for t in (0.5, 1.0):
        report = bounds.lipschitz_quotient(S2, t, f)
        assert report.verdict == "holds"
        assert report.empirical_value <= bounds.f_K(1.0, t)
    assert bounds.f_K(1.0, 0.5) == pytest.approx(
        math.sqrt(1.0 / (math.e - 1.0)), rel=1e-12
    )


def test_sphere_zonal_series_constant():
    vals = bounds.sphere_semigroup_zonal(
        S2, 0.5, functions.HemisphereIndicator(), np.array([0.3, 1.2, 2.8])
    )
    assert np.all((0 < vals) & (vals < 1))
    ones = functions.Constant(1.0)
    ones.zonal_profile = lambda s: np.ones_like(np.asarray(s))
    ones.zonal_breaks_cos = ()
    flat = bounds.sphere_semigroup_zonal(S2, 0.5, ones, np.array([0.4, 2.0]))
    assert np.allclose(flat, 1.0, atol=1e-10)


def test_C_constant_closed_forms():
    assert bounds.C_constant(potentials.ZeroPotential(E3), 0.0, 0.5, 1.0) == 0.0
    c = bounds.C_constant(COULOMB, 0.0, 0.0, 1.0)
    assert c == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-12)
    # alpha = 1/2, r = 1/2: 2^{-1/4} (2/sqrt(pi)) (1/2)^{1/4} * 2
    val = bounds.C_constant(COULOMB, 0.0, 0.5, 0.5)
    assert val == pytest.approx(1.5957691216057308, rel=1e-12)


def test_C_constant_quadrature_cross_check():
    exact = bounds.C_constant(COULOMB, 0.0, 0.5, 0.5, method="closed_form")
    quad = bounds.C_constant(COULOMB, 0.0, 0.5, 0.5, method="quadrature")
    assert quad == pytest.approx(exact, rel=1e-6)


def test_C_constant_divergent_at_alpha_one():
    assert math.isinf(bounds.C_constant(COULOMB, 0.0, 1.0, 0.5))


def test_C_constant_positive_curvature_below_flat():
    # F_K <= F_0 for K > 0, so the K > 0 constant is dominated by the flat one
    flat = bounds.C_constant(COULOMB, 0.0, 0.5, 0.8)
    curved = bounds.C_constant(COULOMB, 1.0, 0.5, 0.8)
    assert curved < flat
    assert curved > 0


def test_A_constant_composition_and_divergence():
    z = potentials.ZeroPotential(E3)
    assert bounds.A_constant(z, 0.0, 0.5, 1.0, 1.0) == 0.0
    khash = fk.khashminskii_certify(HYDROGEN, 1.0)
    a = bounds.A_constant(HYDROGEN, 0.0, 0.5, 1.0, khash.bound_on_C_exp)
    expected = (
        2.0 ** (2 - 0.5)
        * khash.bound_on_C_exp
        * bounds.C_constant(HYDROGEN, 0.0, 0.5, 0.5)
    )
    assert a == pytest.approx(expected, rel=1e-9)
    assert math.isinf(bounds.A_constant(HYDROGEN, 0.0, 1.0, 1.0, 2.0))


def test_A_constant_blowup_slope():
    alphas = np.linspace(0.8, 0.98, 10)
    vals = [bounds.A_constant(HYDROGEN, 0.0, a, 1.0, 2.0) for a in alphas]
    slope = bounds.fit_blowup_exponent(alphas, vals)
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_A_eventually_monotone_in_alpha():
    # reported property: for fixed Coulomb V there is an alpha_0 past which
    # A grows in alpha (the 1/(1-alpha) factor wins over 2^{2-alpha})
    alphas = np.linspace(0.05, 0.95, 20)
    vals = [bounds.A_constant(HYDROGEN, 0.0, a, 8.0, 2.0) for a in alphas]
    increasing = np.diff(vals) > 0
    first_up = int(np.argmax(increasing))
    assert increasing[first_up:].all()


def test_A_monotone_in_t_closed_form():
    vals = [
        bounds.A_constant(HYDROGEN, 0.0, 0.5, t, fk.khashminskii_certify(HYDROGEN, t).bound_on_C_exp)
        for t in (0.25, 0.5, 1.0)
    ]
    assert vals[0] <= vals[1] <= vals[2]


def test_reduction_chain_v0():
    # V=0 collapses the theorem cap to the coupling bound, then to Lipschitz
    t = 0.7
    cap_thm = bounds.theorem_cap(potentials.ZeroPotential(E1), 0.0, 1.0, t, 1.0)
    assert cap_thm == pytest.approx(bounds.f_K(0.0, t), rel=1e-12)
    cap_half = bounds.theorem_cap(potentials.ZeroPotential(E1), 0.0, 0.5, t, 1.0)
    assert cap_half == pytest.approx(bounds.holder_cap(0.0, t, 0.5), rel=1e-12)


def test_verify_main_theorem_v0_matches_holder():
    rep_thm = bounds.verify_main_theorem(
        potentials.ZeroPotential(E1), functions.Sign(), 0.0, 0.5, 1.0
    )
    rep_hq = bounds.holder_quotient(E1, 1.0, 0.5, functions.Sign())
    assert rep_thm.verdict == "holds"
    assert abs(rep_thm.empirical_value - rep_hq.empirical_value) < 1e-10
    assert abs(rep_thm.theoretical_value - rep_hq.theoretical_value) < 1e-10


def test_verify_main_theorem_hydrogen():
    phi = functions.BallIndicator(np.zeros(3), 1.0)
    pairs = bounds.pair_grid_euclidean(E3, anchors=[np.zeros(3)], scale=1.0, k_max=3)
    pairs = [pairs[i] for i in range(0, len(pairs), 2)]
    report = bounds.verify_main_theorem(
        HYDROGEN, phi, 0.0, 0.5, 0.5, pairs=pairs, n_paths=4000, seed=3
    )
    assert report.verdict == "holds"
    assert math.isfinite(report.theoretical_value)
    assert report.empirical_value < report.theoretical_value


def test_eigenfunction_corollary_hydrogen():
    pairs = bounds.pair_grid_euclidean(E3, anchors=[np.zeros(3)], scale=2.0, k_max=8)
    report = bounds.verify_eigenfunction_corollary(
        functions.HydrogenGround(), -0.25, HYDROGEN, 0.0, 0.5, 1.0, pairs
    )
    assert report.verdict == "holds"
    # analytic Lipschitz constant of e^{-r/2} is 1/2, so quotients at unit
    # scale stay below 1/2 * d^{1-alpha} <= 1/2 * scale^{1/2}
    assert report.empirical_value <= 0.5 * math.sqrt(2.0) + 1e-9


def test_corollary_B_single_term_reduces_to_A():
    coul = potentials.CoulombPotential(E3, charge=1.0, attractive=True)
    t = 1.0
    b = bounds.corollary_B_constant([coul], [], 0.0, 0.5, t)
    khash = fk.khashminskii_certify(coul, t)
    a = bounds.A_constant(coul, 0.0, 0.5, t, khash.bound_on_C_exp)
    assert b == pytest.approx(a, rel=1e-9)


def test_corollary_B_helium_toy_finite():
    nuc = potentials.CoulombPotential(E3, charge=2.0, attractive=True)
    rep = potentials.CoulombPotential(E3, charge=1.0 / math.sqrt(2.0),
                                      attractive=False)
    b = bounds.corollary_B_constant([nuc, nuc], [rep], 0.0, 0.5, 1.0)
    assert math.isfinite(b) and b > 0
    assert bounds.corollary_B_constant([], [], 0.0, 0.5, 1.0) == 0.0
    assert math.isinf(
        bounds.corollary_B_constant([nuc], [], 0.0, 1.0, 1.0)
    )


def test_molecular_bound_shape():
    with pytest.raises(TimeDomainError):
        bounds.molecular_bound(1, 1, None, None, math.inf, 1.0, 1.0, 1.0, 0.0)
    v1 = bounds.molecular_bound(1, 1, None, None, math.inf, 0.5, 1.0, 1.0, 0.0)
    assert v1 == pytest.approx(2**0.5 + (0.25**0.25) * 4.0, rel=1e-12)
    # r = inf kills the t^{-3m/2r} factor
    vr = bounds.molecular_bound(2, 1, None, None, 4.0, 0.5, 2.0, 1.0, 0.0)
    vr_inf = bounds.molecular_bound(2, 1, None, None, math.inf, 0.5, 2.0, 1.0, 0.0)
    assert vr == pytest.approx(vr_inf * 2.0 ** (-6.0 / 8.0), rel=1e-12)
    # alpha -> 1 blow-up like 2/(1-alpha)
    alphas = np.linspace(0.8, 0.98, 8)
    vals = [
        bounds.molecular_bound(1, 1, None, None, math.inf, a, 1.0, 1.0, 0.0)
        for a in alphas
    ]
    assert bounds.fit_blowup_exponent(alphas, vals) == pytest.approx(-1.0, abs=0.12)


def test_calibration_dominates_and_extrapolates():
    alpha, m = 0.5, 1
    meas = [(0.5, 1.1), (1.0, 0.8)]
    c_mz, c_rz = bounds.calibrate_molecular_constants(meas, alpha, m, math.inf)
    assert c_rz >= 0.0
    for t, q in meas:
        assert bounds.molecular_bound(m, 1, None, None, math.inf, alpha, t,
                                      c_mz, c_rz) >= q - 1e-9
    assert bounds.molecular_bound(m, 1, None, None, math.inf, alpha, 2.0,
                                  c_mz, c_rz) > 0.0


@given(
    st.floats(min_value=0.05, max_value=0.95),
    st.floats(min_value=0.05, max_value=4.0),
)
@settings(max_examples=40, deadline=None)
def test_kato_scaling_property(alpha, t):
    # closed form obeys kato(a V) = |a| kato(V) and the C-constant weight
    base = COULOMB.closed_form_kato(alpha, t)
    assert COULOMB.scaled(-2.0).closed_form_kato(alpha, t) == pytest.approx(
        2.0 * base, rel=1e-12
    )
    assert bounds.C_constant(COULOMB, 0.0, alpha, t) == pytest.approx(
        2.0 ** (-alpha / 2.0) * base, rel=1e-12
    )
