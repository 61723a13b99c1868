import cmath
import json
import math

import numpy as np
import pytest

from pv5 import pvcore, specialfn as sf, uniform as U
from pv5.errors import CZeroError, DomainViolationError, NoSolutionError, SingularPointError
from pv5.pvcore import PVState

from conftest import cpx

SIGMA_STAR = 1j / math.pi * math.log(3 + math.sqrt(8))
RNG = np.random.default_rng(7)


def random_state(rng=RNG):
    t = float(rng.uniform(0.5, 10))
    y = complex(*rng.normal(size=2)) - 1.5
    return PVState(t, y, complex(*rng.normal(size=2)), complex(*rng.normal(size=2)), cmath.sqrt(y))


def large_t_state(t=40.0):
    y = -1 - 4 / t
    return PVState.from_u(t, y, -t / 8, 1.0, sqrt_y=cmath.sqrt(y))


@pytest.fixture(scope="module")
def small_t_state():
    return pvcore.seed_at_zero(0.01, pvcore.SeedZero(0.56109985j, -1j))


# --------------------------------------------------------- scalar reduction


def test_v_zero_direct_raises():
    with pytest.raises(CZeroError):
        U.scalar_reduce("direct", PVState(1.0, -2.0, 0.0, 0.0))


def test_unknown_gauge():
    with pytest.raises(ValueError):
        U.scalar_reduce("sideways", random_state())


@pytest.mark.parametrize("gauge", U.GAUGES)
def test_F_against_finite_differences(gauge):
    h = 1e-4
    for _ in range(5):
        sc = U.scalar_reduce(gauge, random_state())
        eta = complex(*RNG.normal(scale=2, size=2)) + 3j

        def d(f, k):
            if k == 1:
                return (f(eta + h) - f(eta - h)) / (2 * h)
            return (f(eta + h) - 2 * f(eta) + f(eta - h)) / h ** 2

        A, B, C = sc.A, sc.B, sc.C
        c = C(eta)
        ref = A(eta) ** 2 + B(eta) * c - d(A, 1) + A(eta) * d(C, 1) / c + 0.75 * (d(C, 1) / c) ** 2 - 0.5 * d(C, 2) / c
        assert abs(sc.F(eta) - ref) < 1e-6 * max(1, abs(ref))


def test_direct_entries_match_lambda_system():
    st = random_state()
    sc = U.scalar_reduce("direct", st)
    from pv5 import lax

    lam = 0.3 + 1.7j
    M = lax.lax_matrix(lam, st).matrix() / st.t
    eta = lam * st.t
    assert abs(sc.A(eta) - M[0, 0]) < 1e-12 * abs(M[0, 0])
    assert abs(sc.B(eta) - M[0, 1]) < 1e-12 * abs(M[0, 1])
    assert abs(sc.C(eta) - M[1, 0]) < 1e-12 * abs(M[1, 0])
    assert sc.lambda_of_eta(eta) == pytest.approx(lam)


def test_tilde_decomposition_at_large_t():
    sc = U.scalar_reduce("tilde", large_t_state())
    t, eta = 40.0, 10.0
    model = t * t * eta * eta / (4 * (eta * eta - 0.25)) + 3 / (4 * eta * eta)
    assert sc.model(eta) == pytest.approx(model)
    budget = 1.0 / eta ** 2
    assert abs(sc.F(eta) - model) < budget
    # g eta^2 stays bounded along both real and imaginary directions
    scaled = [abs(sc.g(e)) * abs(e) ** 2 for e in (10, 20, 40, 80, 10j, 20j, 40j, 80j)]
    assert max(scaled) < 1.0


def test_hat_decomposition_at_large_t():
    sc = U.scalar_reduce("hat", large_t_state())
    scaled = [abs(sc.g(e)) * abs(e) ** 2 for e in (-10j, -20j, -40j, -80j)]
    assert max(scaled) < 1.0


def test_small_t_remainder(small_t_state):
    # F minus the model has a 1/eta^2 part -t/(2(1-y)); what is left after it is O(1/eta^3)
    st = small_t_state
    sc = U.scalar_reduce("direct", st)
    k2 = -st.t / (2 * (1 - st.y))
    far = 1e3j
    assert abs(sc.g(far) * far ** 2 - k2) < 1e-2 * abs(k2)
    ratios = []
    for e in (2, 5, 10, 20, 40, 100):
        eta = 1j * e
        ratios.append(abs(sc.g(eta) - k2 / eta ** 2) * e ** 3 / abs(st.v * st.t))
    assert max(ratios) < 10
    assert max(ratios) / min(ratios) < 1.01


def test_small_t_model_uses_alpha(small_t_state):
    st = small_t_state
    sc = U.scalar_reduce("direct", st)
    a = pvcore.alpha_whittaker(st)
    eta = 3 + 4j
    whittaker = 0.25 - 0.5 / eta + (a * a / 4 - 0.25) / eta ** 2
    assert abs(sc.model(eta) - whittaker) < 1e-10


# ------------------------------------------------------- model coefficients


def test_whittaker_coeffs_oracle(frozen):
    rec = frozen["whittaker_coeffs_seed0"]
    s = rec["state"]
    st = PVState(rec["t"], cpx(s["y"]), cpx(s["v"]), cpx(s["ln_u"]), cpx(s["sqrt_y"]))
    assert abs(pvcore.alpha_whittaker(st) - cpx(rec["alpha"])) < 1e-12
    got = U.whittaker_model_coeffs(st)
    for name in ("c1", "c2", "c3"):
        ref = cpx(rec[name])
        assert abs(getattr(got, name) - ref) < 1e-12 * max(1, abs(ref))


def test_c3_is_beta(small_t_state):
    st = small_t_state
    got = U.whittaker_model_coeffs(st)
    assert got.c3 ** 2 == pytest.approx(st.v * (1 - 1 / st.y) / st.u, rel=1e-14)


def test_c1_vanishes_with_alpha():
    # states with alpha -> 0: (2 v (1-y)/y^{1/2})^2/4 - v t -> 0
    vals = []
    for eps in (1e-2, 1e-3, 1e-4):
        t, y = 0.5, -1.0
        # pick v so that v^2 (1-y)^2/y - v t = eps^2/4 (small alpha)
        a, b, c = (1 - y) ** 2 / y, -t, -(eps ** 2) / 4
        v = (-b - cmath.sqrt(b * b - 4 * a * c)) / (2 * a)
        st = PVState(t, y, v, 0.0, cmath.sqrt(y))
        alpha = pvcore.alpha_whittaker(st)
        c1 = U.whittaker_model_coeffs(st).c1
        beta = cmath.sqrt(st.v * (1 - 1 / st.y) / st.u)
        vals.append(abs(c1 / (alpha / 2 * beta / t) - 1))
    assert vals[-1] < vals[0]
    assert vals[-1] < 1e-3


def test_large_t_invariants():
    for t in (1.0, 7.5, 40.0):
        m = U.large_t_coeffs(t)
        assert m.d3 / m.d1 == pytest.approx(-1j / math.pi)
        assert m.M == pytest.approx(1.0)
        assert m.M == pytest.approx(-m.d1 * m.d2)
        assert (m.e1, m.e3, m.e4) == (m.d1, m.d2, m.d3)
        assert m.e2 == -2j * math.pi * m.d2
        u_hat = 0.7 - 0.2j
        u = u_hat * math.exp(t / 2)
        assert -2j * math.pi * m.d2 * u / m.d1 == pytest.approx(-2j * u_hat)
    with pytest.raises(ValueError):
        U.large_t_coeffs(0.0)


def test_coefficient_dicts():
    assert set(U.large_t_coeffs(2.0).as_dict()) == {"d1", "d2", "d3", "e1", "e2", "e3", "e4", "M"}
    assert set(U.ModelCoefficients("small-t").as_dict()) == {"c1", "c2", "c3"}


# ------------------------------------------------------ closed-form multipliers


def test_small_t_multipliers():
    assert U.s1_small_t(0, 0.4) == 0 and U.s2_small_t(0, 0.4) == 0
    assert abs(cmath.sin(0.5 * math.pi * SIGMA_STAR) - 1j) < 1e-15
    assert abs(U.s1_small_t(SIGMA_STAR, -1j) - 2j) < 1e-14
    assert abs(U.s2_small_t(SIGMA_STAR, -1j) + 2j) < 1e-14


def test_large_t_multipliers():
    assert U.s1_large_t(1) == 2j and U.s2_large_t(1) == -2j
    s1, s2 = U.s1_large_t(1j), U.s2_large_t(1j)
    assert (s1, s2) == (2, 2)
    for u in (1, 1j, 0.3 - 2j, -5):
        assert U.s1_large_t(u) * U.s2_large_t(u) == pytest.approx(4)


def test_connection_solve_unit():
    sigma, r = U.connection_solve(1)
    assert abs(sigma - 0.5610998527j) < 1e-9
    assert abs(sigma - SIGMA_STAR) < 1e-15
    assert r == -1j


def test_connection_mirror_available():
    cands = U.connection_candidates(1)
    assert any(abs(s + SIGMA_STAR) < 1e-12 and r == 1j for s, r in cands)
    for s, _ in cands:
        assert 0 <= s.real < 1


def test_connection_check_exact():
    for u in (1, 1j, 0.4 + 0.9j):
        sigma, r = U.connection_solve(u)
        assert r == pytest.approx(-1j * u)
        assert max(U.connection_check(sigma, r, u)) < 1e-12


def test_connection_perturbation_monotone():
    res = [sum(U.connection_check(SIGMA_STAR + d, -1j, 1)) for d in (0.0025, 0.005, 0.01, 0.02)]
    assert res[0] > 1e-4
    assert all(b > a for a, b in zip(res, res[1:]))


def test_connection_no_solution():
    with pytest.raises(NoSolutionError):
        U.connection_solve(0)


# --------------------------------------------------------- model solutions


@pytest.mark.parametrize("t", [5.0, 40.0])
def test_bessel_wronskian(t):
    for eta in (0.3 + 1j, -2 + 0.5j, 3j, 1 + 2j, 0.2 - 0.7j):
        E = sf.SectorArg(eta, cmath.phase(eta))
        p, pp = U.bessel_model_solution("plus", E, t, deriv=True)
        m, mp = U.bessel_model_solution("minus", E, t, deriv=True)
        W = p * mp - pp * m
        scale = max(abs(p * mp), abs(pp * m))
        assert abs(W - 1) < 1e-12 * max(1, scale)


def test_bessel_model_residual():
    t, h = 5.0, 1e-3
    for k in range(20):
        eta = complex(RNG.uniform(-2, 2), RNG.uniform(0.3, 3))
        for which in ("plus", "minus"):
            def f(e):
                return U.bessel_model_solution(which, sf.SectorArg(e, cmath.phase(e)), t)

            d2 = (f(eta + h) - 2 * f(eta) + f(eta - h)) / h ** 2
            res = d2 - U.bessel_model_F(eta, t) * f(eta)
            assert abs(res) <= 1e-6 * max(1, abs(d2))


def test_bessel_far_zone_leading_form():
    # phi_+ ~ sqrt(pi/t) e^{t/4} e^{-t lambda/2}; the relative gap is t/(16 |eta|)
    t = 40.0
    for r in (5 * t, 10 * t, 50 * t):
        eta = 1j * r
        phi = U.bessel_model_solution("plus", sf.SectorArg(eta, math.pi / 2), t)
        ref = math.sqrt(math.pi / t) * math.exp(t / 4) * cmath.exp(-t * (eta + 0.5) / 2)
        gap = abs(phi / ref - 1)
        assert gap * r / t == pytest.approx(1 / 16, rel=0.02)


def test_bessel_recessive_dominant():
    eta = sf.SectorArg(2 + 0.5j, cmath.phase(2 + 0.5j))
    plus = [abs(U.bessel_model_solution("plus", eta, t)) for t in (5, 10, 20)]
    minus = [abs(U.bessel_model_solution("minus", eta, t)) for t in (5, 10, 20)]
    assert plus[0] > plus[1] > plus[2]
    assert minus[0] < minus[1] < minus[2]


@pytest.mark.parametrize("eta", [0.0, 0.5, -0.5])
def test_bessel_singular_points(eta):
    with pytest.raises(SingularPointError):
        U.bessel_model_solution("plus", eta, 4.0)


def test_whittaker_model_solution_equation():
    mu, h = 0.3j, 1e-3
    for eta in (2 + 1j, 0.5 + 3j, -1 + 2j):
        for which in ("M", "W"):
            def f(e):
                return U.whittaker_model_solution(which, sf.SectorArg(e, cmath.phase(e)), mu)

            d2 = (f(eta + h) - 2 * f(eta) + f(eta - h)) / h ** 2
            rhs = (0.25 - 0.5 / eta + (mu * mu - 0.25) / eta ** 2) * f(eta)
            assert abs(d2 - rhs) < 1e-6 * max(1, abs(d2))


# --------------------------------------------------------- approximant error


def test_eta_ray_points():
    pts = U.EtaRay((0, 2, 2 + 2j), 5).points()
    assert np.allclose(pts, [0, 1, 2, 2 + 1j, 2 + 2j])


def test_default_sheets():
    assert U.default_arg("tilde", 1 - 1j) == pytest.approx(2 * math.pi - math.pi / 4)
    assert U.default_arg("hat", 1 - 1j) == pytest.approx(-math.pi / 4)


def test_domain_violations():
    st = large_t_state()
    with pytest.raises(DomainViolationError):
        U.approximant_report("tilde", st, U.EtaRay((2 + 1j, 2 - 1j)))
    with pytest.raises(DomainViolationError):
        U.approximant_report("hat", st, U.EtaRay((-2 + 1j, -2 - 1j)))
    with pytest.raises(DomainViolationError):
        U.approximant_report("tilde", st, U.EtaRay((-1 - 1j, 1 + 1j)))
    with pytest.raises(DomainViolationError):
        U.approximant_report("direct", PVState(0.5, -2.0, 0.1, 0.0, cmath.sqrt(-2)), U.EtaRay((0.5 - 1j, 0.5 + 1j)))


@pytest.mark.parametrize("gauge,ray", [("tilde", None), ("hat", U.EtaRay((-0.25j, -10j)))])
def test_exact_model_is_reproduced(gauge, ray):
    st = large_t_state()
    sc = U.scalar_reduce(gauge, st)
    rep = U.approximant_report(gauge, st, ray, F=sc.model)
    assert rep.error <= 1e-9


def test_exact_whittaker_model_is_reproduced(small_t_state):
    sc = U.scalar_reduce("direct", small_t_state)
    assert U.approximant_error("direct", small_t_state, F=sc.model) <= 1e-9


def test_tilde_approximant_improves_with_t():
    errs = [U.approximant_error("tilde", pvcore.seed_at_infinity(t, pvcore.SeedInf(1), refined=True)) for t in (20, 40)]
    assert errs[1] < errs[0] < 0.1


def test_negative_control_does_not_converge():
    st = pvcore.seed_at_infinity(40.0, pvcore.SeedInf(1), refined=True)
    assert U.approximant_error("tilde", st, U.NEGATIVE_CONTROL_RAY) >= U.NON_CONVERGENCE_LEVEL


def test_report_serialisation():
    st = large_t_state()
    rep = U.approximant_report("tilde", st, U.EtaRay((0.25j, 5j), 20))
    rows = rep.to_csv().splitlines()
    assert len(rows) == 21 and rows[0].startswith("re_eta")
    summary = json.loads(rep.to_json())
    assert summary["samples"] == 20 and summary["gauge"] == "tilde"
    assert summary["max_relative_error"] == rep.error
