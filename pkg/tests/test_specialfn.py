import math

import numpy as np
import pytest

from pv5 import specialfn as sf
from pv5.errors import BranchError, OriginSingularityError, PoleError
from pv5.specialfn import SectorArg

from conftest import cpx


def rel(a, b):
    return abs(a - b) / abs(b)


# ------------------------------------------------------------------ SectorArg


def test_sector_arg_rejects_mismatched_argument():
    with pytest.raises(BranchError):
        SectorArg(1j, 0.0)


def test_sector_arg_power_follows_sheet():
    z = SectorArg.polar(4.0, 2 * math.pi)
    assert z.power(0.5) == pytest.approx(-2.0)
    assert SectorArg.principal(4.0).power(0.5) == pytest.approx(2.0)


def test_sector_arg_rotate_and_log():
    z = SectorArg.polar(2.0, 0.3).rotate(2)
    assert z.branch_arg == pytest.approx(0.3 + 2 * math.pi)
    assert z.log() == pytest.approx(complex(math.log(2), 0.3 + 2 * math.pi))


# ---------------------------------------------------------------------- Gamma


def test_gamma_trivial_values():
    assert sf.gamma(1) == pytest.approx(1.0, rel=1e-15)
    assert sf.gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("z", [0, -1, -7])
def test_gamma_poles(z):
    with pytest.raises(PoleError):
        sf.gamma(z)
    assert sf.rgamma(z) == 0


def test_gamma_oracle_grid(frozen):
    worst = max(rel(sf.gamma(cpx(r["z"])), cpx(r["value"])) for r in frozen["gamma"])
    assert worst <= 1e-10


# ------------------------------------------------------------------- Whittaker


def test_whittaker_m_degenerate_closed_form():
    assert sf.whittaker_M(0.5, 0, 2.0) == pytest.approx(math.sqrt(2) * math.exp(-1), rel=1e-14)


def test_whittaker_m_at_origin():
    assert sf.whittaker_M(0.5, 0, 0.0) == 0


def test_whittaker_m_pole_parameter():
    with pytest.raises(PoleError):
        sf.whittaker_M(0.5, -1.0, 1.0)


def test_whittaker_w_degenerate_closed_form():
    assert sf.whittaker_W(0.5, 0, 3.0) == pytest.approx(math.sqrt(3) * math.exp(-1.5), rel=1e-13)
    assert sf.whittaker_W(0.5, 0, 50.0) == pytest.approx(math.exp(-25) * math.sqrt(50), rel=1e-8)


def test_whittaker_w_origin_and_branch_limits():
    with pytest.raises(OriginSingularityError):
        sf.whittaker_W(0.5, 0.1, 0.0)
    with pytest.raises(BranchError):
        sf.whittaker_W(0.5, 0.1, SectorArg.polar(1.0, 1.6 * math.pi))


def test_whittaker_oracle_grid(frozen):
    wm = ww = 0.0
    for r in frozen["whittaker"]:
        z = SectorArg.polar(r["r"], r["arg"])
        wm = max(wm, rel(sf.whittaker_M(r["kappa"], cpx(r["mu"]), z), cpx(r["M"])))
        if "W" in r:
            ww = max(ww, rel(sf.whittaker_W(r["kappa"], cpx(r["mu"]), z), cpx(r["W"])))
    assert wm <= 1e-10
    assert ww <= 1e-10


@pytest.mark.parametrize("mu", [0.28055j, 0.3 + 0.2j])
def test_whittaker_wronskian_constant(mu):
    expected = sf.whittaker_wronskian(0.5, mu)
    for r, th in [(0.3, 0.2), (2.0, 1.5), (7.0, -2.0), (25.0, 0.5 * math.pi), (45.0, 0.1)]:
        z = SectorArg.polar(r, th)
        m, mp_ = sf.whittaker_M(0.5, mu, z, deriv=True)
        w, wp = sf.whittaker_W(0.5, mu, z, deriv=True)
        assert abs((m * wp - mp_ * w) - expected) <= 1e-8 * abs(expected)


def test_whittaker_wronskian_relative_to_cancellation():
    rng = np.random.default_rng(3)
    worst = 0.0
    for kappa, mu in [(0.25, 0.1), (0.5, 0.28055j), (0.5, 0.3 + 0.2j)]:
        expected = sf.whittaker_wronskian(kappa, mu)
        for r, a in zip(rng.uniform(0.5, 45, 30), rng.uniform(-1.45 * math.pi, 1.45 * math.pi, 30)):
            z = SectorArg.polar(r, a)
            m, mp_ = sf.whittaker_M(kappa, mu, z, deriv=True)
            w, wp = sf.whittaker_W(kappa, mu, z, deriv=True)
            scale = max(abs(expected), abs(m * wp) + abs(mp_ * w))
            worst = max(worst, abs(m * wp - mp_ * w - expected) / scale)
    assert worst <= 1e-13


def test_whittaker_wronskian_degenerate_pair():
    # kappa = 1/2, mu = 0: M and W coincide, so the Wronskian vanishes
    assert sf.whittaker_wronskian(0.5, 0) == 0
    z = SectorArg.polar(3.0, 0.4)
    assert sf.whittaker_M(0.5, 0, z) == pytest.approx(sf.whittaker_W(0.5, 0, z), rel=1e-12)


# ---------------------------------------------------------------------- Bessel


def test_bessel_reference_values(frozen):
    c = frozen["constants"]
    assert sf.bessel_K1(1.0) == pytest.approx(c["K1(1)"], rel=1e-14)
    assert sf.bessel_I1(1.0) == pytest.approx(c["I1(1)"], rel=1e-14)
    assert sf.bessel_I1(0.0) == 0


def test_bessel_k1_origin():
    with pytest.raises(OriginSingularityError):
        sf.bessel_K1(0.0)


def test_bessel_oracle_grid(frozen):
    wk = wi = 0.0
    for r in frozen["bessel"]:
        z = SectorArg.polar(r["r"], r["arg"])
        wk = max(wk, rel(sf.bessel_K1(z), cpx(r["K1"])))
        wi = max(wi, rel(sf.bessel_I1(z), cpx(r["I1"])))
    assert wk <= 1e-10
    assert wi <= 1e-10


def bessel_grid(n=100, rmin=0.5, rmax=10.0, amax=2.5 * math.pi):
    rng = np.random.default_rng(7)
    return [SectorArg.polar(r, a) for r, a in zip(rng.uniform(rmin, rmax, n), rng.uniform(-amax, amax, n))]


def wronskian_residual(z):
    """(|z W(K1, I1) - 1|, size of the products that cancel)."""
    k, kp = sf.bessel_K1(z, deriv=True)
    i, ip = sf.bessel_I1(z, deriv=True)
    scale = abs(z.value) * (abs(k * ip) + abs(kp * i))
    return abs(z.value * (k * ip - kp * i) - 1), scale


def test_bessel_wronskian_grid():
    worst = max(wronskian_residual(z)[0] for z in bessel_grid(rmax=5.0))
    assert worst <= 1e-10


def test_bessel_wronskian_relative_to_cancellation():
    # beyond |z| ~ 7 on the left half plane the two products reach e^{2|z|}
    worst = 0.0
    for z in bessel_grid():
        r, scale = wronskian_residual(z)
        worst = max(worst, r / max(1.0, scale))
    assert worst <= 1e-14


def test_continuation_principal_agrees():
    k, i = sf.bessel_continuation(SectorArg(1.0, 0.0))
    assert k == pytest.approx(sf.bessel_K1(1.0), rel=1e-10)
    assert i == pytest.approx(sf.bessel_I1(1.0), rel=1e-10)


def test_continuation_identities_grid():
    """Recursive continuation identities versus the rotation-formula route."""
    worst = 0.0
    for z in bessel_grid():
        k, i = sf.bessel_continuation(z)
        worst = max(worst, rel(k, sf.bessel_K1(z)), rel(i, sf.bessel_I1(z)))
    assert worst <= 1e-8


def test_sector_form_three_halves_pi_converges():
    errs = []
    for r in (20.0, 40.0):
        z = SectorArg.polar(r, 1.5 * math.pi)
        k_lead, i_lead = sf.bessel_sector_leading(z, "3pi/2")
        errs.append(max(rel(k_lead, sf.bessel_K1(z)), rel(i_lead, sf.bessel_I1(z))))
    assert errs[1] < errs[0] < 0.05


@pytest.mark.parametrize("sector,arg", [("pi/2", 0.5 * math.pi), ("-pi/2", -0.5 * math.pi)])
def test_sector_forms_on_imaginary_axis(sector, arg):
    errs = []
    for r in (30.0, 60.0, 120.0):
        z = SectorArg.polar(r, arg)
        k_lead, i_lead = sf.bessel_sector_leading(z, sector)
        # I_1 oscillates here (zeros of J_1), so measure against its envelope
        envelope = 2 / math.sqrt(2 * math.pi * r)
        e = abs(i_lead - sf.bessel_I1(z)) / envelope
        if sector == "pi/2":
            e = max(e, rel(k_lead, sf.bessel_K1(z)))
        errs.append(e * r)
    # relative error of a leading term is O(1/|z|)
    assert max(errs) < 1.0


def test_branch_limit():
    with pytest.raises(BranchError):
        sf.bessel_K1(SectorArg.polar(1.0, 2.6 * math.pi))
