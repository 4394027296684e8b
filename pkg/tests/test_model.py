"""Tests for market params, vol surfaces, payoffs, and assumption probing."""

import numpy as np
import pytest

from asianvol.errors import DomainError, ValidationError
from asianvol.model import (
    CappedPowerVol,
    ConstantVol,
    MarketParams,
    PayoffSpec,
    ProbeGrid,
    TabulatedVol,
    TimeScaledVol,
    check_assumptions,
    market_from_config,
    payoff_eval,
    payoff_from_config,
    surface_from_config,
    tabulated_from_csv,
    vol_at,
)

# ---------------------------------------------------------------------------
# reference surface used throughout: a CEV-style skew, flattened outside
# a wide band so sigma stays in [0.05, 1.0] on all of (0, inf)
# ---------------------------------------------------------------------------

SKEW = CappedPowerVol(sref=0.2, xref=100.0, exponent=0.3, floor=0.05, cap=1.0)

# point values computed independently from the closed-form branch formulas
SKEW_POINTS = {
    # x: (sigma, dcoef_dx, dcoef_dxx)
    9.0: (0.41186723371160794, 0.2883070635981255, -0.009610235453270851),
    80.0: (0.21384691999823763, 0.14969284399876634, -0.0005613481649953737),
    100.0: (0.2, 0.14, -0.00042),
    150.0: (0.17709349865911123, 0.12396544906137785, -0.0002479308981227557),
    2000.0: (0.08141810630738089, 0.056992674415166616, -8.548901162274994e-06),
}


class TestMarketParams:
    def test_basic_fields_and_drift(self):
        m = MarketParams(S0=100.0, r=0.05, q=0.02)
        assert m.S0 == 100.0
        assert np.isclose(m.drift, 0.03)

    @pytest.mark.parametrize("bad", [0.0, -5.0, np.nan, np.inf])
    def test_rejects_bad_spot(self, bad):
        with pytest.raises(ValidationError):
            MarketParams(S0=bad)

    def test_rejects_non_finite_rates(self):
        with pytest.raises(ValidationError):
            MarketParams(S0=100.0, r=np.nan)


class TestCappedPowerVol:
    """The level-dependent reference surface and its analytic derivatives."""

    @pytest.mark.parametrize("x", sorted(SKEW_POINTS))
    def test_point_values(self, x):
        sig, d1, d2 = SKEW_POINTS[x]
        p = vol_at(SKEW, 0.3, x)
        assert np.isclose(p.sigma, sig, rtol=1e-13), f"sigma at {x}: {p.sigma}"
        assert np.isclose(p.dcoef_dx, d1, rtol=1e-13), f"dcoef_dx at {x}: {p.dcoef_dx}"
        assert np.isclose(p.dcoef_dxx, d2, rtol=1e-13), f"dcoef_dxx at {x}: {p.dcoef_dxx}"

    def test_clipped_regions_are_flat(self):
        # below the cap boundary (~0.468) sigma pegs at 1.0, above the floor
        # boundary (~10159) it pegs at 0.05; a flat sigma means a(x) = sigma*x
        for x, level in ((0.1, 1.0), (20000.0, 0.05)):
            p = vol_at(SKEW, 0.0, x)
            assert p.sigma == level
            assert p.dcoef_dx == level
            assert p.dcoef_dxx == 0.0

    def test_clip_boundaries(self):
        x_cap, x_floor = SKEW.clip_boundaries()
        assert np.isclose(x_cap, 0.46784283811405847)
        assert np.isclose(x_floor, 10159.366732596478)

    def test_derivatives_match_central_differences(self):
        # analytic branch formulas vs a finite-difference probe of sigma*x
        for x in (5.0, 37.0, 100.0, 611.0, 4000.0):
            h = 1e-3 * x
            a = lambda u: SKEW.sigma(0.0, u) * u
            fd1 = (a(x + h) - a(x - h)) / (2 * h)
            fd2 = (a(x + h) - 2 * a(x) + a(x - h)) / h**2
            assert np.isclose(SKEW.dcoef_dx(0.0, x), fd1, rtol=1e-6)
            assert np.isclose(SKEW.dcoef_dxx(0.0, x), fd2, rtol=1e-5, atol=1e-12)

    def test_vectorized_evaluation_matches_scalar(self):
        xs = np.array([9.0, 80.0, 100.0, 150.0, 2000.0])
        sig = SKEW.sigma(0.0, xs)
        assert sig.shape == xs.shape
        for xi, si in zip(xs, sig):
            assert si == SKEW.sigma(0.0, xi)

    def test_rejects_nonpositive_x(self):
        with pytest.raises(DomainError):
            SKEW.sigma(0.0, -1.0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            CappedPowerVol(sref=-0.2, xref=100.0, exponent=0.3, floor=0.05, cap=1.0)
        with pytest.raises(ValidationError):
            CappedPowerVol(sref=0.2, xref=100.0, exponent=0.3, floor=0.5, cap=0.1)


class TestOtherSurfaces:
    def test_constant(self):
        s = ConstantVol(0.2)
        assert s.sigma(1.3, 77.0) == 0.2
        assert s.dcoef_dx(0.0, 50.0) == 0.2
        assert s.dcoef_dxx(0.0, 50.0) == 0.0
        assert s.sigma_bounds() == (0.2, 0.2)
        assert not s.is_time_dependent and not s.is_level_dependent

    def test_time_scaled_sqrt_ramp(self):
        # sigma(t) = 0.2 + 0.05*sqrt(t)
        s = TimeScaledVol(c0=0.2, c2=0.05)
        assert np.isclose(s.sigma(0.25, 123.0), 0.225, rtol=1e-15)
        assert np.isclose(s.dcoef_dx(0.25, 9.0), 0.225, rtol=1e-15)
        assert s.dcoef_dxx(0.25, 9.0) == 0.0
        assert s.is_time_dependent and not s.is_level_dependent

    def test_time_scaled_linear_ramp(self):
        s = TimeScaledVol(c0=0.2, c1=0.05)
        assert np.isclose(s.sigma(0.5, 1.0), 0.225, rtol=1e-15)

    def test_tabulated_bilinear_interpolation(self):
        s = TabulatedVol(
            ts=[0.0, 1.0], xs=[50.0, 150.0], values=[[0.2, 0.3], [0.4, 0.5]]
        )
        # node values reproduce exactly, mid-cell is the average of corners
        assert s.sigma(0.0, 50.0) == 0.2
        assert s.sigma(1.0, 150.0) == 0.5
        assert np.isclose(s.sigma(0.5, 100.0), 0.35, rtol=1e-14)

    def test_tabulated_rejects_x_out_of_range(self):
        s = TabulatedVol(ts=[0.0, 1.0], xs=[50.0, 150.0], values=[[0.2, 0.3], [0.4, 0.5]])
        with pytest.raises(DomainError):
            s.sigma(0.5, 151.0)
        with pytest.raises(DomainError):
            s.sigma(0.5, 49.0)

    def test_tabulated_constant_extrapolation_in_t(self):
        s = TabulatedVol(ts=[0.1, 1.0], xs=[50.0, 150.0], values=[[0.2, 0.3], [0.4, 0.5]])
        assert s.sigma(5.0, 50.0) == s.sigma(1.0, 50.0) == 0.4
        assert s.sigma(0.0, 50.0) == s.sigma(0.1, 50.0) == 0.2

    def test_tabulated_from_csv(self, tmp_path):
        lines = ["t,x,sigma"]
        for t in (0.0, 1.0):
            for x in (50.0, 150.0):
                lines.append(f"{t},{x},{0.2 + 0.1 * t + 0.001 * (x - 50.0)}")
        path = tmp_path / "surf.csv"
        path.write_text("\n".join(lines) + "\n")
        s = tabulated_from_csv(path)
        assert np.isclose(s.sigma(1.0, 150.0), 0.4, rtol=1e-14)
        assert np.isclose(s.sigma(0.5, 100.0), 0.3, rtol=1e-14)

    def test_tabulated_from_csv_rejects_incomplete_grid(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x,sigma\n0.0,50.0,0.2\n0.0,150.0,0.3\n1.0,50.0,0.4\n")
        with pytest.raises(ValidationError, match="grid"):
            tabulated_from_csv(path)

    def test_tabulated_from_csv_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,x,sigma\n0.0,50.0,0.2\n")
        with pytest.raises(ValidationError, match="header"):
            tabulated_from_csv(path)

    def test_tabulated_derivatives_on_linear_data(self):
        # sigma linear in x makes bilinear interpolation exact, so the
        # finite-difference derivatives of a = sigma*x have known values:
        # a = (0.2 + 0.001*(x-100))*x, a' = 0.002*x + 0.1, a'' = 0.002
        xs = np.linspace(50.0, 150.0, 11)
        vals = np.tile(0.2 + 0.001 * (xs - 100.0), (2, 1))
        s = TabulatedVol(ts=[0.0, 1.0], xs=xs, values=vals)
        assert np.isclose(s.dcoef_dx(0.3, 90.0), 0.002 * 90.0 + 0.1, rtol=1e-10)
        assert np.isclose(s.dcoef_dxx(0.3, 90.0), 0.002, rtol=1e-6)

    def test_tabulated_validation(self):
        with pytest.raises(ValidationError):
            TabulatedVol(ts=[0.0, 1.0], xs=[100.0, 90.0], values=[[0.2, 0.3], [0.4, 0.5]])
        with pytest.raises(ValidationError):
            TabulatedVol(ts=[0.0, 1.0], xs=[90.0, 100.0], values=[[0.2, -0.3], [0.4, 0.5]])
        with pytest.raises(ValidationError):
            TabulatedVol(ts=[0.0, 1.0], xs=[90.0, 100.0], values=[[0.2, 0.3]])


# ---------------------------------------------------------------------------
# finite-difference cross-check required of every family on smooth regions
# ---------------------------------------------------------------------------

SMOOTH_PROBES = [
    (ConstantVol(0.25), 0.2, 80.0),
    (TimeScaledVol(c0=0.2, c1=0.1, c2=0.05), 0.7, 120.0),
    (SKEW, 0.1, 140.0),
    (
        TabulatedVol(
            ts=[0.0, 2.0],
            xs=np.linspace(10.0, 300.0, 30),
            values=np.tile(0.2 + 0.0003 * (np.linspace(10.0, 300.0, 30) - 100.0), (2, 1)),
        ),
        0.5,
        140.0,
    ),
]


@pytest.mark.parametrize("surface,t,x", SMOOTH_PROBES)
def test_dcoef_dx_matches_fd_everywhere(surface, t, x):
    """First derivative of sigma*x agrees with central differences to 1e-6."""
    h = 1e-5 * x
    a = lambda u: surface.sigma(t, u) * u
    fd = (a(x + h) - a(x - h)) / (2 * h)
    got = surface.dcoef_dx(t, x)
    assert np.isclose(got, fd, rtol=1e-6), f"{surface.family}: {got} vs fd {fd}"


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------

class TestPayoffs:
    def test_call_put_values(self):
        call = PayoffSpec(family="call", strike=100.0)
        put = PayoffSpec(family="put", strike=100.0)
        assert call.value(110.0) == 10.0
        assert call.value(90.0) == 0.0
        assert put.value(90.0) == 10.0
        assert put.value(110.0) == 0.0
        assert call.kinks() == (100.0,)
        assert call.holder_gamma == 1.0 and call.holder_beta == 1.0

    def test_power_call_values(self):
        p = PayoffSpec(family="power-call", strike=100.0, exponent=0.75)
        assert p.value(100.0) == 0.0
        assert np.isclose(p.value(116.0), 16.0**0.75, rtol=1e-15)
        assert p.value(50.0) == 0.0
        assert p.holder_gamma == 0.75

    def test_power_call_exponent_range(self):
        with pytest.raises(ValidationError):
            PayoffSpec(family="power-call", strike=100.0, exponent=1.5)
        with pytest.raises(ValidationError):
            PayoffSpec(family="power-call", strike=100.0, exponent=0.0)

    def test_capped_power_values(self):
        # (x-K)^{1.5} between K and K+width, frozen at width^{1.5} above
        p = PayoffSpec(family="capped-power", strike=100.0, exponent=0.5, cap_width=100.0)
        assert p.value(90.0) == 0.0
        assert np.isclose(p.value(150.0), 353.5533905932738, rtol=1e-15)
        assert p.value(200.0) == 1000.0
        assert p.value(250.0) == 1000.0
        assert p.kinks() == (100.0, 200.0)
        # Lipschitz modulus: sup of the derivative (1+eps)*z^eps at z = width
        assert np.isclose(p.holder_beta, 15.0, rtol=1e-15)
        assert p.holder_gamma == 1.0

    def test_linear_and_constant(self):
        lin = PayoffSpec(family="linear", slope=2.0, intercept=-3.0)
        assert lin.value(10.0) == 17.0
        assert lin.kinks() == ()
        const = PayoffSpec(family="constant", level=4.5)
        assert const.value(1e6) == 4.5

    def test_user_table(self):
        p = PayoffSpec(
            family="user-table", table_x=(50.0, 100.0, 150.0), table_y=(0.0, 5.0, 0.0)
        )
        assert p.value(75.0) == 2.5
        assert p.value(150.0) == 0.0
        assert p.kinks() == (100.0,)
        assert np.isclose(p.holder_beta, 0.1)
        with pytest.raises(DomainError):
            p.value(49.0)

    def test_payoff_eval_is_vectorized(self):
        call = PayoffSpec(family="call", strike=100.0)
        out = payoff_eval(call, np.array([90.0, 100.0, 130.0]))
        assert np.allclose(out, [0.0, 0.0, 30.0])

    @pytest.mark.parametrize(
        "spec",
        [
            PayoffSpec(family="call", strike=100.0),
            PayoffSpec(family="put", strike=100.0),
            PayoffSpec(family="power-call", strike=100.0, exponent=0.6),
            PayoffSpec(family="capped-power", strike=100.0, exponent=0.5, cap_width=100.0),
        ],
    )
    def test_holder_modulus_property(self, spec):
        """|phi(x)-phi(y)| <= beta*|x-y|^gamma on random pairs."""
        rng = np.random.default_rng(20260815)
        x = rng.uniform(1.0, 300.0, size=4000)
        y = rng.uniform(1.0, 300.0, size=4000)
        lhs = np.abs(spec.value(x) - spec.value(y))
        rhs = spec.holder_beta * np.abs(x - y) ** spec.holder_gamma
        bad = lhs > rhs * (1 + 1e-12)
        assert not bad.any(), f"modulus violated at {x[bad][:3]}, {y[bad][:3]}"


# ---------------------------------------------------------------------------
# assumption probing
# ---------------------------------------------------------------------------

class TestCheckAssumptions:
    def test_constant_passes(self):
        rep = check_assumptions(ConstantVol(0.2))
        assert rep.passed
        assert rep.sigma_lo == rep.sigma_hi == 0.2
        assert all(rep.conditions.values())
        assert rep.lipschitz_estimates["sigma"] == 0.0

    def test_capped_power_passes_on_moderate_domain(self):
        rep = check_assumptions(SKEW, ProbeGrid(x_lo=1.0, x_hi=400.0))
        assert rep.passed, rep.conditions
        assert rep.sigma_lo > 0.13 and rep.sigma_hi < 0.8
        assert rep.advisory is None

    def test_uncapped_power_fails_near_zero(self):
        # without a cap, sigma(x) = 0.2*(x/100)^{-0.3} blows up as x -> 0 and
        # exceeds the declared bound inside a probe domain that reaches 1e-3
        uncapped = CappedPowerVol(sref=0.2, xref=100.0, exponent=0.3, floor=0.0, cap=np.inf)
        rep = check_assumptions(uncapped, ProbeGrid(x_lo=1e-3, x_hi=200.0))
        assert not rep.passed
        assert not rep.conditions["sigma_bounded"]
        assert rep.advisory is not None and "sigma_bounded" in rep.advisory

    def test_advisory_mentions_clip_boundary_when_probed(self):
        rep = check_assumptions(SKEW, ProbeGrid(x_lo=0.1, x_hi=10.0, max_sigma=2.0))
        assert rep.advisory is not None and "one-sided" in rep.advisory

    def test_report_echoes_probe_domain(self):
        probe = ProbeGrid(t_hi=0.5, x_lo=10.0, x_hi=250.0)
        rep = check_assumptions(ConstantVol(0.3), probe)
        assert rep.probe_domain["x_lo"] == 10.0
        assert rep.probe_domain["t_hi"] == 0.5

    def test_probe_validation(self):
        with pytest.raises(ValidationError):
            ProbeGrid(x_lo=-1.0)
        with pytest.raises(ValidationError):
            ProbeGrid(t_lo=0.5, t_hi=0.5)

    @pytest.mark.parametrize(
        "surface",
        [
            ConstantVol(0.2),
            TimeScaledVol(c0=0.2, c1=0.1, c2=0.05),
            SKEW,
            TabulatedVol(
                ts=[0.0, 1.0],
                xs=[10.0, 100.0, 400.0],
                values=[[0.2, 0.25, 0.3], [0.3, 0.35, 0.4]],
            ),
        ],
    )
    def test_reported_bounds_hold_at_finer_resolution(self, surface):
        """Sigma values on a 10x finer grid stay inside the reported range."""
        probe = ProbeGrid(x_lo=10.0, x_hi=400.0, nt=11, nx=41)
        rep = check_assumptions(surface, probe)
        ts = np.linspace(probe.t_lo, probe.t_hi, 10 * probe.nt)
        xs = np.linspace(probe.x_lo, probe.x_hi, 10 * probe.nx)
        pad = 1e-12
        for t in ts:
            sig = np.asarray(surface.sigma(t, xs))
            assert sig.min() >= rep.sigma_lo - pad, f"{surface.family} below range"
            assert sig.max() <= rep.sigma_hi + pad, f"{surface.family} above range"


# ---------------------------------------------------------------------------
# config factories
# ---------------------------------------------------------------------------

class TestConfigFactories:
    def test_market_round_trip(self):
        m = market_from_config({"S0": 100.0, "r": 0.05})
        assert m.q == 0.0
        assert market_from_config(m.to_config()) == m

    def test_market_unknown_key_is_named(self):
        with pytest.raises(ValidationError, match="spot"):
            market_from_config({"S0": 100.0, "spot": 1.0})

    @pytest.mark.parametrize(
        "cfg",
        [
            {"family": "constant", "sigma": 0.2},
            {"family": "time-scaled", "c0": 0.2, "c2": 0.05},
            {
                "family": "capped-power",
                "sref": 0.2,
                "xref": 100.0,
                "exponent": 0.3,
                "floor": 0.05,
                "cap": 1.0,
            },
            {
                "family": "tabulated-grid",
                "ts": [0.0, 1.0],
                "xs": [50.0, 150.0],
                "values": [[0.2, 0.3], [0.4, 0.5]],
            },
        ],
    )
    def test_surface_round_trip(self, cfg):
        s = surface_from_config(cfg)
        assert surface_from_config(s.to_config()).to_config() == s.to_config()

    def test_surface_unknown_family(self):
        with pytest.raises(ValidationError, match="heston"):
            surface_from_config({"family": "heston"})

    def test_surface_unknown_key_is_named(self):
        with pytest.raises(ValidationError, match="smile"):
            surface_from_config({"family": "constant", "sigma": 0.2, "smile": 1})

    @pytest.mark.parametrize(
        "cfg",
        [
            {"family": "call", "strike": 100.0},
            {"family": "put", "strike": 90.0},
            {"family": "power-call", "strike": 100.0, "exponent": 0.75},
            {"family": "capped-power", "strike": 100.0, "exponent": 0.5, "cap_width": 100.0},
            {"family": "linear", "slope": 1.0, "intercept": 0.0},
            {"family": "constant", "level": 2.0},
            {"family": "user-table", "table_x": [50.0, 150.0], "table_y": [0.0, 1.0]},
        ],
    )
    def test_payoff_round_trip(self, cfg):
        p = payoff_from_config(cfg)
        assert payoff_from_config(p.to_config()).to_config() == p.to_config()

    def test_payoff_missing_key(self):
        with pytest.raises(ValidationError, match="strike"):
            payoff_from_config({"family": "call"})
