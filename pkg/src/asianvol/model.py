"""Market data, local volatility surfaces, and payoff definitions.

The diffusion being modelled everywhere in this package is

    dS_t = (r - q) S_t dt + sigma(t, S_t) S_t dW_t,   S_0 > 0,

with ``sigma`` a deterministic local-volatility function.  Besides the
value of ``sigma`` itself, the pricing and sensitivity code repeatedly
needs the first and second x-derivatives of the *diffusion coefficient*

    a(t, x) = sigma(t, x) * x,

so every surface exposes those too (``dcoef_dx``, ``dcoef_dxx``),
analytically where the family permits and by central differences for
tabulated data.

Four surface families are supported:

* ``constant``       -- flat sigma,
* ``time-scaled``    -- sigma(t) = c0 + c1*t + c2*sqrt(t), no level dependence,
* ``capped-power``   -- sigma(x) = clip(sref*(x/xref)^(-exponent), floor, cap),
* ``tabulated-grid`` -- bilinear interpolation on a rectangular (t, x) grid.

Payoffs are plain functions of the average (or terminal) level; the
supported families carry their strike-type parameters, their kink
locations, and a Holder modulus ``|phi(x) - phi(y)| <= beta |x - y|^gamma``
that downstream error estimates rely on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "MarketParams",
    "VolPoint",
    "LocalVolSurface",
    "ConstantVol",
    "TimeScaledVol",
    "CappedPowerVol",
    "TabulatedVol",
    "PayoffSpec",
    "ProbeGrid",
    "AssumptionReport",
    "vol_at",
    "payoff_eval",
    "check_assumptions",
    "market_from_config",
    "surface_from_config",
    "payoff_from_config",
    "tabulated_from_csv",
]


# ---------------------------------------------------------------------------
# market parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarketParams:
    """Spot and carry parameters: S0 > 0, risk-free rate r, dividend yield q."""

    S0: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.S0) and self.S0 > 0.0):
            raise ValidationError(f"S0 must be finite and positive, got {self.S0}")
        if not (np.isfinite(self.r) and np.isfinite(self.q)):
            raise ValidationError(f"rates must be finite, got r={self.r}, q={self.q}")

    @property
    def drift(self) -> float:
        return self.r - self.q

    def to_config(self) -> dict:
        return {"S0": self.S0, "r": self.r, "q": self.q}


# ---------------------------------------------------------------------------
# local volatility surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VolPoint:
    """Surface values at one (t, x): sigma and derivatives of a(t,x)=sigma*x."""

    sigma: float
    dcoef_dx: float
    dcoef_dxx: float


def _broadcast(t, x):
    """Broadcast (t, x) to a common float shape; remember if both were scalars."""
    ta = np.asarray(t, dtype=float)
    xa = np.asarray(x, dtype=float)
    scalar = ta.ndim == 0 and xa.ndim == 0
    tb, xb = np.broadcast_arrays(ta, xa)
    return tb, xb, scalar


def _ret(val, scalar):
    return float(val) if scalar else val


class LocalVolSurface:
    """Base class: vectorized sigma plus diffusion-coefficient derivatives.

    ``sigma``, ``dcoef_dx`` and ``dcoef_dxx`` accept scalars or arrays for
    both arguments and broadcast them; scalar-in gives scalar-out.
    """

    family: str = "abstract"

    # subclasses must implement _sigma on broadcast float arrays
    def _sigma(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sigma(self, t, x):
        tb, xb, scalar = _broadcast(t, x)
        self._check_domain(tb, xb)
        return _ret(self._sigma(tb, xb), scalar)

    def dcoef_dx(self, t, x):
        tb, xb, scalar = _broadcast(t, x)
        self._check_domain(tb, xb)
        return _ret(self._dcoef_dx(tb, xb), scalar)

    def dcoef_dxx(self, t, x):
        tb, xb, scalar = _broadcast(t, x)
        self._check_domain(tb, xb)
        return _ret(self._dcoef_dxx(tb, xb), scalar)

    # default derivative implementation: central differences on a = sigma*x
    _fd_step: Optional[float] = None

    def _step(self, x: np.ndarray) -> np.ndarray:
        if self._fd_step is not None:
            return np.full_like(x, self._fd_step)
        return np.maximum(1e-5 * np.abs(x), 1e-8)

    def _coef(self, t, x):
        return self._sigma(t, x) * x

    def _dcoef_dx(self, t, x):
        h = self._step(x)
        xc = self._center_for_stencil(x, h)
        return (self._coef(t, xc + h) - self._coef(t, xc - h)) / (2.0 * h)

    def _dcoef_dxx(self, t, x):
        h = self._step(x)
        xc = self._center_for_stencil(x, h)
        return (
            self._coef(t, xc + h) - 2.0 * self._coef(t, xc) + self._coef(t, xc - h)
        ) / (h * h)

    def _center_for_stencil(self, x, h):
        """Hook for bounded-domain surfaces to keep the stencil inside."""
        return x

    def _check_domain(self, t, x) -> None:
        if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
            raise DomainError("surface evaluated at non-positive or non-finite x")
        if np.any(t < 0.0) or not np.all(np.isfinite(t)):
            raise DomainError("surface evaluated at negative or non-finite t")

    # metadata ------------------------------------------------------------

    @property
    def is_time_dependent(self) -> bool:
        return False

    @property
    def is_level_dependent(self) -> bool:
        return False

    def sigma_bounds(self) -> Optional[tuple]:
        """Analytic (lo, hi) bounds over the whole domain, if known."""
        return None

    def to_config(self) -> dict:
        raise NotImplementedError


class ConstantVol(LocalVolSurface):
    """Flat Black-Scholes volatility.

    sigma = 0 is admitted for degenerate deterministic dynamics; the
    assumption probe reports it as failing the positivity condition.
    """

    family = "constant"

    def __init__(self, sigma: float):
        if not (np.isfinite(sigma) and sigma >= 0.0):
            raise ValidationError(f"constant vol must be nonnegative, got {sigma}")
        self.level = float(sigma)

    def _sigma(self, t, x):
        return np.full_like(x, self.level)

    def _dcoef_dx(self, t, x):
        return np.full_like(x, self.level)

    def _dcoef_dxx(self, t, x):
        return np.zeros_like(x)

    def sigma_bounds(self):
        return (self.level, self.level)

    def to_config(self):
        return {"family": "constant", "sigma": self.level}


class TimeScaledVol(LocalVolSurface):
    """Purely time-dependent vol sigma(t) = c0 + c1*t + c2*sqrt(t).

    Covers linear ramps and square-root ramps (and mixtures).  No level
    dependence, so the diffusion coefficient is linear in x.
    """

    family = "time-scaled"

    def __init__(self, c0: float, c1: float = 0.0, c2: float = 0.0):
        for name, c in (("c0", c0), ("c1", c1), ("c2", c2)):
            if not np.isfinite(c):
                raise ValidationError(f"coefficient {name} must be finite, got {c}")
        self.c0, self.c1, self.c2 = float(c0), float(c1), float(c2)

    def _sigma(self, t, x):
        return np.broadcast_to(
            self.c0 + self.c1 * t + self.c2 * np.sqrt(t), x.shape
        ).copy()

    def _dcoef_dx(self, t, x):
        return self._sigma(t, x)

    def _dcoef_dxx(self, t, x):
        return np.zeros_like(x)

    @property
    def is_time_dependent(self):
        return True

    def to_config(self):
        return {"family": "time-scaled", "c0": self.c0, "c1": self.c1, "c2": self.c2}


class CappedPowerVol(LocalVolSurface):
    """Level-dependent vol sigma(x) = clip(sref*(x/xref)^(-exponent), floor, cap).

    A CEV-style skew flattened outside [x_cap_hi_boundary, x_floor_boundary]
    so that sigma stays bounded above and away from zero on all of (0, inf).
    Derivatives of a(x) = sigma(x)*x are analytic on each branch:

        power branch:  a'(x) = (1-exponent)*sigma(x),
                       a''(x) = -exponent*(1-exponent)*sigma(x)/x,
        clipped branch: a'(x) = clipped level, a''(x) = 0.
    """

    family = "capped-power"

    def __init__(
        self,
        sref: float,
        xref: float,
        exponent: float,
        floor: float,
        cap: float,
    ):
        if not (np.isfinite(sref) and sref > 0.0):
            raise ValidationError(f"sref must be positive, got {sref}")
        if not (np.isfinite(xref) and xref > 0.0):
            raise ValidationError(f"xref must be positive, got {xref}")
        if not np.isfinite(exponent):
            raise ValidationError(f"exponent must be finite, got {exponent}")
        if not (0.0 <= floor <= cap):
            raise ValidationError(
                f"need 0 <= floor <= cap, got floor={floor}, cap={cap}"
            )
        self.sref = float(sref)
        self.xref = float(xref)
        self.exponent = float(exponent)
        self.floor = float(floor)
        self.cap = float(cap)

    def _raw(self, x):
        return self.sref * (x / self.xref) ** (-self.exponent)

    def _sigma(self, t, x):
        return np.clip(self._raw(x), self.floor, self.cap)

    def _dcoef_dx(self, t, x):
        raw = self._raw(x)
        sig = np.clip(raw, self.floor, self.cap)
        on_power = (raw > self.floor) & (raw < self.cap)
        return np.where(on_power, (1.0 - self.exponent) * sig, sig)

    def _dcoef_dxx(self, t, x):
        raw = self._raw(x)
        sig = np.clip(raw, self.floor, self.cap)
        on_power = (raw > self.floor) & (raw < self.cap)
        b = self.exponent
        return np.where(on_power, -b * (1.0 - b) * sig / x, 0.0)

    @property
    def is_level_dependent(self):
        return True

    def clip_boundaries(self) -> tuple:
        """x-locations where the raw power law meets (cap, floor)."""
        if self.exponent == 0.0:
            return (np.nan, np.nan)
        x_cap = self.xref * (self.cap / self.sref) ** (-1.0 / self.exponent)
        x_floor = self.xref * (self.floor / self.sref) ** (-1.0 / self.exponent) \
            if self.floor > 0.0 else np.inf
        return (x_cap, x_floor)

    def sigma_bounds(self):
        if self.floor > 0.0 and np.isfinite(self.cap):
            return (self.floor, self.cap)
        return None

    def to_config(self):
        return {
            "family": "capped-power",
            "sref": self.sref,
            "xref": self.xref,
            "exponent": self.exponent,
            "floor": self.floor,
            "cap": self.cap,
        }


class TabulatedVol(LocalVolSurface):
    """Bilinear interpolation of sigma on a rectangular (t, x) grid.

    Evaluation at x outside the grid raises :class:`DomainError`; in t the
    surface extrapolates as a constant beyond the first/last time node.
    Derivatives use central differences with step = (smallest x spacing)/10,
    shifting the stencil inward near the grid edges.
    """

    family = "tabulated-grid"

    def __init__(self, ts: Sequence[float], xs: Sequence[float], values):
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        vals = np.asarray(values, dtype=float)
        if ts.ndim != 1 or xs.ndim != 1 or len(ts) < 2 or len(xs) < 2:
            raise ValidationError("tabulated grid needs 1-D ts and xs of length >= 2")
        if np.any(np.diff(ts) <= 0.0) or np.any(np.diff(xs) <= 0.0):
            raise ValidationError("tabulated grid axes must be strictly increasing")
        if vals.shape != (len(ts), len(xs)):
            raise ValidationError(
                f"values shape {vals.shape} does not match grid "
                f"({len(ts)}, {len(xs)})"
            )
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ValidationError("tabulated sigma values must be finite and positive")
        self.ts, self.xs, self.values = ts, xs, vals
        self._fd_step = float(np.min(np.diff(xs))) / 10.0

    def _locate(self, grid, v):
        idx = np.clip(np.searchsorted(grid, v, side="right") - 1, 0, len(grid) - 2)
        lo = grid[idx]
        w = (v - lo) / (grid[idx + 1] - lo)
        return idx, w

    def _sigma(self, t, x):
        if np.any(x < self.xs[0]) or np.any(x > self.xs[-1]):
            raise DomainError(
                f"x outside tabulated range [{self.xs[0]}, {self.xs[-1]}]"
            )
        t = np.clip(t, self.ts[0], self.ts[-1])  # constant extrapolation in t
        it, wt = self._locate(self.ts, t)
        ix, wx = self._locate(self.xs, x)
        v00 = self.values[it, ix]
        v01 = self.values[it, ix + 1]
        v10 = self.values[it + 1, ix]
        v11 = self.values[it + 1, ix + 1]
        return (
            v00 * (1 - wt) * (1 - wx)
            + v01 * (1 - wt) * wx
            + v10 * wt * (1 - wx)
            + v11 * wt * wx
        )

    def _center_for_stencil(self, x, h):
        return np.clip(x, self.xs[0] + h, self.xs[-1] - h)

    def _check_domain(self, t, x) -> None:
        # range checks happen inside _sigma with grid-specific messages
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise DomainError("surface evaluated at non-finite (t, x)")

    @property
    def is_time_dependent(self):
        return True

    @property
    def is_level_dependent(self):
        return True

    def sigma_bounds(self):
        # bilinear interpolation cannot leave the hull of the node values
        return (float(self.values.min()), float(self.values.max()))

    def to_config(self):
        return {
            "family": "tabulated-grid",
            "ts": self.ts.tolist(),
            "xs": self.xs.tolist(),
            "values": self.values.tolist(),
        }


def vol_at(surface: LocalVolSurface, t: float, x: float) -> VolPoint:
    """Point evaluation of sigma and the diffusion-coefficient derivatives."""
    return VolPoint(
        sigma=surface.sigma(t, x),
        dcoef_dx=surface.dcoef_dx(t, x),
        dcoef_dxx=surface.dcoef_dxx(t, x),
    )


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PayoffSpec:
    """A payoff function of the averaged (or terminal) level.

    Families and their parameters:

    * ``call`` / ``put``    : strike
    * ``power-call``        : strike, exponent in (0, 1]: (x - K)_+^exponent
    * ``capped-power``      : strike, exponent eps in [0, 1), cap_width d > 0:
                              (x - K)^(1+eps) on [K, K+d), d^(1+eps) above
    * ``linear``            : slope, intercept: slope*x + intercept
    * ``constant``          : level
    * ``user-table``        : table of (x, value) pairs, piecewise linear,
                              no extrapolation

    ``holder_gamma`` / ``holder_beta`` give a modulus of continuity
    |phi(x)-phi(y)| <= beta*|x-y|^gamma valid on the payoff's domain
    (for capped-power and user-table: a Lipschitz bound).
    """

    family: str
    strike: float = 0.0
    exponent: float = 1.0
    cap_width: float = 0.0
    slope: float = 1.0
    intercept: float = 0.0
    level: float = 0.0
    table_x: Optional[tuple] = None
    table_y: Optional[tuple] = None

    def __post_init__(self) -> None:
        fam = self.family
        if fam in ("call", "put"):
            if not (np.isfinite(self.strike) and self.strike > 0.0):
                raise ValidationError(f"{fam} strike must be positive, got {self.strike}")
        elif fam == "power-call":
            if not (np.isfinite(self.strike) and self.strike > 0.0):
                raise ValidationError(f"power-call strike must be positive, got {self.strike}")
            if not (0.0 < self.exponent <= 1.0):
                raise ValidationError(
                    f"power-call exponent must be in (0, 1], got {self.exponent}"
                )
        elif fam == "capped-power":
            if not (np.isfinite(self.strike) and self.strike > 0.0):
                raise ValidationError(f"capped-power strike must be positive, got {self.strike}")
            if not (0.0 <= self.exponent < 1.0):
                raise ValidationError(
                    f"capped-power exponent (the eps in 1+eps) must be in [0, 1), "
                    f"got {self.exponent}"
                )
            if not (np.isfinite(self.cap_width) and self.cap_width > 0.0):
                raise ValidationError(
                    f"capped-power cap_width must be positive, got {self.cap_width}"
                )
        elif fam == "linear":
            if not (np.isfinite(self.slope) and np.isfinite(self.intercept)):
                raise ValidationError("linear payoff needs finite slope and intercept")
        elif fam == "constant":
            if not np.isfinite(self.level):
                raise ValidationError(f"constant payoff level must be finite, got {self.level}")
        elif fam == "user-table":
            if self.table_x is None or self.table_y is None:
                raise ValidationError("user-table payoff needs table_x and table_y")
            tx = np.asarray(self.table_x, dtype=float)
            ty = np.asarray(self.table_y, dtype=float)
            if tx.ndim != 1 or tx.shape != ty.shape or len(tx) < 2:
                raise ValidationError("user-table needs matching 1-D x and y, length >= 2")
            if np.any(np.diff(tx) <= 0.0):
                raise ValidationError("user-table x values must be strictly increasing")
            if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(ty))):
                raise ValidationError("user-table entries must be finite")
        else:
            raise ValidationError(f"unknown payoff family '{fam}'")

    # evaluation ----------------------------------------------------------

    def value(self, x):
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        fam = self.family
        if fam == "call":
            out = np.maximum(xa - self.strike, 0.0)
        elif fam == "put":
            out = np.maximum(self.strike - xa, 0.0)
        elif fam == "power-call":
            out = np.maximum(xa - self.strike, 0.0) ** self.exponent
        elif fam == "capped-power":
            e = 1.0 + self.exponent
            z = np.clip(xa - self.strike, 0.0, self.cap_width)
            out = z**e
        elif fam == "linear":
            out = self.slope * xa + self.intercept
        elif fam == "constant":
            out = np.full_like(xa, self.level)
        else:  # user-table
            tx = np.asarray(self.table_x)
            ty = np.asarray(self.table_y)
            if np.any(xa < tx[0]) or np.any(xa > tx[-1]):
                raise DomainError(
                    f"user-table payoff evaluated outside [{tx[0]}, {tx[-1]}]"
                )
            out = np.interp(xa, tx, ty)
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return self.value(x)

    # structure -----------------------------------------------------------

    def kinks(self) -> tuple:
        """x-locations where the payoff or its derivative is discontinuous."""
        fam = self.family
        if fam in ("call", "put", "power-call"):
            return (self.strike,)
        if fam == "capped-power":
            return (self.strike, self.strike + self.cap_width)
        if fam == "user-table":
            return tuple(float(v) for v in self.table_x[1:-1])
        return ()

    @property
    def holder_gamma(self) -> float:
        if self.family == "power-call":
            return self.exponent
        return 1.0

    @property
    def holder_beta(self) -> float:
        fam = self.family
        if fam in ("call", "put", "power-call"):
            return 1.0
        if fam == "capped-power":
            return (1.0 + self.exponent) * self.cap_width**self.exponent
        if fam == "linear":
            return max(abs(self.slope), 1e-300)
        if fam == "constant":
            return 1.0  # any positive constant works for a flat payoff
        slopes = np.abs(np.diff(self.table_y) / np.diff(self.table_x))
        return float(max(slopes.max(), 1e-300))

    @property
    def grows_superlinearly(self) -> bool:
        return False  # every supported family is at most linear at infinity

    def to_config(self) -> dict:
        fam = self.family
        if fam in ("call", "put"):
            return {"family": fam, "strike": self.strike}
        if fam == "power-call":
            return {"family": fam, "strike": self.strike, "exponent": self.exponent}
        if fam == "capped-power":
            return {
                "family": fam,
                "strike": self.strike,
                "exponent": self.exponent,
                "cap_width": self.cap_width,
            }
        if fam == "linear":
            return {"family": fam, "slope": self.slope, "intercept": self.intercept}
        if fam == "constant":
            return {"family": fam, "level": self.level}
        return {
            "family": fam,
            "table_x": list(self.table_x),
            "table_y": list(self.table_y),
        }


def payoff_eval(spec: PayoffSpec, x):
    """Exact payoff evaluation (vectorized); no approximation anywhere."""
    return spec.value(x)


# ---------------------------------------------------------------------------
# assumption checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeGrid:
    """Rectangle and resolution on which surface assumptions are probed.

    ``max_sigma`` and ``max_lipschitz`` are the declared margins: a surface
    whose probed sigma range or difference quotients exceed them fails the
    corresponding condition even when the values are finite.
    """

    t_lo: float = 0.0
    t_hi: float = 1.0
    x_lo: float = 1.0
    x_hi: float = 400.0
    nt: int = 21
    nx: int = 201
    min_sigma: float = 1e-8
    max_sigma: float = 5.0
    max_lipschitz: float = 100.0

    def __post_init__(self):
        if not (self.t_hi > self.t_lo >= 0.0):
            raise ValidationError("probe needs t_hi > t_lo >= 0")
        if not (self.x_hi > self.x_lo > 0.0):
            raise ValidationError("probe needs x_hi > x_lo > 0")
        if self.nt < 2 or self.nx < 3:
            raise ValidationError("probe needs nt >= 2 and nx >= 3")


@dataclass(frozen=True)
class AssumptionReport:
    """Result of probing a surface for the regularity the expansions assume."""

    sigma_lo: float
    sigma_hi: float
    lipschitz_estimates: dict
    probe_domain: dict
    conditions: dict
    passed: bool
    advisory: Optional[str] = None


def check_assumptions(
    surface: LocalVolSurface, probe: Optional[ProbeGrid] = None
) -> AssumptionReport:
    """Probe sigma's bounds and smoothness on a grid.

    Estimates the sigma range and the worst x-difference quotients of
    sigma, of the diffusion coefficient a = sigma*x, and of its first and
    second derivatives.  ``passed`` is True only if sigma stays within
    [min_sigma, max_sigma] on the probe grid and every quotient is finite
    and below ``max_lipschitz``.
    """
    probe = probe or ProbeGrid()
    ts = np.linspace(probe.t_lo, probe.t_hi, probe.nt)
    xs = np.linspace(probe.x_lo, probe.x_hi, probe.nx)

    sig_lo, sig_hi = np.inf, -np.inf
    quotients = {"sigma": 0.0, "coef": 0.0, "dcoef_dx": 0.0, "dcoef_dxx": 0.0}
    ok = True
    for t in ts:
        sig = np.asarray(surface.sigma(t, xs))
        if not np.all(np.isfinite(sig)):
            ok = False
            continue
        sig_lo = min(sig_lo, float(sig.min()))
        sig_hi = max(sig_hi, float(sig.max()))
        rows = {
            "sigma": sig,
            "coef": sig * xs,
            "dcoef_dx": np.asarray(surface.dcoef_dx(t, xs)),
            "dcoef_dxx": np.asarray(surface.dcoef_dxx(t, xs)),
        }
        dx = np.diff(xs)
        for key, row in rows.items():
            if not np.all(np.isfinite(row)):
                ok = False
                quotients[key] = np.inf
                continue
            quotients[key] = max(quotients[key], float(np.max(np.abs(np.diff(row)) / dx)))

    conditions = {
        "sigma_positive": bool(ok and sig_lo >= probe.min_sigma),
        "sigma_bounded": bool(ok and sig_hi <= probe.max_sigma),
        "all_finite": bool(ok and np.isfinite(sig_lo) and np.isfinite(sig_hi)),
        "lipschitz_bounded": bool(
            ok and all(np.isfinite(v) and v <= probe.max_lipschitz for v in quotients.values())
        ),
    }
    passed = all(conditions.values())

    advisory = None
    if isinstance(surface, CappedPowerVol):
        x_cap, x_floor = surface.clip_boundaries()
        hits = [
            b
            for b in (x_cap, x_floor)
            if np.isfinite(b) and probe.x_lo <= b <= probe.x_hi
        ]
        if hits:
            advisory = (
                "sigma reaches its floor/cap inside the probe domain at x = "
                + ", ".join(f"{b:.6g}" for b in hits)
                + "; derivatives are one-sided there"
            )
    if not passed:
        failing = sorted(k for k, v in conditions.items() if not v)
        note = "failed: " + ", ".join(failing)
        advisory = note if advisory is None else advisory + "; " + note

    return AssumptionReport(
        sigma_lo=float(sig_lo),
        sigma_hi=float(sig_hi),
        lipschitz_estimates=quotients,
        probe_domain=dataclasses.asdict(probe),
        conditions=conditions,
        passed=passed,
        advisory=advisory,
    )


# ---------------------------------------------------------------------------
# config factories (used by the CLI, handy in tests)
# ---------------------------------------------------------------------------

def _take(cfg: dict, what: str, required: tuple, optional: dict) -> dict:
    """Pull exactly the allowed keys out of a config mapping."""
    cfg = dict(cfg)
    out = {}
    for key in required:
        if key not in cfg:
            raise ValidationError(f"{what}: missing required key '{key}'")
        out[key] = cfg.pop(key)
    for key, default in optional.items():
        out[key] = cfg.pop(key, default)
    if cfg:
        raise ValidationError(f"{what}: unknown key '{sorted(cfg)[0]}'")
    return out


def market_from_config(cfg: dict) -> MarketParams:
    kw = _take(cfg, "market", ("S0",), {"r": 0.0, "q": 0.0})
    return MarketParams(**kw)


def tabulated_from_csv(path) -> TabulatedVol:
    """Load a tabulated surface from a CSV file with header ``t,x,sigma``.

    Rows may come in any order but must cover a complete rectangular grid.
    """
    raw = np.genfromtxt(path, delimiter=",", names=True)
    names = raw.dtype.names
    if names is None or tuple(names) != ("t", "x", "sigma"):
        raise ValidationError(
            f"surface CSV must have header 't,x,sigma', got {names}"
        )
    ts = np.unique(raw["t"])
    xs = np.unique(raw["x"])
    if len(raw) != len(ts) * len(xs):
        raise ValidationError(
            f"surface CSV is not a complete {len(ts)}x{len(xs)} grid "
            f"({len(raw)} rows)"
        )
    values = np.full((len(ts), len(xs)), np.nan)
    it = np.searchsorted(ts, raw["t"])
    ix = np.searchsorted(xs, raw["x"])
    values[it, ix] = raw["sigma"]
    if np.any(np.isnan(values)):
        raise ValidationError("surface CSV has duplicate or missing grid points")
    return TabulatedVol(ts, xs, values)


def surface_from_config(cfg: dict) -> LocalVolSurface:
    if "family" not in cfg:
        raise ValidationError("surface: missing required key 'family'")
    fam = cfg["family"]
    if fam == "constant":
        kw = _take(cfg, "surface", ("family", "sigma"), {})
        return ConstantVol(kw["sigma"])
    if fam == "time-scaled":
        kw = _take(cfg, "surface", ("family", "c0"), {"c1": 0.0, "c2": 0.0})
        return TimeScaledVol(kw["c0"], kw["c1"], kw["c2"])
    if fam == "capped-power":
        kw = _take(
            cfg, "surface", ("family", "sref", "xref", "exponent", "floor", "cap"), {}
        )
        return CappedPowerVol(
            kw["sref"], kw["xref"], kw["exponent"], kw["floor"], kw["cap"]
        )
    if fam == "tabulated-grid":
        kw = _take(cfg, "surface", ("family", "ts", "xs", "values"), {})
        return TabulatedVol(kw["ts"], kw["xs"], kw["values"])
    raise ValidationError(f"surface: unknown family '{fam}'")


def payoff_from_config(cfg: dict) -> PayoffSpec:
    if "family" not in cfg:
        raise ValidationError("payoff: missing required key 'family'")
    fam = cfg["family"]
    if fam in ("call", "put"):
        kw = _take(cfg, "payoff", ("family", "strike"), {})
        return PayoffSpec(family=fam, strike=kw["strike"])
    if fam == "power-call":
        kw = _take(cfg, "payoff", ("family", "strike", "exponent"), {})
        return PayoffSpec(family=fam, strike=kw["strike"], exponent=kw["exponent"])
    if fam == "capped-power":
        kw = _take(cfg, "payoff", ("family", "strike", "exponent", "cap_width"), {})
        return PayoffSpec(
            family=fam,
            strike=kw["strike"],
            exponent=kw["exponent"],
            cap_width=kw["cap_width"],
        )
    if fam == "linear":
        kw = _take(cfg, "payoff", ("family",), {"slope": 1.0, "intercept": 0.0})
        return PayoffSpec(family=fam, slope=kw["slope"], intercept=kw["intercept"])
    if fam == "constant":
        kw = _take(cfg, "payoff", ("family", "level"), {})
        return PayoffSpec(family=fam, level=kw["level"])
    if fam == "user-table":
        kw = _take(cfg, "payoff", ("family", "table_x", "table_y"), {})
        return PayoffSpec(
            family=fam, table_x=tuple(kw["table_x"]), table_y=tuple(kw["table_y"])
        )
    raise ValidationError(f"payoff: unknown family '{fam}'")
