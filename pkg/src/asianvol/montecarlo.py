"""Path simulation and Monte Carlo estimators for the local-vol model.

One Brownian driver, eight processes.  On a uniform grid over [0, T] the
engine can evolve, per path and all from the same increments:

* ``S``  - the spot:          dS = (r-q) S dt + sigma(t,S) S dW
* ``Z``  - its S0-sensitivity: dZ = (r-q) Z dt + dcoef_dx(t,S) Z dW, Z0 = 1
* ``X``  - driftless spot:     dX = sigma(t,X) X dW, X0 = S0
* ``Y``  - its S0-sensitivity: dY = dcoef_dx(t,X) Y dW, Y0 = 1
* ``Xt`` - coefficients frozen at (t, S0), lognormal:  dXt = sigma(t,S0) Xt dW
* ``Yt`` - frozen sensitivity, lognormal:              dYt = dcoef_dx(t,S0) Yt dW
* ``Xh`` - frozen Gaussian:    dXh = sigma(t,S0) S0 dW
* ``Yh`` - frozen Gaussian sensitivity: dYh = dcoef_dx(t,S0) dW

S and X step by Euler or log-Euler (selected in SimConfig); Z and Y always
by Euler; the frozen processes have deterministic coefficients and step by
their exact lognormal/Gaussian solutions.

Randomness is counter-based and addressed by (seed, path, step), and all
reductions use a fixed block structure with pairwise/compensated
summation, so every estimate is bit-identical for any thread count or
path batching.  Estimators report exploded paths (non-finite or
nonpositive states, frozen at their last valid value) and fail if more
than 0.1% of paths are excluded.

Delta estimators: central finite differences re-simulate with identical
increments for both legs (common random numbers), and Malliavin-weight
estimators multiply the payoff by an integration-by-parts weight built
from the (S, Z) pair, so they stay exact in the drift.  The Asian weight
for F = (1/T) Int S dt is

    weight = F1 * sum_j u_j dW_j + F1^2 * sum_j u_j K_j dt,

with F1 = 1 / Int Z dt, u_j = 2 Z_j^2 / (sigma_j S_j), and K_j the
tail integral Int_{t_j}^T D_{t_j} Z_t dt evaluated in closed form from
the second-variation prefix sums (see _asian_weights); the European
weight is the three-term Skorokhod representation with G = S_T / Z_T.
Paths whose denominators fall below 1e-6 of their expected scale get
weight zero (mirroring the indicator truncations that make the weights
integrable) and are counted in diagnostics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from ._rng import BLOCK, normal_block
from .errors import DomainError, NumericError, ValidationError
from .model import LocalVolSurface, ConstantVol, MarketParams, PayoffSpec

__all__ = [
    "PROCESS_NAMES",
    "SimConfig",
    "PathBundle",
    "McEstimate",
    "simulate",
    "mc_price",
    "mc_delta_fd",
    "mc_delta_malliavin",
    "geometric_mc_crosscheck",
    "write_paths_csv",
]

PROCESS_NAMES = ("S", "X", "Y", "Z", "Xt", "Yt", "Xh", "Yh")
_STYLES = ("asian", "european", "geometric")

# state dependencies: the sensitivity processes need their primal's state
_NEEDS = {"Z": "S", "Y": "X"}


@dataclass(frozen=True)
class SimConfig:
    """Grid, path count, seed, and scheme for one simulation run."""

    steps: int
    n_paths: int
    seed: int
    scheme: str = "log-euler"
    include_flags: tuple = PROCESS_NAMES
    threads: int = 1
    malliavin_budget: float = 1e12

    def __post_init__(self) -> None:
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 2):
            raise ValidationError(f"steps must be an integer >= 2, got {self.steps}")
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 1):
            raise ValidationError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be a 64-bit integer, got {self.seed}")
        if self.scheme not in ("euler", "log-euler"):
            raise ValidationError(f"scheme must be euler or log-euler, got '{self.scheme}'")
        unknown = [p for p in self.include_flags if p not in PROCESS_NAMES]
        if unknown:
            raise ValidationError(f"unknown process flag '{unknown[0]}'")
        if not (isinstance(self.threads, (int, np.integer)) and self.threads >= 1):
            raise ValidationError(f"threads must be a positive integer, got {self.threads}")


@dataclass
class PathBundle:
    """Simulated paths plus trapezoidal averages, all on one driver."""

    t: np.ndarray
    processes: dict
    averages: dict  # keys among "S", "X", "Y", "logS": (1/T) Int . dt
    increments: np.ndarray
    exploded: np.ndarray
    n_exploded: int
    config: SimConfig


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo mean with its standard error and run diagnostics."""

    mean: float
    std_error: float
    n_paths: int
    estimator: str
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# core stepping kernel
# ---------------------------------------------------------------------------

def _sim_block(
    surface: LocalVolSurface,
    params: MarketParams,
    T: float,
    cfg: SimConfig,
    lo: int,
    hi: int,
    include: Sequence[str],
    want_hist: Sequence[str] = (),
    want_avgs: Sequence[str] = (),
    want_coeffs: bool = False,
):
    """Evolve one block of paths; returns a dict of requested outputs.

    ``want_coeffs`` additionally records sigma, dcoef_dx, dcoef_dxx along
    the S path at the left grid points (used by the Malliavin weights).
    """
    steps, dt = cfg.steps, T / cfg.steps
    B = hi - lo
    S0, mu = params.S0, params.drift
    log_scheme = cfg.scheme == "log-euler"

    needed = set(include) | {_NEEDS[p] for p in include if p in _NEEDS}
    zn = normal_block(cfg.seed, steps, lo, hi)
    dW = math.sqrt(dt) * zn

    state = {}
    for name in needed:
        if name in ("S", "X", "Xt", "Xh"):
            state[name] = np.full(B, S0)
        else:
            state[name] = np.ones(B)
    hist = {name: np.empty((B, steps + 1)) for name in want_hist}
    for name in want_hist:
        hist[name][:, 0] = state[name]
    avgs = {name: np.zeros(B) for name in want_avgs}
    coeffs = (
        {k: np.empty((B, steps)) for k in ("sig", "nu", "rho")} if want_coeffs else None
    )
    exploded = np.zeros(B, dtype=bool)

    def _avg_snapshot():
        out = {}
        for name in want_avgs:
            out[name] = np.log(state["S"]) if name == "logS" else state[name].copy()
        return out

    prev = _avg_snapshot()
    for j in range(steps):
        tj = j * dt
        dWj = dW[:, j]
        # coefficients at the current (left) states
        sig_S = surface.sigma(tj, state["S"]) if "S" in needed else None
        nu_S = surface.dcoef_dx(tj, state["S"]) if "Z" in needed else None
        sig_X = surface.sigma(tj, state["X"]) if "X" in needed else None
        nu_X = surface.dcoef_dx(tj, state["X"]) if "Y" in needed else None
        if {"Xt", "Yt", "Xh", "Yh"} & needed:
            sig_0 = float(surface.sigma(tj, S0))
            nu_0 = float(surface.dcoef_dx(tj, S0))
        if want_coeffs:
            coeffs["sig"][:, j] = sig_S
            coeffs["nu"][:, j] = nu_S if nu_S is not None else surface.dcoef_dx(tj, state["S"])
            coeffs["rho"][:, j] = surface.dcoef_dxx(tj, state["S"])

        new = {}
        if "S" in needed:
            if log_scheme:
                new["S"] = state["S"] * np.exp((mu - 0.5 * sig_S**2) * dt + sig_S * dWj)
            else:
                new["S"] = state["S"] * (1.0 + mu * dt + sig_S * dWj)
        if "Z" in needed:
            new["Z"] = state["Z"] * (1.0 + mu * dt) + nu_S * state["Z"] * dWj
        if "X" in needed:
            if log_scheme:
                new["X"] = state["X"] * np.exp(-0.5 * sig_X**2 * dt + sig_X * dWj)
            else:
                new["X"] = state["X"] * (1.0 + sig_X * dWj)
        if "Y" in needed:
            new["Y"] = state["Y"] + nu_X * state["Y"] * dWj
        if "Xt" in needed:
            new["Xt"] = state["Xt"] * np.exp(-0.5 * sig_0**2 * dt + sig_0 * dWj)
        if "Yt" in needed:
            new["Yt"] = state["Yt"] * np.exp(-0.5 * nu_0**2 * dt + nu_0 * dWj)
        if "Xh" in needed:
            new["Xh"] = state["Xh"] + sig_0 * S0 * dWj
        if "Yh" in needed:
            new["Yh"] = state["Yh"] + nu_0 * dWj

        # explosion handling: freeze bad paths at their last valid state
        bad = np.zeros(B, dtype=bool)
        for name, arr in new.items():
            b = ~np.isfinite(arr)
            if name in ("S", "X"):
                b |= arr <= 0.0
            if b.any():
                arr[b] = state[name][b]
                bad |= b
        exploded |= bad

        for name, arr in new.items():
            state[name] = arr
            if name in hist:
                hist[name][:, j + 1] = arr

        cur = _avg_snapshot()
        for name in want_avgs:
            avgs[name] += 0.5 * (prev[name] + cur[name]) * dt
        prev = cur

    for name in want_avgs:
        avgs[name] /= T
    return {
        "terminal": {name: state[name] for name in include},
        "hist": hist,
        "avgs": avgs,
        "dW": dW,
        "exploded": exploded,
        "coeffs": coeffs,
    }


def _block_ranges(n: int):
    return [(lo, min(lo + BLOCK, n)) for lo in range(0, n, BLOCK)]


def _map_blocks(fn, ranges, threads: int):
    """Apply fn over block ranges, preserving block order in the result."""
    if threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda r: fn(*r), ranges))


# ---------------------------------------------------------------------------
# simulation with full histories
# ---------------------------------------------------------------------------

def simulate(surface: LocalVolSurface, params: MarketParams, T: float, cfg: SimConfig) -> PathBundle:
    """Full-history simulation of the requested processes on one driver.

    Intended for inspection, path dumps, and the coupled-pair studies;
    refuses runs whose histories would not comfortably fit in memory.
    """
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")
    include = tuple(cfg.include_flags)
    total = cfg.n_paths * (cfg.steps + 1) * max(len(include), 1)
    if total > 2e8:
        raise ValidationError(
            f"history of {total:.2g} elements is too large; use the estimators, "
            "which stream in blocks"
        )
    avg_names = [n for n in ("S", "X", "Y") if n in include]
    if "S" in include:
        avg_names.append("logS")

    blocks = _map_blocks(
        lambda lo, hi: _sim_block(
            surface, params, T, cfg, lo, hi, include, want_hist=include, want_avgs=avg_names
        ),
        _block_ranges(cfg.n_paths),
        cfg.threads,
    )
    processes = {
        name: np.concatenate([b["hist"][name] for b in blocks]) for name in include
    }
    averages = {
        name: np.concatenate([b["avgs"][name] for b in blocks]) for name in avg_names
    }
    increments = np.concatenate([b["dW"] for b in blocks])
    exploded = np.concatenate([b["exploded"] for b in blocks])
    return PathBundle(
        t=np.linspace(0.0, T, cfg.steps + 1),
        processes=processes,
        averages=averages,
        increments=increments,
        exploded=exploded,
        n_exploded=int(exploded.sum()),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _assemble(parts, n_requested: int, disc: float, estimator: str, extra: Optional[dict] = None):
    """Combine per-block (sum, sum_sq, n_valid, n_excluded[, diag]) tuples."""
    total = math.fsum(p[0] for p in parts)
    total2 = math.fsum(p[1] for p in parts)
    n_valid = int(sum(p[2] for p in parts))
    n_exc = int(sum(p[3] for p in parts))
    if n_exc > 0.001 * n_requested:
        raise NumericError(
            f"{n_exc} of {n_requested} paths exploded (> 0.1%); "
            "the scheme is unstable on this configuration"
        )
    if n_valid == 0:
        raise NumericError("no valid paths")
    mean = total / n_valid
    var = max(total2 / n_valid - mean * mean, 0.0)
    se = math.sqrt(var / n_valid)
    diag = {"excluded": n_exc}
    if extra:
        diag.update(extra)
    return McEstimate(
        mean=disc * mean,
        std_error=disc * se,
        n_paths=n_valid,
        estimator=estimator,
        diagnostics=diag,
    )


def _style_values(blk, style: str):
    if style == "asian":
        return blk["avgs"]["S"]
    if style == "european":
        return blk["terminal"]["S"]
    return np.exp(blk["avgs"]["logS"])  # geometric


def _style_avgs(style: str):
    return ("S",) if style == "asian" else ("logS",) if style == "geometric" else ()


def mc_price(
    surface: LocalVolSurface,
    params: MarketParams,
    payoff: PayoffSpec,
    style: str,
    T: float,
    cfg: SimConfig,
) -> McEstimate:
    """Discounted plain Monte Carlo price: e^{-rT} mean of the payoff.

    The payoff argument is the trapezoidal average of S (asian), the
    terminal S_T (european), or exp of the average log S (geometric).
    """
    if style not in _STYLES:
        raise ValidationError(f"style must be one of {_STYLES}, got '{style}'")
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")

    def block_fn(lo, hi):
        blk = _sim_block(
            surface, params, T, cfg, lo, hi, include=("S",), want_avgs=_style_avgs(style)
        )
        valid = ~blk["exploded"]
        v = payoff.value(_style_values(blk, style)[valid])
        return (
            float(np.add.reduce(v)),
            float(np.add.reduce(v * v)),
            int(valid.sum()),
            int((~valid).sum()),
        )

    parts = _map_blocks(block_fn, _block_ranges(cfg.n_paths), cfg.threads)
    return _assemble(
        parts, cfg.n_paths, math.exp(-params.r * T), f"mc-price-{style}"
    )


def mc_delta_fd(
    surface: LocalVolSurface,
    params: MarketParams,
    payoff: PayoffSpec,
    style: str,
    T: float,
    cfg: SimConfig,
    bump: float = 1e-3,
) -> McEstimate:
    """Central-difference delta with common random numbers.

    Both legs re-simulate from S0*(1 +- bump) with identical Brownian
    increments; the per-path difference quotient is averaged.
    """
    if style not in _STYLES:
        raise ValidationError(f"style must be one of {_STYLES}, got '{style}'")
    if not (1e-5 <= bump <= 1e-1):
        raise DomainError(f"bump must lie in [1e-5, 1e-1], got {bump}")
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")
    p_up = replace(params, S0=params.S0 * (1.0 + bump))
    p_dn = replace(params, S0=params.S0 * (1.0 - bump))
    denom = 2.0 * bump * params.S0
    avg_names = _style_avgs(style)

    def block_fn(lo, hi):
        up = _sim_block(surface, p_up, T, cfg, lo, hi, include=("S",), want_avgs=avg_names)
        dn = _sim_block(surface, p_dn, T, cfg, lo, hi, include=("S",), want_avgs=avg_names)
        valid = ~(up["exploded"] | dn["exploded"])
        v = (
            payoff.value(_style_values(up, style)[valid])
            - payoff.value(_style_values(dn, style)[valid])
        ) / denom
        return (
            float(np.add.reduce(v)),
            float(np.add.reduce(v * v)),
            int(valid.sum()),
            int((~valid).sum()),
        )

    parts = _map_blocks(block_fn, _block_ranges(cfg.n_paths), cfg.threads)
    return _assemble(
        parts, cfg.n_paths, math.exp(-params.r * T), f"mc-delta-fd-{style}",
        extra={"bump": bump},
    )


# --- Malliavin weights -----------------------------------------------------

def _suffix_panels(arr: np.ndarray, dt: float) -> np.ndarray:
    """Suffix sums of trapezoid panels: out[:, j] = Int_{t_j}^T arr dt."""
    panels = 0.5 * (arr[:, :-1] + arr[:, 1:]) * dt
    return np.cumsum(panels[:, ::-1], axis=1)[:, ::-1]


def _asian_weights(blk, params: MarketParams, T: float, dt: float):
    """Integration-by-parts weight for F = (1/T) Int S dt from (S, Z) paths.

    With u_j = 2 Z_j^2 / (sigma_j S_j) the weight is
    (1/I) sum u_j dW_j + (1/I^2) sum u_j K_j dt, where I = Int Z dt and
    K_j = Int_{t_j}^T D_{t_j} Z_t dt comes from the closed form
    D_s Z_t = Z_t (nu_s - c_s (R_t - R_s)), c_s = sigma_s S_s / Z_s,
    R accumulating nu rho Z dt - rho Z dW.
    """
    S, Z = blk["hist"]["S"], blk["hist"]["Z"]
    dW = blk["dW"]
    sig, nu, rho = blk["coeffs"]["sig"], blk["coeffs"]["nu"], blk["coeffs"]["rho"]
    Zl, Sl = Z[:, :-1], S[:, :-1]
    mu = params.drift

    R = np.concatenate(
        [
            np.zeros((Z.shape[0], 1)),
            np.cumsum(nu * rho * Zl * dt - rho * Zl * dW, axis=1),
        ],
        axis=1,
    )
    IZ = _suffix_panels(Z, dt)
    IZR = _suffix_panels(Z * R, dt)
    I0 = IZ[:, 0]

    # integrability floors at 1e-6 of the deterministic expected scale
    t_grid = np.linspace(0.0, T, Z.shape[1])
    mean_Z = np.exp(mu * t_grid)
    floor_I = 1e-6 * float(np.trapezoid(mean_Z, dx=dt))
    floor_Z = 1e-6 * float(mean_Z.min())
    flagged = (I0 < floor_I) | (Zl.min(axis=1) < floor_Z)

    with np.errstate(divide="ignore", invalid="ignore"):
        c = sig * Sl / Zl
        u = 2.0 * Zl * Zl / (sig * Sl)
        K = (nu + c * R[:, :-1]) * IZ - c * IZR
        delta_u = np.einsum("ij,ij->i", u, dW)
        corr = np.einsum("ij,ij->i", u, K) * dt
        F1 = 1.0 / I0
        w = F1 * delta_u + F1 * F1 * corr
    w[flagged] = 0.0
    w[~np.isfinite(w)] = 0.0
    return w, flagged


def _european_weights(blk, params: MarketParams, T: float, dt: float):
    """Three-term Skorokhod weight for Phi(S_T) from (S, Z) paths.

    weight = G (sum h_j dW_j + sum h_j (nu_j - c_j (R_T - R_j)) dt) / (S0 T)
             - 1/S0,  with h_j = Z_j / (sigma_j S_j) and G = S_T / Z_T.
    Exact when dcoef_dx = sigma (level-independent surfaces); otherwise
    accurate to the same O(sqrt(T)) order as the underlying expansion.
    """
    S, Z = blk["hist"]["S"], blk["hist"]["Z"]
    dW = blk["dW"]
    sig, nu, rho = blk["coeffs"]["sig"], blk["coeffs"]["nu"], blk["coeffs"]["rho"]
    Zl, Sl = Z[:, :-1], S[:, :-1]
    S0, mu = params.S0, params.drift

    R = np.concatenate(
        [
            np.zeros((Z.shape[0], 1)),
            np.cumsum(nu * rho * Zl * dt - rho * Zl * dW, axis=1),
        ],
        axis=1,
    )
    floor_Z = 1e-6 * math.exp(-abs(mu) * T)
    flagged = (Zl.min(axis=1) < floor_Z) | (Z[:, -1] < floor_Z)

    with np.errstate(divide="ignore", invalid="ignore"):
        c = sig * Sl / Zl
        h = Zl / (sig * Sl)
        delta_h = np.einsum("ij,ij->i", h, dW)
        corr = np.einsum("ij,ij->i", h, nu - c * (R[:, -1:] - R[:, :-1])) * dt
        G = S[:, -1] / Z[:, -1]
        w = G * (delta_h + corr) / (S0 * T) - 1.0 / S0
    w[flagged] = 0.0
    w[~np.isfinite(w)] = 0.0
    return w, flagged


def mc_delta_malliavin(
    surface: LocalVolSurface,
    params: MarketParams,
    payoff: PayoffSpec,
    style: str,
    T: float,
    cfg: SimConfig,
) -> McEstimate:
    """Malliavin-weight delta: e^{-rT} mean of payoff times weight.

    The weights are built from the (S, Z) pair, which keeps them valid
    under nonzero drift (at zero drift S and Z coincide with the driftless
    X and Y sample-by-sample, so this is also the driftless weight).
    Flagged paths (denominator floors) contribute weight zero, mirroring
    the indicator truncation that makes the continuous-time weight
    integrable, and are counted in diagnostics.
    """
    if style not in ("asian", "european"):
        raise ValidationError(
            f"malliavin delta supports asian or european style, got '{style}'"
        )
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")
    if cfg.steps**2 * cfg.n_paths > cfg.malliavin_budget:
        raise ValidationError(
            f"steps^2 * n_paths = {cfg.steps**2 * cfg.n_paths:.3g} exceeds the "
            f"malliavin budget {cfg.malliavin_budget:.3g}"
        )
    dt = T / cfg.steps
    avg_names = ("S",) if style == "asian" else ()

    def block_fn(lo, hi):
        blk = _sim_block(
            surface, params, T, cfg, lo, hi,
            include=("S", "Z"), want_hist=("S", "Z"), want_avgs=avg_names,
            want_coeffs=True,
        )
        if style == "asian":
            w, flagged = _asian_weights(blk, params, T, dt)
            target = blk["avgs"]["S"]
        else:
            w, flagged = _european_weights(blk, params, T, dt)
            target = blk["terminal"]["S"]
        valid = ~blk["exploded"]
        v = payoff.value(target[valid]) * w[valid]
        return (
            float(np.add.reduce(v)),
            float(np.add.reduce(v * v)),
            int(valid.sum()),
            int((~valid).sum()),
            float(np.add.reduce(w[valid])),
            float(np.add.reduce(w[valid] * w[valid])),
            int(flagged[valid].sum()),
        )

    parts = _map_blocks(block_fn, _block_ranges(cfg.n_paths), cfg.threads)
    n_valid = int(sum(p[2] for p in parts))
    w_mean = math.fsum(p[4] for p in parts) / max(n_valid, 1)
    w_sq = math.fsum(p[5] for p in parts) / max(n_valid, 1)
    extra = {
        "flagged": int(sum(p[6] for p in parts)),
        "weight_mean": w_mean,
        "weight_var": max(w_sq - w_mean * w_mean, 0.0),
    }
    return _assemble(
        [p[:4] for p in parts], cfg.n_paths, math.exp(-params.r * T),
        f"mc-delta-malliavin-{style}", extra=extra,
    )


def geometric_mc_crosscheck(
    sigma: float,
    params: MarketParams,
    payoff: PayoffSpec,
    T: float,
    cfg: SimConfig,
) -> McEstimate:
    """Monte Carlo of the geometric-average payoff under flat Black-Scholes.

    Exists to validate the closed-form geometric_bs prices; sigma = 0 is
    the deterministic degenerate case.
    """
    if not sigma >= 0.0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    est = mc_price(ConstantVol(sigma), params, payoff, "geometric", T, cfg)
    return replace(est, estimator="mc-geometric-crosscheck")


# ---------------------------------------------------------------------------
# path dumps
# ---------------------------------------------------------------------------

def write_paths_csv(fileobj, bundle: PathBundle, columns: Iterable[str] = ("S", "X", "Y", "Z")):
    """Write paths as CSV rows ``path,step,t,<columns>`` at full precision."""
    cols = [c for c in columns]
    missing = [c for c in cols if c not in bundle.processes]
    if missing:
        raise ValidationError(f"process '{missing[0]}' not present in the bundle")
    fileobj.write("path,step,t," + ",".join(cols) + "\n")
    n, steps_p1 = bundle.processes[cols[0]].shape if cols else (0, 0)
    for i in range(n):
        for j in range(steps_p1):
            vals = ",".join(repr(float(bundle.processes[c][i, j])) for c in cols)
            fileobj.write(f"{i},{j},{bundle.t[j]!r},{vals}\n")
