"""Independent oracles and estimators for cross-validating the solvers.

Nothing in here runs the lattice or finite-difference machinery except where
explicitly stated (the small-horizon rate check drives the lattice semigroup
on purpose).  The closed forms are hand-derived and validated by residual
substitution in the test suite, never trusted bare:

* ``bs_value``   - zero-rate call value; the uncertain-volatility problems
  reduce to it because a convex (concave) value profile makes the worst case
  sit at the high (low) volatility endpoint.
* ``lq_value``   - singleton-volatility linear-quadratic value
  x^2/(1+T-t) + s^2 ln(1+T-t), from the quadratic ansatz P(t) x^2 + r(t)
  with P' = P^2 and r' = -s^2 P.
* ``f0_ode_solve`` - the backward scalar ODE -dY = F0(s, x, Y, 0) ds whose
  solution matches the frozen-state control value over a short window; F0 is
  the control infimum of the transported driver plus twice the worst-case
  generator of the frozen diffusion term.
* ``delta32_check`` - measures |semigroup value - test function - ODE value|
  over a shrinking window; the defect should vanish like delta^(3/2).
* ``mc_lower_bound`` - forward Euler scenario simulation; any single
  admissible volatility profile bounds the worst case from below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .expr import Expr, eval_expr, free_vars, parse_expr
from .gexp import uniform_ellipticity_bounds, vol_grid
from .grids import Grid1D, ValueField
from .lattice import semigroup_apply
from .problem import ControlProblem, ProblemCatalogEntry

__all__ = [
    "OracleResult",
    "bs_value",
    "lq_value",
    "lq_closed_form_residual",
    "closed_form_field",
    "oracle_probe_value",
    "f0_ode_solve",
    "fit_loglog_slope",
    "delta32_check",
    "Delta32Report",
    "mc_lower_bound",
    "McResult",
    "sde_moment_scaling",
    "regularity_report",
    "RegularityReport",
    "verify_oracle_tag",
]

_SQRT2 = math.sqrt(2.0)


def _norm_cdf(d: float) -> float:
    return 0.5 * (1.0 + math.erf(d / _SQRT2))


def bs_value(spot: float, strike: float, vol: float, tau: float) -> float:
    """Zero-rate call value spot N(d1) - strike N(d2)."""
    if not (spot > 0.0 and strike > 0.0 and vol > 0.0 and tau > 0.0):
        raise ValueError(
            f"need spot, strike, vol, tau > 0, got "
            f"({spot}, {strike}, {vol}, {tau})"
        )
    sq = vol * math.sqrt(tau)
    d1 = (math.log(spot / strike) + 0.5 * vol * vol * tau) / sq
    d2 = d1 - sq
    return spot * _norm_cdf(d1) - strike * _norm_cdf(d2)


def lq_value(t: float, x: float, horizon: float, s: float) -> float:
    """x^2/(1+T-t) + s^2 ln(1+T-t); terminal condition x^2 at t = T."""
    if t > horizon:
        raise ValueError(f"need t <= horizon, got t={t} > {horizon}")
    tau = horizon - t
    return x * x / (1.0 + tau) + s * s * math.log(1.0 + tau)


def lq_closed_form_residual(t: float, x: float, horizon: float, s: float) -> float:
    """Pointwise defect of lq_value in its reduced equation, by hand-coded
    analytic derivatives: dV/dt + min_u [u Vx + u^2] + s^2/2 Vxx."""
    tau = horizon - t
    one = 1.0 + tau
    v_t = x * x / (one * one) - s * s / one
    v_x = 2.0 * x / one
    v_xx = 2.0 / one
    return v_t + (-0.25 * v_x * v_x) + 0.5 * s * s * v_xx


def closed_form_field(tag: str, problem: ControlProblem, grid: Grid1D,
                      K: int, strike: float = 1.0) -> ValueField:
    """ValueField built from a closed-form oracle (provenance "oracle")."""
    dt = problem.horizon / K
    xs = grid.nodes
    vals = np.empty((K + 1, grid.n_x))
    s_lo, s_hi = uniform_ellipticity_bounds(problem.gamma)
    for k in range(K + 1):
        tau = problem.horizon - k * dt
        if tag == "bsb-convex":
            if tau <= 0.0:
                vals[k] = np.maximum(xs - strike, 0.0)
            else:
                vals[k] = [bs_value(x, strike, math.sqrt(s_hi), tau) for x in xs]
        elif tag == "bsb-concave":
            if tau <= 0.0:
                vals[k] = -np.maximum(xs - strike, 0.0)
            else:
                vals[k] = [-bs_value(x, strike, math.sqrt(s_lo), tau) for x in xs]
        elif tag == "lq-riccati":
            vals[k] = [lq_value(k * dt, x, problem.horizon, math.sqrt(s_lo))
                       for x in xs]
        else:
            raise ValueError(f"no closed form for oracle tag {tag!r}")
    return ValueField(grid=grid, t0=0.0, dt=dt, values=vals, provenance="oracle")


def oracle_probe_value(tag: str, problem: ControlProblem, t: float, x: float,
                       strike: float = 1.0) -> float:
    s_lo, s_hi = uniform_ellipticity_bounds(problem.gamma)
    tau = problem.horizon - t
    if tag == "bsb-convex":
        return (max(x - strike, 0.0) if tau <= 0.0
                else bs_value(x, strike, math.sqrt(s_hi), tau))
    if tag == "bsb-concave":
        return (-max(x - strike, 0.0) if tau <= 0.0
                else -bs_value(x, strike, math.sqrt(s_lo), tau))
    if tag == "lq-riccati":
        return lq_value(t, x, problem.horizon, math.sqrt(s_lo))
    raise ValueError(f"no closed form for oracle tag {tag!r}")


# ---------------------------------------------------------------------------
# frozen-state backward ODE (short-window characterization)


def f0_ode_solve(problem: ControlProblem, x: float, t: float, delta: float,
                 phi: Union[str, Expr], n_rk: int) -> float:
    """Integrate -dY = F0(s, x, Y, 0) ds backward over [t, t+delta], Y(t+delta)=0.

    F0(s, x, y, z) = inf over the control grid of

        d_s phi + f(s, x, y + phi, z + sigma d_x phi, u) + b d_x phi
        + 2 G(sigma^2 d2_xx phi / 2),

    with phi's derivatives taken by central differences at relative step 1e-5
    of the state box (the state stays frozen at x).  Classical 4-stage
    Runge-Kutta with ``n_rk`` steps.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if n_rk < 1:
        raise ValueError("n_rk must be >= 1")
    phi_e = parse_expr(phi) if isinstance(phi, str) else phi
    extra = free_vars(phi_e) - {"t", "x"}
    if extra:
        raise ValueError(f"test function may use (t, x) only, found {sorted(extra)}")
    hx = 1e-5 * (problem.x_max - problem.x_min)
    ht = 1e-5 * problem.horizon
    s_lo, s_hi = uniform_ellipticity_bounds(problem.gamma)
    us = problem.u_grid

    def phi_at(s: float, xx: float) -> float:
        return float(eval_expr(phi_e, {"t": s, "x": xx}))

    def f0(s: float, y: float) -> float:
        p0 = phi_at(s, x)
        px = (phi_at(s, x + hx) - phi_at(s, x - hx)) / (2.0 * hx)
        pxx = (phi_at(s, x + hx) - 2.0 * p0 + phi_at(s, x - hx)) / (hx * hx)
        ps = (phi_at(s + ht, x) - phi_at(s - ht, x)) / (2.0 * ht)
        best = math.inf
        for u in us:
            bind = {"t": s, "x": x, "u": float(u)}
            b = float(eval_expr(problem.b, bind))
            sig = float(eval_expr(problem.sigma, bind))
            f = float(eval_expr(problem.f, {"t": s, "x": x, "y": y + p0,
                                            "z": sig * px, "u": float(u)}))
            f2 = 0.5 * sig * sig * pxx
            two_g = s_hi * max(f2, 0.0) - s_lo * max(-f2, 0.0)
            best = min(best, ps + f + b * px + two_g)
        if not math.isfinite(best):
            raise ValueError(f"non-finite F0 at s={s}")
        return best

    # backward integration: with tau = t + delta - s,  dY/dtau = F0(s(tau), Y)
    y = 0.0
    hstep = delta / n_rk
    for j in range(n_rk):
        tau = j * hstep
        s0 = t + delta - tau

        k1 = f0(s0, y)
        k2 = f0(s0 - 0.5 * hstep, y + 0.5 * hstep * k1)
        k3 = f0(s0 - 0.5 * hstep, y + 0.5 * hstep * k2)
        k4 = f0(s0 - hstep, y + hstep * k3)
        y += (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def fit_loglog_slope(deltas: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(deltas)."""
    ld = np.log(np.asarray(deltas, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(ld, lv, 1)[0])


@dataclass(frozen=True)
class Delta32Report:
    deltas: Tuple[float, ...]
    defects: Tuple[float, ...]
    slope: Optional[float]
    below_noise_floor: bool
    passed: bool


def _is_driftless_constant_vol(problem: ControlProblem, rng) -> Optional[float]:
    """Constant sigma if the state law is exactly x + sigma q B, else None."""
    if free_vars(problem.sigma):
        return None
    for name in ("b", "h"):
        e = getattr(problem, name)
        for _ in range(8):
            bind = {"t": rng.uniform(0, problem.horizon),
                    "x": rng.uniform(problem.x_min, problem.x_max),
                    "u": rng.uniform(problem.u_min, problem.u_max)}
            if float(eval_expr(e, bind)) != 0.0:
                return None
    return float(eval_expr(problem.sigma, {"t": 0.0, "x": 0.0, "u": 0.0}))


def delta32_check(problem: ControlProblem, x: float, t: float,
                  phi: Union[str, Expr], deltas: Sequence[float],
                  n_sub: int = 64, n_x_local: int = 4001, n_rk: int = 256,
                  noise_floor: float = 1e-10, slope_threshold: float = 1.4
                  ) -> Delta32Report:
    """Fit the decay rate of the short-window defect D(delta).

    D(delta) = | min_u semigroup[phi(t+delta, .)](x)  -  phi(t, x)  -  Y0 |
    with the semigroup evaluated on a fine lattice (constant controls) and Y0
    from :func:`f0_ode_solve`.  When the state law is exactly a constant-
    volatility random walk with a singleton scenario set, the lattice is
    aligned with the walk so D sits at the rounding floor.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("need at least 4 window sizes")
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("window sizes must be strictly decreasing")
    phi_e = parse_expr(phi) if isinstance(phi, str) else phi
    rng = np.random.default_rng(12345)
    const_sig = _is_driftless_constant_vol(problem, rng)
    qs = vol_grid(problem.gamma, 2)
    aligned = const_sig is not None and len(qs) == 1

    defects = []
    for delta in deltas:
        dsub = delta / n_sub
        if aligned:
            spacing = abs(const_sig) * float(qs[0]) * math.sqrt(dsub)
            half = (n_sub + 1) * spacing
            grid = Grid1D(x - half, x + half, 2 * (n_sub + 1) + 1)
        else:
            grid = Grid1D(problem.x_min, problem.x_max, n_x_local)
        eta = np.asarray(eval_expr(phi_e, {"t": t + delta, "x": grid.nodes}),
                         dtype=float)
        eta = np.broadcast_to(eta, grid.nodes.shape)
        best = math.inf
        for u in problem.u_grid:
            row = semigroup_apply(eta, grid, t, t + delta, n_sub, problem,
                                  float(u))
            idx = np.searchsorted(grid.nodes, x)
            idx = int(np.clip(idx, 1, grid.n_x - 1))
            lam = (x - grid.nodes[idx - 1]) / grid.dx
            val = row[idx - 1] + lam * (row[idx] - row[idx - 1])
            best = min(best, float(val))
        y0 = f0_ode_solve(problem, x, t, delta, phi_e, n_rk)
        phi_tx = float(eval_expr(phi_e, {"t": t, "x": x}))
        defects.append(abs(best - phi_tx - y0))

    if min(defects) <= noise_floor:
        return Delta32Report(tuple(deltas), tuple(defects), None, True, True)
    slope = fit_loglog_slope(deltas, defects)
    return Delta32Report(tuple(deltas), tuple(defects), slope, False,
                         slope >= slope_threshold)


# ---------------------------------------------------------------------------
# forward Monte Carlo lower bound


@dataclass(frozen=True)
class McResult:
    mean: float
    stderr: float
    n_paths: int
    ci_low: float
    ci_high: float


def _path_signs(seed: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Counter-based +-1 increments: one Philox stream per (seed, path)."""
    out = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
        out[i] = gen.integers(0, 2, size=n_steps) * 2.0 - 1.0
    return out


def _validate_q_profile(problem: ControlProblem, q_profile: Sequence[float]):
    if len(q_profile) == 0:
        raise ValueError("q_profile must be nonempty")
    gamma = problem.gamma
    for q in q_profile:
        if gamma.kind == "interval":
            if not (gamma.sigma_lo - 1e-12 <= q <= gamma.sigma_hi + 1e-12):
                raise ValueError(
                    f"scenario level {q} outside [{gamma.sigma_lo}, {gamma.sigma_hi}]"
                )
        else:
            cands = [abs(float(m[0, 0])) for m in gamma.matrices]
            if min(abs(q - c) for c in cands) > 1e-12:
                raise ValueError(f"scenario level {q} is not a listed scenario")


def _slope_rows(field: ValueField) -> np.ndarray:
    vals = field.values
    dx = field.grid.dx
    out = np.empty_like(vals)
    out[:, 1:-1] = (vals[:, 2:] - vals[:, :-2]) / (2.0 * dx)
    out[:, 0] = (vals[:, 1] - vals[:, 0]) / dx
    out[:, -1] = (vals[:, -1] - vals[:, -2]) / dx
    return out


def mc_lower_bound(problem: ControlProblem, x0: float,
                   u_policy: Union[str, Expr], q_profile: Sequence[float],
                   n_paths: int, K: int, seed: int,
                   value_field: Optional[ValueField] = None) -> McResult:
    """Scenario value of a fixed feedback control under a fixed vol profile.

    Forward Euler with +-1 increments (deterministic per-(seed, path) Philox
    streams), then backward left-endpoint evaluation of the driver along each
    path with Z = sigma * dV/dx interpolated from ``value_field`` when given,
    else 0.  The sample mean under any single admissible scenario is a lower
    bound for the worst case of that control, hence (up to discretization
    artifacts) for no control can it materially exceed the robust value.
    """
    if n_paths < 1000:
        raise ValueError("need n_paths >= 1000")
    if K < 1:
        raise ValueError("need K >= 1")
    _validate_q_profile(problem, q_profile)
    pol = parse_expr(u_policy) if isinstance(u_policy, str) else u_policy
    extra = free_vars(pol) - {"t", "x"}
    if extra:
        raise ValueError(f"feedback policy may use (t, x) only, got {sorted(extra)}")

    T = problem.horizon
    delta = T / K
    sq = math.sqrt(delta)
    m = len(q_profile)
    signs = _path_signs(seed, n_paths, K)
    slope = _slope_rows(value_field) if value_field is not None else None

    xs = np.full(n_paths, float(x0))
    states = np.empty((K + 1, n_paths))
    controls = np.empty((K, n_paths))
    states[0] = xs
    for k in range(K):
        t_k = k * delta
        q = float(q_profile[min(int(m * t_k / T), m - 1)])
        u_k = np.clip(
            np.broadcast_to(
                np.asarray(eval_expr(pol, {"t": t_k, "x": xs}), dtype=float),
                xs.shape),
            problem.u_min, problem.u_max)
        controls[k] = u_k
        bind = {"t": t_k, "x": xs, "u": u_k}
        b = np.broadcast_to(np.asarray(eval_expr(problem.b, bind)), xs.shape)
        h = np.broadcast_to(np.asarray(eval_expr(problem.h, bind)), xs.shape)
        sig = np.broadcast_to(np.asarray(eval_expr(problem.sigma, bind)), xs.shape)
        xs = xs + b * delta + h * (q * q * delta) + sig * (q * sq) * signs[:, k]
        if not np.all(np.isfinite(xs)):
            raise ValueError(f"non-finite state at step {k}")
        states[k + 1] = xs

    ys = np.broadcast_to(
        np.asarray(eval_expr(problem.phi, {"x": states[K]}), dtype=float),
        (n_paths,)).copy()
    for k in range(K - 1, -1, -1):
        t_k = k * delta
        q = float(q_profile[min(int(m * t_k / T), m - 1)])
        xk = states[k]
        u_k = controls[k]
        if slope is not None:
            times = value_field.times
            kk = int(np.clip(np.searchsorted(times, t_k) - 1, 0,
                             value_field.n_rows - 2))
            lam = float(np.clip((t_k - times[kk]) / value_field.dt, 0.0, 1.0))
            nodes = value_field.grid.nodes
            s0 = np.interp(xk, nodes, slope[kk])
            s1 = np.interp(xk, nodes, slope[kk + 1])
            dv = s0 + lam * (s1 - s0)
            sig = np.broadcast_to(
                np.asarray(eval_expr(problem.sigma,
                                     {"t": t_k, "x": xk, "u": u_k})), xk.shape)
            z_k = sig * dv
        else:
            z_k = np.zeros_like(xk)
        fb = {"t": t_k, "x": xk, "y": ys, "z": z_k, "u": u_k}
        fv = np.broadcast_to(np.asarray(eval_expr(problem.f, fb)), xk.shape)
        gv = np.broadcast_to(np.asarray(eval_expr(problem.g, fb)), xk.shape)
        ys = ys + fv * delta + gv * (q * q * delta)

    mean = float(np.mean(ys))
    stderr = float(np.std(ys, ddof=1) / math.sqrt(n_paths))
    return McResult(mean=mean, stderr=stderr, n_paths=n_paths,
                    ci_low=mean - 1.96 * stderr, ci_high=mean + 1.96 * stderr)


def sde_moment_scaling(problem: ControlProblem, x0: float, q_level: float,
                       K: int, n_paths: int = 2000, seed: int = 7,
                       u_policy: str = "0",
                       fractions: Sequence[float] = (0.25, 0.5, 1.0)
                       ) -> Dict[Tuple[int, float], float]:
    """Normalized running-sup second moments at two time resolutions.

    For resolution in {K, 2K} and each horizon fraction, returns
    E[ sup_{s <= frac T} |X_s - x0|^2 ] / ((1 + x0^2) frac T ); the
    proportionality constant should be insensitive to halving the step.
    """
    _validate_q_profile(problem, [q_level])
    pol = parse_expr(u_policy)
    out: Dict[Tuple[int, float], float] = {}
    T = problem.horizon
    for res in (K, 2 * K):
        delta = T / res
        sq = math.sqrt(delta)
        signs = _path_signs(seed, n_paths, res)
        xs = np.full(n_paths, float(x0))
        running = np.zeros(n_paths)
        marks = {f: None for f in fractions}
        for k in range(res):
            t_k = k * delta
            u_k = np.clip(
                np.broadcast_to(
                    np.asarray(eval_expr(pol, {"t": t_k, "x": xs}), dtype=float),
                    xs.shape),
                problem.u_min, problem.u_max)
            bind = {"t": t_k, "x": xs, "u": u_k}
            b = np.broadcast_to(np.asarray(eval_expr(problem.b, bind)), xs.shape)
            h = np.broadcast_to(np.asarray(eval_expr(problem.h, bind)), xs.shape)
            sig = np.broadcast_to(np.asarray(eval_expr(problem.sigma, bind)),
                                  xs.shape)
            xs = xs + b * delta + h * (q_level * q_level * delta) \
                + sig * (q_level * sq) * signs[:, k]
            running = np.maximum(running, (xs - x0) ** 2)
            for f in fractions:
                if marks[f] is None and (k + 1) * delta >= f * T - 1e-12:
                    marks[f] = float(np.mean(running))
        for f in fractions:
            out[(res, f)] = marks[f] / ((1.0 + x0 * x0) * f * T)
    return out


# ---------------------------------------------------------------------------
# regularity estimation


@dataclass(frozen=True)
class RegularityReport:
    lip_x: float        # max |dV| / dx, interior two-thirds window
    holder_t: float     # envelope |V(t) - V(t')| / sqrt(|t-t'|), dyadic gaps
    holder_t_fit: float  # least-squares coefficient of the same row maxima
    growth: float       # max |V| / (1 + |x|), interior two-thirds window


def regularity_report(V: ValueField, skip_terminal_row: bool = False
                      ) -> RegularityReport:
    """Estimate the space Lipschitz, time-Hölder and growth constants.

    All three are measured on the interior two-thirds of the state window
    (the outermost cells carry the one-sided boundary closures of the
    schemes, not the field's own regularity).  The Hölder constants come in
    two flavors: the envelope (tightest constant dominating every interior
    sample over dyadic row gaps) and a least-squares fit of the per-gap
    maxima against sqrt(gap * dt), which is robust to single-sample
    alignment artifacts at payoff kinks.  ``skip_terminal_row`` drops the
    raw payoff row from the scan, restricting it to solver-produced rows.
    """
    n = V.grid.n_x
    third = max(1, n // 6)
    inner = slice(third, n - third)
    vals = V.values[:-1] if skip_terminal_row else V.values
    dx = V.grid.dx
    lip_x = float(np.max(np.abs(np.diff(vals[:, inner], axis=1)))) / dx
    denom = 1.0 + np.abs(V.grid.nodes[inner])
    growth = float(np.max(np.abs(vals[:, inner]) / denom[None, :]))
    env = 0.0
    gaps = []
    maxima = []
    gap = 1
    while gap < vals.shape[0]:
        d = float(np.max(np.abs(vals[:-gap, inner] - vals[gap:, inner])))
        gaps.append(gap * V.dt)
        maxima.append(d)
        env = max(env, d / math.sqrt(gap * V.dt))
        gap *= 2
    g_arr = np.asarray(gaps)
    m_arr = np.asarray(maxima)
    fit = float(np.sum(m_arr * np.sqrt(g_arr)) / np.sum(g_arr)) if gaps else 0.0
    return RegularityReport(lip_x=lip_x, holder_t=env, holder_t_fit=fit,
                            growth=growth)


# ---------------------------------------------------------------------------
# oracle bookkeeping


@dataclass(frozen=True)
class OracleResult:
    name: str
    method: str  # bs-closed-form | riccati | f0-ode | mc-lower
    points: Tuple[Dict[str, float], ...]

    def __post_init__(self):
        for pt in self.points:
            if not all(np.isfinite(v) for v in pt.values()):
                raise ValueError(f"non-finite oracle point {pt}")

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "method": self.method,
             "points": list(self.points)},
            indent=2, sort_keys=True)


def _samples_equal(expr: Expr, reference, problem: ControlProblem, rng,
                   n: int = 32, tol: float = 1e-12) -> bool:
    yz = problem.yz_scale()
    for _ in range(n):
        bind = {
            "t": rng.uniform(0.0, problem.horizon),
            "x": rng.uniform(problem.x_min, problem.x_max),
            "u": rng.uniform(problem.u_min, problem.u_max),
            "y": rng.uniform(-yz, yz),
            "z": rng.uniform(-yz, yz),
        }
        if abs(float(eval_expr(expr, bind)) - reference(bind)) > tol:
            return False
    return True


def verify_oracle_tag(entry: ProblemCatalogEntry, seed: int = 0) -> bool:
    """Sample-based consistency of an oracle tag with the coefficients."""
    rng = np.random.default_rng(seed)
    p = entry.problem
    tag = entry.oracle
    if tag == "none":
        return True
    if tag in ("bsb-convex", "bsb-concave"):
        sign = 1.0 if tag == "bsb-convex" else -1.0
        return (
            _samples_equal(p.b, lambda s: 0.0, p, rng)
            and _samples_equal(p.h, lambda s: 0.0, p, rng)
            and _samples_equal(p.f, lambda s: 0.0, p, rng)
            and _samples_equal(p.g, lambda s: 0.0, p, rng)
            and _samples_equal(p.sigma, lambda s: s["x"], p, rng)
            and _samples_equal(p.phi, lambda s: sign * max(s["x"] - 1.0, 0.0),
                               p, rng)
            and p.gamma.kind == "interval"
        )
    if tag == "lq-riccati":
        s_lo, s_hi = uniform_ellipticity_bounds(p.gamma)
        return (
            p.gamma.is_singleton()
            and _samples_equal(p.b, lambda s: s["u"], p, rng)
            and _samples_equal(p.h, lambda s: 0.0, p, rng)
            and _samples_equal(p.g, lambda s: 0.0, p, rng)
            and _samples_equal(p.f, lambda s: s["u"] ** 2, p, rng)
            and _samples_equal(p.phi, lambda s: s["x"] ** 2, p, rng)
            and free_vars(p.sigma) == frozenset()
        )
    raise ValueError(f"unknown oracle tag {tag!r}")
