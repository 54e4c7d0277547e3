"""Discrete-time sublinear expectation lattice and DPP value solver.

One backward step computes, at every grid node, the worst case over the
volatility scenarios q of

    m + delta * f(t, x, m, zeta, u) + q^2 delta * g(t, x, m, zeta, u)

where the pair x+- = x + b delta + h q^2 delta +- sigma q sqrt(delta) carries
the one-step state law (symmetric two-point distribution), m is the stencil
average of the next value row and zeta = sigma * D_c W approximates the
martingale integrand via the central difference D_c.  Minimizing over the
control grid and stepping backward realizes the dynamic programming
recursion; the worst-case sup at every step implicitly carries the
decreasing-martingale slack, which is never represented explicitly.

Boundary rule: where the displaced pair would leave the grid, the step
switches to a mean/variance matched two-point stencil supported inside the
grid (boundary-scaled, Markov-chain-approximation style).  All stencil
weights stay in [0, 1], which keeps every update a monotone, stable convex
combination; the price is a one-sided consistency error confined to the
outermost nodes.  Interior nodes always use the plain symmetric pair with
linear interpolation.

Tree-mode evaluators (no grid, nodes carry exact states) use the scenario
slope (Y+ - Y-) / (2 q sqrt(delta)) for zeta instead, which is exact on a
binary tree; they exist to cross-check the lattice against brute-force
enumeration of adapted control/volatility assignments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .expr import eval_expr
from .gexp import uniform_ellipticity_bounds, vol_grid
from .grids import Grid1D, ValueField
from .problem import ControlProblem, lipschitz_probe

__all__ = [
    "StepStencil",
    "one_step_gexp",
    "semigroup_apply",
    "solve_dpp",
    "solve_dpp_tree",
    "brute_force_value",
    "dpp_residual",
    "dpp_residual_profile",
    "lattice_stability_margin",
    "GrowthCeilingError",
]


class GrowthCeilingError(RuntimeError):
    """Backward recursion left the configured linear-growth envelope."""

    def __init__(self, k: int, i: int, value: float):
        super().__init__(
            f"value {value:g} at time row {k}, node {i} violates the growth ceiling"
        )
        self.k = k
        self.i = i


@dataclass(frozen=True)
class StepStencil:
    """One-step state pair for a (node, control, scenario) triple.

    ``x_plus >= x_minus`` carry weight 1/2 each around the drifted center
    ``x + drift_increment`` with ``drift_increment = b delta + h q^2 delta``
    and ``diffusion_shift = sigma q sqrt(delta)`` (signed; the ordered pair
    uses its magnitude).  Grid evaluation clamps the pair into the grid via
    the monotone boundary closure; tree evaluation uses the states as-is.
    """

    x_plus: float
    x_minus: float
    drift_increment: float
    diffusion_shift: float

    def __post_init__(self):
        vals = (self.x_plus, self.x_minus, self.drift_increment,
                self.diffusion_shift)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite stencil {vals}")
        if self.x_plus < self.x_minus:
            raise ValueError("stencil pair out of order")

    @property
    def slope_sign(self) -> float:
        return -1.0 if self.diffusion_shift < 0.0 else 1.0

    @staticmethod
    def for_state(problem: ControlProblem, t: float, x: float, u: float,
                  q: float, delta: float) -> "StepStencil":
        bind = {"t": t, "x": x, "u": u}
        b = float(eval_expr(problem.b, bind))
        h = float(eval_expr(problem.h, bind))
        sig = float(eval_expr(problem.sigma, bind))
        drift = b * delta + h * (q * q * delta)
        shift = sig * q * math.sqrt(delta)
        center = x + drift
        return StepStencil(x_plus=center + abs(shift),
                           x_minus=center - abs(shift),
                           drift_increment=drift, diffusion_shift=shift)


def _coef(expr, bindings, shape):
    out = np.asarray(eval_expr(expr, bindings), dtype=np.float64)
    out = np.broadcast_to(out, shape)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite coefficient evaluation in lattice step")
    return out


def _interp_inside(W: np.ndarray, grid: Grid1D, xq: np.ndarray) -> np.ndarray:
    """Linear interpolation of W at points xq inside [x_min, x_max].

    Difference form W[i] + lam * (W[i+1] - W[i]) so constants survive exactly.
    """
    pos = (xq - grid.x_min) / grid.dx
    idx = np.clip(pos.astype(np.int64), 0, grid.n_x - 2)
    lam = np.clip(pos - idx, 0.0, 1.0)
    return W[idx] + lam * (W[idx + 1] - W[idx])


def _central_slope(W: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(W)
    out[1:-1] = (W[2:] - W[:-2]) / (2.0 * dx)
    out[0] = (W[1] - W[0]) / dx
    out[-1] = (W[-1] - W[-2]) / dx
    return out


def _stencil_mean(W: np.ndarray, grid: Grid1D, mu: np.ndarray,
                  s: np.ndarray) -> np.ndarray:
    """Expected next value under the two-point step law (monotone closure).

    Interior nodes average W at mu +- s.  If one displaced point would exit
    the grid, an asymmetric two-point rule {boundary node, interior point}
    matching the same mean and variance is used; if even that cannot be
    supported, the rule degrades to the mean-matching combination of the two
    grid endpoints.  Every branch is a convex combination of W values.
    """
    lo, hi = grid.x_min, grid.x_max
    xp = mu + s
    xm = mu - s
    m = np.empty_like(mu)

    inside = (xp <= hi) & (xm >= lo)
    if np.any(inside):
        m[inside] = 0.5 * (_interp_inside(W, grid, xp[inside])
                           + _interp_inside(W, grid, xm[inside]))
    rest = ~inside
    if not np.any(rest):
        return m

    w_lo = W[0]
    w_hi = W[-1]
    span = hi - lo

    def endpoint_rule(mu_r):
        w = np.clip((mu_r - lo) / span, 0.0, 1.0)
        return w_lo + w * (w_hi - w_lo)

    idx_rest = np.nonzero(rest)[0]
    mu_r = mu[idx_rest]
    s_r = s[idx_rest]
    out = np.empty_like(mu_r)
    hi_exit = xp[idx_rest] > hi
    lo_exit = xm[idx_rest] < lo

    both = hi_exit & lo_exit
    out[both] = endpoint_rule(mu_r[both])

    for right in (True, False):
        sel = (hi_exit & ~lo_exit) if right else (lo_exit & ~hi_exit)
        if not np.any(sel):
            continue
        mu_s = mu_r[sel]
        s_s = s_r[sel]
        edge = hi if right else lo
        a = (edge - mu_s) if right else (mu_s - edge)
        res = np.empty_like(mu_s)
        degenerate = a <= 0.0
        res[degenerate] = endpoint_rule(mu_s[degenerate])
        ok = ~degenerate
        if np.any(ok):
            a_ok = a[ok]
            b_off = (s_s[ok] ** 2) / a_ok
            inner = mu_s[ok] - b_off if right else mu_s[ok] + b_off
            weight = (s_s[ok] ** 2) / (a_ok ** 2 + s_s[ok] ** 2)
            reachable = (inner >= lo) if right else (inner <= hi)
            vals = np.empty_like(a_ok)
            if np.any(reachable):
                base = _interp_inside(W, grid, inner[reachable])
                edge_val = w_hi if right else w_lo
                vals[reachable] = base + weight[reachable] * (edge_val - base)
            if np.any(~reachable):
                vals[~reachable] = endpoint_rule(mu_s[ok][~reachable])
            res[ok] = vals
        out[sel] = res

    m[idx_rest] = out
    return m


def one_step_gexp(W: np.ndarray, grid: Grid1D, t: float, delta: float,
                  problem: ControlProblem, u: float, n_q: int = 2) -> np.ndarray:
    """One backward sublinear-expectation step under a fixed control value.

    Returns, at every node, the sup over the volatility grid of the driver-
    augmented stencil average described in the module docstring.
    """
    if delta <= 0.0:
        raise ValueError(f"step size must be positive, got {delta}")
    W = np.asarray(W, dtype=np.float64)
    x = grid.nodes
    shape = x.shape
    bind = {"t": t, "x": x, "u": u}
    b = _coef(problem.b, bind, shape)
    h = _coef(problem.h, bind, shape)
    sig = _coef(problem.sigma, bind, shape)

    zeta = sig * _central_slope(W, grid.dx)
    sqrt_delta = math.sqrt(delta)
    best: Optional[np.ndarray] = None
    for q in vol_grid(problem.gamma, n_q):
        q2d = q * q * delta
        mu = x + b * delta + h * q2d
        s = np.abs(sig) * (abs(q) * sqrt_delta)
        m = _stencil_mean(W, grid, mu, s)
        fb = {"t": t, "x": x, "y": m, "z": zeta, "u": u}
        fval = _coef(problem.f, fb, shape)
        gval = _coef(problem.g, fb, shape)
        cand = m + delta * fval + q2d * gval
        best = cand if best is None else np.maximum(best, cand)
    return best


def _min_over_controls(W: np.ndarray, grid: Grid1D, t: float, delta: float,
                       problem: ControlProblem, n_q: int,
                       u_grid: Optional[np.ndarray] = None) -> np.ndarray:
    us = problem.u_grid if u_grid is None else u_grid
    best: Optional[np.ndarray] = None
    for u in us:
        cand = one_step_gexp(W, grid, t, delta, problem, float(u), n_q)
        best = cand if best is None else np.minimum(best, cand)
    return best


def lattice_stability_margin(problem: ControlProblem, delta: float) -> float:
    """delta * (Lip_y f + s_hi * Lip_y g); must stay <= 0.5 for the solver."""
    from .expr import free_vars

    needs = ("y" in free_vars(problem.f)) or ("y" in free_vars(problem.g))
    if not needs:
        return 0.0
    report = lipschitz_probe(problem, n_samples=200, seed=1, ceiling=float("inf"))
    _, s_hi = uniform_ellipticity_bounds(problem.gamma)
    lip = report.constants["f"].get("y", 0.0) + s_hi * report.constants["g"].get("y", 0.0)
    return delta * lip


def solve_dpp(problem: ControlProblem, grid: Grid1D, K: int, n_q: int = 2,
              growth_ceiling: float = 1e8,
              u_grid: Optional[np.ndarray] = None) -> ValueField:
    """Full backward dynamic-programming recursion on the lattice.

    Terminal row is the payoff at the nodes; each earlier row is the pointwise
    min over the control grid of :func:`one_step_gexp` applied to the next
    row.  Aborts with the offending (row, node) if the recursion leaves the
    linear-growth envelope ``growth_ceiling * (1 + |x|)``.
    """
    if K < 1:
        raise ValueError(f"need K >= 1, got {K}")
    delta = problem.horizon / K
    margin = lattice_stability_margin(problem, delta)
    if margin > 0.5:
        raise ValueError(
            f"lattice stability bound violated: delta * driver y-Lipschitz = "
            f"{margin:.3g} > 0.5; increase K"
        )
    x = grid.nodes
    envelope = growth_ceiling * (1.0 + np.abs(x))
    values = np.empty((K + 1, grid.n_x))
    values[K] = _coef(problem.phi, {"x": x}, x.shape)
    for k in range(K - 1, -1, -1):
        t_k = k * delta
        row = _min_over_controls(values[k + 1], grid, t_k, delta, problem,
                                 n_q, u_grid)
        bad = ~(np.abs(row) <= envelope)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise GrowthCeilingError(k, i, float(row[i]))
        values[k] = row
    return ValueField(grid=grid, t0=0.0, dt=delta, values=values,
                      provenance="lattice")


UPolicy = Union[float, str, Callable[[int, float], float]]


def semigroup_apply(eta: np.ndarray, grid: Grid1D, t: float, s: float,
                    n_sub: int, problem: ControlProblem, u_policy: UPolicy,
                    n_q: int = 2) -> np.ndarray:
    """Compose one-step operators over [t, s] with a control policy.

    ``u_policy`` is a constant control value, the string ``"min"`` for
    per-node minimization at every substep, or a callable ``(step_index,
    step_time) -> u``.  Composing a+b substeps equals composing a then b;
    both run the identical code path.
    """
    if not (t < s):
        raise ValueError(f"need t < s, got t={t}, s={s}")
    if n_sub < 1:
        raise ValueError(f"need n_sub >= 1, got {n_sub}")
    delta = (s - t) / n_sub
    W = np.asarray(eta, dtype=np.float64)
    for j in range(n_sub - 1, -1, -1):
        t_j = t + j * delta
        if isinstance(u_policy, str):
            if u_policy != "min":
                raise ValueError(f"unknown policy {u_policy!r}")
            W = _min_over_controls(W, grid, t_j, delta, problem, n_q)
        elif callable(u_policy):
            W = one_step_gexp(W, grid, t_j, delta, problem,
                              float(u_policy(j, t_j)), n_q)
        else:
            W = one_step_gexp(W, grid, t_j, delta, problem, float(u_policy), n_q)
    return W


def dpp_residual_profile(V: ValueField, problem: ControlProblem, k: int,
                         j: int, n_q: int = 2) -> np.ndarray:
    """Per-node dynamic-programming defect between rows k and j of V.

    Recomputes row k from row j by per-step control minimization (the fixed
    first-step control and the outer min collapse into the same pointwise
    minimization) and returns ``V[k] - recomputed``.  On solver output this
    is identically zero because it replays the solver's own code path.
    """
    if not (0 <= k < j < V.n_rows):
        raise ValueError(f"need 0 <= k < j <= {V.n_rows - 1}, got k={k}, j={j}")
    delta = V.dt
    W = V.values[j]
    for step in range(j - 1, k - 1, -1):
        t_step = V.t0 + step * delta
        W = _min_over_controls(W, V.grid, t_step, delta, problem, n_q)
    return V.values[k] - W


def dpp_residual(V: ValueField, problem: ControlProblem, k: int, j: int,
                 n_q: int = 2) -> float:
    """Max absolute dynamic-programming defect over the interior nodes."""
    prof = dpp_residual_profile(V, problem, k, j, n_q)
    return float(np.max(np.abs(prof[1:-1])))


# ---------------------------------------------------------------------------
# tree-mode evaluation (exact states, no interpolation)


def _scalar(expr, bindings) -> float:
    return float(eval_expr(expr, bindings))


def solve_dpp_tree(problem: ControlProblem, x0: float, K: int,
                   n_u: Optional[int] = None, n_q: int = 2) -> float:
    """DPP recursion on exact binary-tree states (interpolation-free mode).

    Per node: min over the control grid of the max over volatility scenarios,
    with zeta = (Y+ - Y-) / (2 q sqrt(delta)), the scenario slope that is
    exact on the tree.
    """
    delta = problem.horizon / K
    sqrt_delta = math.sqrt(delta)
    qs = [float(q) for q in vol_grid(problem.gamma, n_q)]
    if n_u is None:
        us = [float(u) for u in problem.u_grid]
    elif n_u == 1:
        us = [problem.u_min]
    else:
        us = [float(u) for u in np.linspace(problem.u_min, problem.u_max, n_u)]

    def value(d: int, x: float) -> float:
        if d == K:
            return _scalar(problem.phi, {"x": x})
        t_d = d * delta
        best = math.inf
        for u in us:
            worst = -math.inf
            for q in qs:
                st = StepStencil.for_state(problem, t_d, x, u, q, delta)
                y_up = value(d + 1, st.x_plus)
                y_dn = value(d + 1, st.x_minus)
                m = 0.5 * (y_up + y_dn)
                zeta = st.slope_sign * (y_up - y_dn) / (2.0 * q * sqrt_delta)
                fb = {"t": t_d, "x": x, "y": m, "z": zeta, "u": u}
                cand = (m + delta * _scalar(problem.f, fb)
                        + (q * q * delta) * _scalar(problem.g, fb))
                worst = max(worst, cand)
            best = min(best, worst)
        return best

    return value(0, float(x0))


def brute_force_value(problem: ControlProblem, x0: float, K: int,
                      n_u_bf: int, max_assignments: float = 6e6) -> float:
    """Exhaustive inf-sup over adapted control and volatility assignments.

    Assignments attach one control value and one scenario per binary-history
    node of the depth-K tree; for each of the (n_u)^(2^K - 1) control
    assignments all (n_q)^(2^K - 1) adapted volatility assignments are
    enumerated, the tree is rolled forward on exact states and the recursive
    value at the root evaluated backward.  Returns inf over controls of the
    sup over scenarios.
    """
    if K < 1:
        raise ValueError("need K >= 1")
    delta = problem.horizon / K
    sqrt_delta = math.sqrt(delta)
    qs = np.asarray(vol_grid(problem.gamma, 2), dtype=np.float64)
    if n_u_bf == 1:
        us = np.array([problem.u_min])
    else:
        us = np.linspace(problem.u_min, problem.u_max, n_u_bf)
    n_nodes = 2 ** K - 1
    n_uassign = len(us) ** n_nodes
    n_qassign = len(qs) ** n_nodes
    if n_uassign * n_qassign > max_assignments:
        raise ValueError(
            f"enumeration of {n_uassign} x {n_qassign} adapted assignments "
            f"exceeds the cap {max_assignments:g}; reduce K or n_u_bf"
        )
    a_u = np.array(list(itertools.product(us, repeat=n_nodes)))  # (NU, nodes)
    a_q = np.array(list(itertools.product(qs, repeat=n_nodes)))  # (NQ, nodes)

    n_total = 2 ** (K + 1) - 1
    states: list = [None] * n_total
    states[0] = np.full((1, 1), float(x0))
    for d in range(K):
        t_d = d * delta
        for i in range(2 ** d - 1, 2 ** (d + 1) - 1):
            uu = a_u[:, i][:, None]
            qq = a_q[:, i][None, :]
            bind = {"t": t_d, "x": states[i], "u": uu}
            b = eval_expr(problem.b, bind)
            h = eval_expr(problem.h, bind)
            sig = eval_expr(problem.sigma, bind)
            q2d = qq * qq * delta
            mu = states[i] + b * delta + h * q2d
            shift = sig * (qq * sqrt_delta)
            states[2 * i + 1] = mu + shift
            states[2 * i + 2] = mu - shift

    values: list = [None] * n_total
    for i in range(2 ** K - 1, 2 ** (K + 1) - 1):
        values[i] = np.broadcast_to(
            np.asarray(eval_expr(problem.phi, {"x": states[i]})),
            np.broadcast_shapes(np.shape(states[i]), (n_uassign, n_qassign)),
        )
    for d in range(K - 1, -1, -1):
        t_d = d * delta
        for i in range(2 ** d - 1, 2 ** (d + 1) - 1):
            uu = a_u[:, i][:, None]
            qq = a_q[:, i][None, :]
            yp = values[2 * i + 1]
            ym = values[2 * i + 2]
            m = 0.5 * (yp + ym)
            zeta = (yp - ym) / (2.0 * qq * sqrt_delta)
            fb = {"t": t_d, "x": states[i], "y": m, "z": zeta, "u": uu}
            q2d = qq * qq * delta
            values[i] = (m + delta * eval_expr(problem.f, fb)
                         + q2d * eval_expr(problem.g, fb))

    root = np.broadcast_to(values[0], (n_uassign, n_qassign))
    return float(np.min(np.max(root, axis=1)))
