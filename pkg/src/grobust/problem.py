"""Control problem instances: coefficients, control grid, assumption probes.

A :class:`ControlProblem` bundles the horizon, state box, compact control
interval, volatility uncertainty set and the six coefficient expressions

    drift b(t,x,u), bracket drift h(t,x,u), diffusion sigma(t,x,u),
    running cost f(t,x,y,z,u), bracket cost g(t,x,y,z,u), payoff phi(x).

Coefficients must be Lipschitz in (x, y, z, u); since we only receive
expression trees, that is checked by randomized difference quotients at
construction time (a probe can falsify the assumption, never prove it).
Time regularity is probed separately and is advisory only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .expr import Expr, eval_expr, free_vars, parse_expr
from .gexp import GammaSet

__all__ = [
    "ControlProblem",
    "ProblemCatalogEntry",
    "LipschitzReport",
    "ContinuityReport",
    "lipschitz_probe",
    "continuity_in_t_probe",
    "estimate_lipschitz_in",
    "catalog",
]

# variables each coefficient slot may reference
SLOT_VARS = {
    "b": {"t", "x", "u"},
    "h": {"t", "x", "u"},
    "sigma": {"t", "x", "u"},
    "f": {"t", "x", "y", "z", "u"},
    "g": {"t", "x", "y", "z", "u"},
    "phi": {"x"},
}

DEFAULT_LIPSCHITZ_CEILING = 1e3


def _as_expr(e) -> Expr:
    return parse_expr(e) if isinstance(e, str) else e


@dataclass(frozen=True)
class ControlProblem:
    """One robust control problem on a 1-D state box with interval control set."""

    horizon: float
    x_min: float
    x_max: float
    u_min: float
    u_max: float
    n_u: int
    gamma: GammaSet
    b: Expr
    h: Expr
    sigma: Expr
    f: Expr
    g: Expr
    phi: Expr
    lipschitz_ceiling: float = DEFAULT_LIPSCHITZ_CEILING

    def __post_init__(self):
        for name in ("b", "h", "sigma", "f", "g", "phi"):
            object.__setattr__(self, name, _as_expr(getattr(self, name)))
        if not (self.horizon > 0.0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not (self.x_min < self.x_max):
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if not (self.u_min <= self.u_max):
            raise ValueError(f"need u_min <= u_max, got [{self.u_min}, {self.u_max}]")
        if self.n_u < 1:
            raise ValueError(f"n_u must be >= 1, got {self.n_u}")
        if self.gamma.dim != 1:
            raise ValueError("solvers are one-dimensional: gamma must have dim 1")
        for name in ("b", "h", "sigma", "f", "g", "phi"):
            used = free_vars(getattr(self, name))
            extra = used - SLOT_VARS[name]
            if extra:
                raise ValueError(
                    f"coefficient {name!r} uses variables {sorted(extra)} "
                    f"outside its allowed set {sorted(SLOT_VARS[name])}"
                )
        report = lipschitz_probe(self, n_samples=200, seed=0,
                                 ceiling=self.lipschitz_ceiling)
        if not report.passed:
            raise ValueError(
                "Lipschitz probe failed at construction: "
                + "; ".join(report.failures)
            )

    @property
    def u_grid(self) -> np.ndarray:
        if self.n_u == 1:
            return np.array([self.u_min])
        return np.linspace(self.u_min, self.u_max, self.n_u)

    def yz_scale(self) -> float:
        """Sampling scale for the unbounded y, z slots in probes."""
        return 2.0 * (1.0 + max(abs(self.x_min), abs(self.x_max)))


@dataclass(frozen=True)
class ProblemCatalogEntry:
    name: str
    problem: ControlProblem
    oracle: str  # "bsb-convex" | "bsb-concave" | "lq-riccati" | "none"


# ---------------------------------------------------------------------------
# assumption probes


@dataclass(frozen=True)
class LipschitzReport:
    constants: Dict[str, Dict[str, float]]  # coefficient -> slot -> estimate
    overall: Dict[str, float]               # coefficient -> max quotient
    passed: bool
    failures: Tuple[str, ...]


@dataclass(frozen=True)
class ContinuityReport:
    moduli: Dict[str, float]      # coefficient -> max |dc| / |dt|^(1/4)
    flagged: Tuple[str, ...]
    passed: bool


def _coef_slots(p: ControlProblem):
    yz = p.yz_scale()
    boxes = {
        "x": (p.x_min, p.x_max),
        "u": (p.u_min, p.u_max),
        "y": (-yz, yz),
        "z": (-yz, yz),
    }
    specs = [
        ("b", p.b, ("x", "u")),
        ("h", p.h, ("x", "u")),
        ("sigma", p.sigma, ("x", "u")),
        ("f", p.f, ("x", "u", "y", "z")),
        ("g", p.g, ("x", "u", "y", "z")),
        ("phi", p.phi, ("x",)),
    ]
    return boxes, specs


def lipschitz_probe(p: ControlProblem, n_samples: int = 200, seed: int = 0,
                    ceiling: Optional[float] = None) -> LipschitzReport:
    """Randomized difference-quotient estimate of the Lipschitz constants.

    For each coefficient and each of its (x, u, y, z) slots, sample pairs
    that differ in that slot only and record the largest quotient; joint
    perturbations are sampled as well.  Fails on any non-finite value or a
    quotient above ``ceiling``.
    """
    if n_samples < 100:
        raise ValueError("lipschitz_probe needs n_samples >= 100")
    ceiling = p.lipschitz_ceiling if ceiling is None else ceiling
    rng = np.random.default_rng(seed)
    boxes, specs = _coef_slots(p)
    constants: Dict[str, Dict[str, float]] = {}
    overall: Dict[str, float] = {}
    failures: List[str] = []

    for name, expr, slots in specs:
        per_slot: Dict[str, float] = {}
        has_t = name != "phi"
        ts = rng.uniform(0.0, p.horizon, size=n_samples)

        def base_sample():
            point = {}
            if has_t:
                point["t"] = None  # filled per draw
            for s in slots:
                lo, hi = boxes[s]
                point[s] = rng.uniform(lo, hi, size=n_samples)
            return point

        base = base_sample()
        if has_t:
            base["t"] = ts
        worst = 0.0
        for vary in slots:
            lo, hi = boxes[vary]
            span = hi - lo
            if span == 0.0:
                per_slot[vary] = 0.0
                continue
            alt = rng.uniform(lo, hi, size=n_samples)
            dv = np.abs(alt - base[vary])
            keep = dv > 1e-6 * span
            b1 = dict(base)
            b2 = dict(base)
            b2[vary] = alt
            try:
                v1 = np.asarray(eval_expr(expr, b1), dtype=float)
                v2 = np.asarray(eval_expr(expr, b2), dtype=float)
            except Exception as exc:  # noqa: BLE001 - report, do not crash
                failures.append(f"{name}: evaluation failed ({exc})")
                per_slot[vary] = float("inf")
                worst = float("inf")
                continue
            v1 = np.broadcast_to(v1, dv.shape)
            v2 = np.broadcast_to(v2, dv.shape)
            if not (np.all(np.isfinite(v1[keep])) and np.all(np.isfinite(v2[keep]))):
                failures.append(f"{name}: non-finite value while varying {vary}")
                per_slot[vary] = float("inf")
                worst = float("inf")
                continue
            quot = np.abs(v2[keep] - v1[keep]) / dv[keep]
            est = float(np.max(quot)) if quot.size else 0.0
            per_slot[vary] = est
            worst = max(worst, est)
            if est > ceiling:
                failures.append(
                    f"{name}: difference quotient {est:.3g} in {vary} "
                    f"exceeds ceiling {ceiling:g}"
                )
        constants[name] = per_slot
        overall[name] = worst

    return LipschitzReport(constants=constants, overall=overall,
                           passed=not failures, failures=tuple(failures))


def continuity_in_t_probe(p: ControlProblem, n_samples: int = 200,
                          seed: int = 0, ceiling: Optional[float] = None
                          ) -> ContinuityReport:
    """Probe time continuity of the coefficients (advisory, never fatal).

    Evaluates each time-dependent coefficient along a fine deterministic time
    grid at random frozen (x, u, y, z) anchors and flags consecutive jumps
    larger than ``ceiling * |dt|^(1/4)`` or non-finite values.
    """
    ceiling = p.lipschitz_ceiling if ceiling is None else ceiling
    rng = np.random.default_rng(seed)
    boxes, specs = _coef_slots(p)
    n_grid = 512
    tg = np.linspace(0.0, p.horizon, n_grid)
    dt_q = (tg[1] - tg[0]) ** 0.25
    moduli: Dict[str, float] = {}
    flagged: List[str] = []
    n_anchors = max(4, n_samples // 64)

    for name, expr, slots in specs:
        if name == "phi" or "t" not in free_vars(expr):
            moduli[name] = 0.0
            continue
        worst = 0.0
        bad = False
        for _ in range(n_anchors):
            bind = {"t": tg}
            for s in slots:
                lo, hi = boxes[s]
                bind[s] = float(rng.uniform(lo, hi))
            try:
                vals = np.broadcast_to(
                    np.asarray(eval_expr(expr, bind), dtype=float), tg.shape
                )
            except Exception:  # noqa: BLE001
                bad = True
                break
            if not np.all(np.isfinite(vals)):
                bad = True
                worst = float("inf")
                break
            jumps = np.abs(np.diff(vals)) / dt_q
            worst = max(worst, float(np.max(jumps)))
        moduli[name] = worst
        if bad or worst > ceiling:
            flagged.append(name)

    return ContinuityReport(moduli=moduli, flagged=tuple(flagged),
                            passed=not flagged)


def estimate_lipschitz_in(p: ControlProblem, coef: str, var: str,
                          n_samples: int = 200, seed: int = 1) -> float:
    """Sampled Lipschitz constant of one coefficient in one variable slot."""
    report = lipschitz_probe(p, n_samples=max(100, n_samples), seed=seed,
                             ceiling=float("inf"))
    return report.constants[coef].get(var, 0.0)


# ---------------------------------------------------------------------------
# benchmark catalog


def _bsb_base(phi: str, f: str = "0", g: str = "0") -> ControlProblem:
    return ControlProblem(
        horizon=1.0, x_min=0.01, x_max=4.0,
        u_min=0.0, u_max=0.0, n_u=1,
        gamma=GammaSet.interval(0.5, 1.0),
        b="0", h="0", sigma="x", f=f, g=g, phi=phi,
    )


def catalog() -> List[ProblemCatalogEntry]:
    """Built-in benchmark problems used throughout the validation suite.

    * ``bsb-call``:    uncertain-volatility call; convex payoff, so the worst
      case is the high volatility and the classical closed form applies.
    * ``bsb-concave``: negated call payoff; the worst case flips to the low
      volatility endpoint.
    * ``lq``:          singleton volatility linear-quadratic control with a
      nontrivial optimal feedback and a quadratic-plus-log closed form.
    * ``recursive-g``: call payoff with a recursive driver in y and a
      quadratic-variation driver in z.
    """
    entries = [
        ProblemCatalogEntry("bsb-call", _bsb_base("pos(x-1)"), "bsb-convex"),
        ProblemCatalogEntry("bsb-concave", _bsb_base("-pos(x-1)"), "bsb-concave"),
        ProblemCatalogEntry(
            "lq",
            ControlProblem(
                horizon=1.0, x_min=-2.0, x_max=2.0,
                u_min=-4.0, u_max=4.0, n_u=81,
                gamma=GammaSet.interval(1.0, 1.0),
                b="u", h="0", sigma="1", f="u^2", g="0", phi="x^2",
            ),
            "lq-riccati",
        ),
        ProblemCatalogEntry(
            "recursive-g", _bsb_base("pos(x-1)", f="-0.1*y", g="0.05*z"), "none"
        ),
    ]
    return entries


def catalog_entry(name: str) -> ProblemCatalogEntry:
    for entry in catalog():
        if entry.name == name:
            return entry
    known = ", ".join(e.name for e in catalog())
    raise KeyError(f"unknown catalog entry {name!r} (known: {known})")
