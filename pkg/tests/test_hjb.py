"""Hamiltonian assembly, CFL bound, monotone scheme properties."""

import math

import numpy as np
import pytest

from grobust.gexp import GammaSet
from grobust.grids import Grid1D
from grobust.hjb import (CFLViolationError, HamiltonianInputs, SchemeParams,
                         cfl_max_dt, f_term, hamiltonian, hjb_residual,
                         hjb_time_stepping, solve_hjb)
from grobust.lattice import solve_dpp
from grobust.problem import ControlProblem, catalog_entry
from grobust.analysis import closed_form_field


def make(sigma="1", gamma=None, f="0", g="0", b="0", h="0", phi="x",
         box=(-2.0, 2.0), controls=(0.0, 0.0, 1)):
    return ControlProblem(
        horizon=1.0, x_min=box[0], x_max=box[1],
        u_min=controls[0], u_max=controls[1], n_u=controls[2],
        gamma=gamma or GammaSet.interval(1.0, 1.0),
        b=b, h=h, sigma=sigma, f=f, g=g, phi=phi)


class TestHamiltonianAssembly:
    def test_f_term_pure_diffusion(self):
        p = make(sigma="1")
        inp = HamiltonianInputs(t=0.0, x=0.0, v=0.0, p=0.0, a=2.0, u=0.0)
        assert f_term(inp, p) == 2.0

    def test_f_term_with_bracket_drift(self):
        p = make(sigma="2", h="0.5")
        inp = HamiltonianInputs(t=0.0, x=0.0, v=0.0, p=1.0, a=1.0, u=0.0)
        assert f_term(inp, p) == 5.0  # sigma^2 A + 2 p h = 4 + 1

    def test_f_term_with_z_driver(self):
        p = make(sigma="1", g="0.05*z")
        inp = HamiltonianInputs(t=0.0, x=0.0, v=0.0, p=2.0, a=0.0, u=0.0)
        assert f_term(inp, p) == pytest.approx(0.2, abs=1e-15)  # 2*0.05*(sigma p)

    def test_hamiltonian_worst_case_diffusion(self):
        p = make(sigma="x", gamma=GammaSet.interval(0.5, 1.0), box=(0.01, 4.0))
        inp = HamiltonianInputs(t=0.0, x=1.0, v=0.0, p=0.0, a=2.0, u=0.0)
        assert hamiltonian(inp, p) == 1.0  # G(2) at [0.5, 1]

    def test_hamiltonian_lq_entry(self):
        p = catalog_entry("lq").problem
        inp = HamiltonianInputs(t=0.0, x=0.0, v=0.0, p=1.0, a=0.0, u=1.0)
        assert hamiltonian(inp, p) == 2.0  # u p + u^2

    def test_hamiltonian_negative_curvature(self):
        p = make(sigma="1", gamma=GammaSet.interval(0.5, 1.0))
        inp = HamiltonianInputs(t=0.0, x=0.0, v=0.0, p=0.0, a=-2.0, u=0.0)
        assert hamiltonian(inp, p) == pytest.approx(-0.25, abs=1e-15)

    def test_inputs_must_be_finite(self):
        with pytest.raises(ValueError):
            HamiltonianInputs(t=0.0, x=math.inf, v=0.0, p=0.0, a=0.0, u=0.0)


class TestCfl:
    def test_pure_diffusion_bound(self):
        p = make(sigma="1")
        grid = Grid1D(-2.0, 2.0, 41)  # dx = 0.1
        assert cfl_max_dt(p, grid) == pytest.approx(0.01, rel=1e-12)

    def test_quadruples_with_dx_in_diffusion_regime(self):
        p = make(sigma="1")
        fine = cfl_max_dt(p, Grid1D(-2.0, 2.0, 81))
        coarse = cfl_max_dt(p, Grid1D(-2.0, 2.0, 41))
        assert coarse == pytest.approx(4.0 * fine, rel=1e-10)

    def test_lq_positive_finite(self):
        p = catalog_entry("lq").problem
        bound = cfl_max_dt(p, Grid1D(-2.0, 2.0, 201))
        assert 0.0 < bound < math.inf

    def test_degenerate_rejected(self):
        p = make(sigma="0", b="0")
        with pytest.raises(ValueError):
            cfl_max_dt(p, Grid1D(-2.0, 2.0, 41))

    def test_explicit_dt_above_bound_rejected(self):
        p = make(sigma="1")
        sp = SchemeParams(grid=Grid1D(-2.0, 2.0, 41), cfl_theta=0.9, dt=0.5)
        with pytest.raises(CFLViolationError):
            hjb_time_stepping(p, sp)


class TestSolveHjb:
    def test_linear_payoff_is_invariant(self):
        # linear data has zero second difference everywhere (ghosts included)
        # and no transport terms; rows equal the payoff up to the 1-ulp noise
        # of the grid nodes themselves not being an exact progression
        p = make(sigma="1", gamma=GammaSet.interval(0.5, 1.0), phi="x")
        grid = Grid1D(-2.0, 2.0, 61)
        field = solve_hjb(p, SchemeParams(grid=grid, n_t_out=40))
        assert np.max(np.abs(field.values - grid.nodes[None, :])) < 1e-13

    def test_stencil_exact_quadratic_pure_diffusion(self):
        # one explicit step on quadratic data with constant coefficients:
        # central A is exact and no gradient enters the Hamiltonian, so the
        # update carries zero spatial truncation error at interior nodes
        from grobust.hjb import _StepWorkspace, _hjb_step
        p = make(sigma="1", gamma=GammaSet.interval(1.0, 1.0), phi="x^2")
        grid = Grid1D(-2.0, 2.0, 41)
        W = grid.nodes ** 2
        dt = 0.004
        ws = _StepWorkspace(p, grid, p.u_grid)
        out = _hjb_step(ws, W, 0.5, dt)
        expect = W + dt * 1.0  # G(sigma^2 Vxx) = G(2) = 1
        assert np.max(np.abs(out - expect)[1:-1]) < 1e-13

    def test_stencil_exact_linear_with_drift(self):
        # linear data + constant drift: upwind gradient is exact on linear
        # parts and A vanishes, so the step is exact everywhere
        p = make(sigma="1", b="0.5", phi="x")
        grid = Grid1D(-2.0, 2.0, 41)
        field = solve_hjb(p, SchemeParams(grid=grid, n_t_out=10))
        expect = grid.nodes[None, :] + 0.5 * (
            p.horizon - field.times[:, None])
        assert np.max(np.abs(field.values - expect)) < 1e-12

    def test_monotone_perturbation_exact(self):
        from grobust.hjb import _StepWorkspace, _hjb_step
        rng = np.random.default_rng(8)
        for name in ("bsb-call", "lq"):
            p = catalog_entry(name).problem
            grid = Grid1D(p.x_min, p.x_max, 100)
            sp = SchemeParams(grid=grid, cfl_theta=0.9, n_t_out=50)
            _, _, dt_int, _ = hjb_time_stepping(p, sp)
            field = solve_hjb(p, sp)
            ws = _StepWorkspace(p, grid, p.u_grid)
            for _ in range(100):
                k = int(rng.integers(0, field.n_rows - 1))
                j = int(rng.integers(0, grid.n_x))
                W = field.values[k + 1].copy()
                base = _hjb_step(ws, W, k * field.dt, dt_int)
                W[j] += float(rng.uniform(1e-8, 1.0))
                pert = _hjb_step(ws, W, k * field.dt, dt_int)
                assert np.min(pert - base) >= 0.0

    def test_comparison_principle_on_catalog_pair(self):
        call = catalog_entry("bsb-call").problem
        concave = catalog_entry("bsb-concave").problem
        grid = Grid1D(0.01, 4.0, 100)
        lo = solve_hjb(concave, SchemeParams(grid=grid, n_t_out=50))
        hi = solve_hjb(call, SchemeParams(grid=grid, n_t_out=50))
        assert np.all(lo.values <= hi.values + 1e-14)

    def test_cost_scaling_invariance(self):
        # with g = 0 and a (y, z)-free running cost, scaling the cost and the
        # payoff scales the whole field; exact for a power-of-two factor
        base = catalog_entry("lq").problem
        scaled = ControlProblem(
            horizon=1.0, x_min=-2.0, x_max=2.0, u_min=-4.0, u_max=4.0,
            n_u=81, gamma=GammaSet.interval(1.0, 1.0),
            b="u", h="0", sigma="1", f="2*u^2", g="0", phi="2*x^2")
        grid = Grid1D(-2.0, 2.0, 81)
        f1 = solve_hjb(base, SchemeParams(grid=grid, n_t_out=20))
        f2 = solve_hjb(scaled, SchemeParams(grid=grid, n_t_out=20))
        assert np.max(np.abs(f2.values - 2.0 * f1.values)) <= 1e-12

    def test_recursive_drivers_run(self):
        p = catalog_entry("recursive-g").problem
        grid = Grid1D(0.01, 4.0, 80)
        field = solve_hjb(p, SchemeParams(grid=grid, n_t_out=40))
        assert np.all(np.isfinite(field.values))


class TestHjbResidual:
    def test_zero_on_own_output_without_substepping(self):
        p = catalog_entry("lq").problem
        grid = Grid1D(-2.0, 2.0, 51)
        sp = SchemeParams(grid=grid, cfl_theta=0.9)  # rows = internal steps
        _, m_sub, _, _ = hjb_time_stepping(p, sp)
        assert m_sub == 1
        field = solve_hjb(p, sp)
        assert hjb_residual(field, p) == 0.0

    def test_zero_on_constant_field(self):
        p = make(sigma="x", gamma=GammaSet.interval(0.5, 1.0),
                 box=(0.01, 4.0), phi="3.0")
        grid = Grid1D(0.01, 4.0, 60)
        field = solve_hjb(p, SchemeParams(grid=grid, n_t_out=30))
        assert np.all(field.values == 3.0)
        assert hjb_residual(field, p) == 0.0

    def test_truncation_on_smooth_closed_form(self):
        # measured stencil truncation of the quadratic-plus-log closed form
        p = catalog_entry("lq").problem
        grid = Grid1D(-2.0, 2.0, 400)
        field = closed_form_field("lq-riccati", p, grid, 200)
        assert hjb_residual(field, p) <= 1e-2


def test_control_refinement_gap_small_for_lq():
    from grobust.hjb import control_refinement_gap
    p = catalog_entry("lq").problem
    sp = SchemeParams(grid=Grid1D(-2.0, 2.0, 101), cfl_theta=0.9, n_t_out=50,
                      n_u=41)
    gap = control_refinement_gap(p, sp, ((0.0, 1.0), (0.0, -0.5)))
    assert 0.0 <= gap <= 5e-3  # quadratic-in-du control error


def test_solver_agreement_fixed_resolution():
    # both routes within 0.05 of each other on the interior two-thirds
    for name in ("bsb-call", "lq"):
        p = catalog_entry(name).problem
        grid = Grid1D(p.x_min, p.x_max, 150)
        K = 75
        lat = solve_dpp(p, grid, K)
        hjb = solve_hjb(p, SchemeParams(grid=grid, cfl_theta=0.9, n_t_out=K))
        n = grid.n_x
        sl = slice(n // 6, n - n // 6)
        gap = float(np.max(np.abs(lat.values[:, sl] - hjb.values[:, sl])))
        assert gap <= 0.05, (name, gap)
