import numpy as np
import pytest

from cornermass import masses
from cornermass.corner import scenario_build
from cornermass.geometry import RadialPatch, flat_metric_profile
from cornermass.harmonic import (SolveOptions, boundary_formula_check,
                                 integral_formula_check, mass_bound_report,
                                 mass_bound_sweep, solve_spacetime_harmonic,
                                 spacetime_hessian)
from cornermass.harmonic.fields import (AxisymField, build_coefficients,
                                        build_solver_grid)
from cornermass.numgrid import ScalarProfile

ADM_RADII = [50.0, 100.0, 200.0]


def zero(dom):
    return ScalarProfile.constant(0.0, dom)


@pytest.fixture(scope="module")
def flat_field():
    data = scenario_build("flat")
    return data, solve_spacetime_harmonic(data, n_r=32, n_theta=32, L=20.0)


class TestSolver:
    def test_flat_exact(self, flat_field):
        data, fld = flat_field
        R, X = np.meshgrid(fld.grid.r, fld.grid.x, indexing="ij")
        assert np.max(np.abs(fld.values - R * X)) <= 1e-8

    def test_schwarzschild_linear_single_step(self):
        data = scenario_build("schwarzschild", m=1.0)
        fld = solve_spacetime_harmonic(data, n_r=32, n_theta=32, L=30.0)
        # K = 0: the first linear solve is already the answer; the second
        # Picard pass only confirms it
        assert len(fld.diagnostics["picard_changes"]) == 2
        assert fld.diagnostics["picard_changes"][-1] <= 1e-8 * 30.0
        assert fld.diagnostics["relaxation"]["residual"] <= 5e-9 * 30.0

    def test_maximum_principle(self):
        for name in ("flat", "schwarzschild", "hyperbolic_negschw"):
            data = scenario_build(name)
            fld = solve_spacetime_harmonic(data, n_r=24, n_theta=24, L=15.0)
            assert fld.diagnostics["max_principle_violation"] <= 1e-10

    def test_harmonic_residual_after_convergence(self):
        # the solver's own (conservation-form) residual meets the
        # tolerance; an independent collocation evaluation of
        # Delta u + K |grad u|_delta converges to zero under refinement
        data = scenario_build("hyperbolic_negschw")
        g_norms = []
        for n in (24, 48):
            fld = solve_spacetime_harmonic(data, n_r=n, n_theta=n, L=15.0)
            assert fld.diagnostics["relaxation"]["residual"] <= 5e-10 * 15.0
            G = fld.laplacian() + fld.coeffs.K[:, None] * fld.grad_norm()
            i_c = fld.coeffs.corner_indices[0]
            interior = np.delete(G[1:-1, 1:-1], i_c - 1, axis=0)
            g_norms.append(float(np.max(np.abs(interior))))
        assert g_norms[1] <= 0.5 * g_norms[0]

    def test_picard_contraction(self):
        for n in (24, 32):
            data = scenario_build("hyperbolic_negschw")
            fld = solve_spacetime_harmonic(data, n_r=n, n_theta=n, L=15.0)
            changes = fld.diagnostics["picard_changes"][3:]
            assert all(b <= a * (1 + 1e-9)
                       for a, b in zip(changes, changes[1:]))

    def test_kappa_shell_sign(self):
        # K = const on a thin shell shifts u by a term whose sign matches
        # the sign of K (the inverse Laplacian of -K|grad u| is positive
        # for positive K)
        for kappa in (+0.4, -0.4):
            dom = (0.0, 260.0)
            b = ScalarProfile.from_callables(
                lambda r, k=kappa: np.where(
                    (np.asarray(r) >= 1.5) & (np.asarray(r) <= 2.0),
                    k / 3.0, 0.0), domain=dom)
            patch = RadialPatch(flat_metric_profile(260.0), b, b, 0.0, 260.0)
            data = scenario_build("custom", patches=[patch],
                                  label="flat_shell")
            fld = solve_spacetime_harmonic(data, n_r=32, n_theta=32, L=12.0)
            R, X = np.meshgrid(fld.grid.r, fld.grid.x, indexing="ij")
            w = fld.values - R * X
            sel = (R < 6.0) & (np.abs(X) < 0.95)
            assert np.sign(np.mean(w[sel])) == np.sign(kappa)
            assert np.max(np.abs(w)) > 1e-3

    def test_trapped_boundary_sign_report(self):
        data = scenario_build("schwarzschild", m=1.0)
        fld = solve_spacetime_harmonic(data, n_r=32, n_theta=32, L=30.0)
        diag = fld.diagnostics
        assert diag["inner_mode"] == "trapped_const"
        assert diag["inner_theta_plus"] <= 0.0
        assert "min" in diag["inner_normal_derivative"]

    def test_direction_flip(self):
        data = scenario_build("schwarzschild", m=1.0)
        up = solve_spacetime_harmonic(data, n_r=24, n_theta=24, L=20.0)
        dn = solve_spacetime_harmonic(
            data, n_r=24, n_theta=24, L=20.0,
            options=SolveOptions(direction=-1))
        # K = 0 and constant inner data 0: the problem is odd-symmetric
        assert np.max(np.abs(up.values + dn.values)) <= 1e-7

    def test_incompatible_inner_mode(self):
        data = scenario_build("schwarzschild", m=1.0)
        with pytest.raises(ValueError):
            solve_spacetime_harmonic(
                data, n_r=24, n_theta=24, L=20.0,
                options=SolveOptions(inner="center"))

    def test_picard_stagnation_reports_history(self):
        from cornermass.errors import PicardStagnationError
        data = scenario_build("hyperbolic_negschw")
        with pytest.raises(PicardStagnationError) as exc:
            solve_spacetime_harmonic(
                data, n_r=24, n_theta=24, L=15.0,
                options=SolveOptions(max_picard=3))
        assert len(exc.value.history) == 3


class TestHessian:
    def test_flat_z_zero(self, flat_field):
        data, fld = flat_field
        hes = spacetime_hessian(fld)
        assert np.max(hes.norm_sq) <= 1e-12

    def test_construction_identity(self):
        data = scenario_build("hyperbolic_negschw")
        fld = solve_spacetime_harmonic(data, n_r=24, n_theta=24, L=10.0)
        hes = spacetime_hessian(fld)
        gn = fld.grad_norm_plain()
        a = fld.coeffs.a[:, None]
        b = fld.coeffs.b[:, None]
        for comp, kk in (("rr", a), ("tt", b), ("pp", b)):
            diff = hes.full[comp] - hes.pure[comp] - gn * kk
            assert np.max(np.abs(diff)) <= 1e-12
        assert np.max(np.abs(hes.full["rt"] - hes.pure["rt"])) == 0.0

    def test_flat_k_cg_norm(self):
        c_amp = 0.7
        dom = (0.0, 260.0)
        patch = RadialPatch(flat_metric_profile(260.0),
                            ScalarProfile.constant(c_amp, dom),
                            ScalarProfile.constant(c_amp, dom), 0.0, 260.0)
        data = scenario_build("custom", patches=[patch], label="flat_kcg")
        grid = build_solver_grid(data, 24, 24, 10.0)
        coeffs = build_coefficients(data, grid, "areal")
        fld = AxisymField.from_function(coeffs, lambda R, X: R * X)
        hes = spacetime_hessian(fld)
        # |grad u| = 1 so |sHu|^2 = c^2 |g|^2 = 3 c^2 everywhere
        assert np.max(np.abs(hes.norm_sq - 3 * c_amp**2)) <= 1e-10

    def test_fd_quadratic_exact(self):
        data = scenario_build("flat")
        grid = build_solver_grid(data, 24, 24, 10.0)
        coeffs = build_coefficients(data, grid, "areal")
        fld = AxisymField.from_function(coeffs, lambda R, X: R * R * X)
        d = fld._derivs()
        R, X = np.meshgrid(grid.r, grid.x, indexing="ij")
        assert np.max(np.abs(d["u_rr"] - 2 * X)) <= 1e-10
        assert np.max(np.abs(d["u_rx"] - 2 * R)) <= 1e-10
        assert np.max(np.abs(d["u_xx"])) <= 1e-9

    def test_fd_vs_analytic_order(self):
        data = scenario_build("flat")
        errs = []
        for n in (32, 64, 128):
            grid = build_solver_grid(data, n, n, 10.0)
            coeffs = build_coefficients(data, grid, "areal")
            fld = AxisymField.from_function(
                coeffs, lambda R, X: R**4 * X**3 / 100.0)
            d = fld._derivs()
            R, X = np.meshgrid(grid.r, grid.x, indexing="ij")
            interior = (slice(1, -1), slice(1, -1))
            err = max(
                np.max(np.abs(d["u_rr"] - 12 * R**2 * X**3 / 100)[interior]),
                np.max(np.abs(d["u_xx"] - 6 * R**4 * X / 100)[interior]),
                np.max(np.abs(d["u_rx"] - 12 * R**3 * X**2 / 100)[interior]))
            errs.append(err)
        order1 = np.log2(errs[0] / errs[1])
        order2 = np.log2(errs[1] / errs[2])
        assert order1 >= 1.5 and order2 >= 1.5

    def test_mixed_partials_commute(self):
        data = scenario_build("flat")
        grid = build_solver_grid(data, 16, 16, 10.0)
        coeffs = build_coefficients(data, grid, "areal")
        rng = np.random.RandomState(0)
        vals = rng.standard_normal((grid.n_r, grid.n_theta))
        from cornermass.harmonic.fields import _d_r, _d_x
        a = _d_r(_d_x(vals, grid, 1), grid, coeffs.segments, 1)
        b = _d_x(_d_r(vals, grid, coeffs.segments, 1), grid, 1)
        assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))


class TestMassBound:
    def test_flat_slack_zero(self, flat_field):
        data, fld = flat_field
        adm = masses.adm_energy_momentum(data, ADM_RADII)
        rep = mass_bound_report(data, fld, adm, +1)
        assert abs(rep.slack) <= 1e-8
        assert rep.corner == 0.0
        assert rep.verdict

    def test_schwarzschild_positive_slack(self):
        data = scenario_build("schwarzschild", m=1.0)
        adm = masses.adm_energy_momentum(data, ADM_RADII)
        rep = mass_bound_sweep(data, adm, resolutions=(32, 64), L=40.0)
        assert rep.slack > 0
        assert rep.verdict
        assert not rep.corner_hypothesis_violated

    def test_counterexample_books(self):
        data = scenario_build("hyperbolic_negschw")
        adm = masses.adm_energy_momentum(data, ADM_RADII)
        fld = solve_spacetime_harmonic(data, n_r=48, n_theta=48, L=30.0)
        rep = mass_bound_report(data, fld, adm, +1)
        assert rep.lhs == pytest.approx(16 * np.pi * (-0.5), rel=1e-4)
        assert rep.corner < 0
        assert rep.bulk >= 0
        assert rep.corner_hypothesis_violated
        assert rep.corner_jumps[0] == pytest.approx(-2.0, abs=1e-10)

    def test_counterexample_books_balance(self):
        # lhs - bulk - corner settles to zero within the tracked
        # outer-truncation scale: the deficit is carried by the corner
        data = scenario_build("hyperbolic_negschw")
        adm = masses.adm_energy_momentum(data, ADM_RADII)
        rep = mass_bound_sweep(data, adm, resolutions=(48, 96), L=30.0)
        assert abs(rep.slack) <= rep.outer_truncation_scale \
            + (rep.epsilon_grid or 0.0) + 1e-3
        assert rep.verdict

    def test_negschw_k_sign_flip_same_books(self):
        adm = masses.adm_energy_momentum(
            scenario_build("hyperbolic_negschw"), ADM_RADII)
        corners = []
        for sign in (1, -1):
            data = scenario_build("hyperbolic_negschw", k_sign=sign)
            fld = solve_spacetime_harmonic(data, n_r=32, n_theta=32, L=15.0)
            rep = mass_bound_report(data, fld, adm, +1)
            corners.append(rep.corner)
        assert corners[0] < 0 and corners[1] < 0


class TestBoundaryFormula:
    def test_flat_z_closures(self, flat_field):
        data, fld = flat_field
        closures = {
            "u": lambda r, x: r * x,
            "u_r": lambda r, x: np.asarray(x, float),
            "u_x": lambda r, x: np.full_like(np.asarray(x, float), r),
            "u_rr": lambda r, x: np.zeros_like(np.asarray(x, float)),
            "u_rx": lambda r, x: np.ones_like(np.asarray(x, float)),
            "u_xx": lambda r, x: np.zeros_like(np.asarray(x, float)),
        }
        inj = AxisymField(fld.coeffs, fld.values, closures=closures)
        rep = boundary_formula_check(data, inj, 1.0)
        assert abs(rep.lhs - rep.rhs) <= 1e-6
        assert abs(rep.residual) <= 1e-10
        assert rep.terms["minus_H_grad"] == pytest.approx(-8 * np.pi,
                                                          abs=1e-9)
        assert rep.terms["kappa_coarea"] == pytest.approx(4 * np.pi,
                                                          abs=1e-9)

    def test_radial_injection_reduces(self):
        # u = u(r): the tangential branch vanishes and the identity
        # reduces to the constant-trace form
        data = scenario_build("schwarzschild", m=1.0)
        grid = build_solver_grid(data, 32, 32, 30.0, r_inner=3.0)
        coeffs = build_coefficients(data, grid, "areal")
        zeros = lambda r, x: np.zeros_like(np.asarray(x, float))
        closures = {
            "u": lambda r, x: 1.0 / r + 0.0 * np.asarray(x, float),
            "u_r": lambda r, x: np.full_like(np.asarray(x, float),
                                             -1.0 / r**2),
            "u_rr": lambda r, x: np.full_like(np.asarray(x, float),
                                              2.0 / r**3),
            "u_x": zeros, "u_rx": zeros, "u_xx": zeros,
        }
        fld = AxisymField.from_function(coeffs, lambda R, X: 1.0 / R,
                                        closures=closures)
        rep = boundary_formula_check(data, fld, 5.0)
        for name in ("kappa_coarea", "grad_eta_nu_u", "turning",
                     "laplacian_eta"):
            assert abs(rep.terms[name]) <= 1e-10
        assert abs(rep.residual) <= 1e-9

    def test_corner_sphere_side_selection(self):
        # each side of the counterexample corner satisfies its own
        # identity with the shared field; one-sided stencils at the kink
        # are first order, so the residual halves under refinement
        data = scenario_build("hyperbolic_negschw")
        res = {}
        for n in (48, 96):
            fld = solve_spacetime_harmonic(data, n_r=n, n_theta=n, L=15.0)
            for side in ("minus", "plus"):
                rep = boundary_formula_check(data, fld, 1.0, side=side)
                res[(side, n)] = abs(rep.residual)
                assert abs(rep.residual) <= 0.05 * abs(rep.terms[
                    "minus_H_grad"]), (side, n)
        assert res[("minus", 96)] <= 0.6 * res[("minus", 48)]

    def test_pole_exclusion_flag_on_coarse_grid(self):
        # at M = 8 the two excluded pole rows carry > 1% of the measure
        data = scenario_build("schwarzschild", m=1.0)
        grid = build_solver_grid(data, 16, 8, 30.0, r_inner=3.0)
        coeffs = build_coefficients(data, grid, "areal")
        fld = AxisymField.from_function(coeffs, lambda R, X: R * X)
        rc = grid.r[len(grid.r) // 2]
        rep = boundary_formula_check(data, fld, rc)
        assert rep.excluded_measure > 0.01
        assert rep.excluded_flagged

    def test_random_injection_theta_order(self):
        rng = np.random.RandomState(7)
        coef = rng.uniform(-1, 1, 5)
        alpha, beta = rng.uniform(0.5, 1.5, 2)

        def u_fn(R, X):
            return (alpha * R + beta) * sum(
                c * X**k for k, c in enumerate(coef))

        data = scenario_build("schwarzschild", m=1.0)
        residuals = []
        for M in (32, 64, 128):
            grid = build_solver_grid(data, M, M, 40.0, r_inner=3.0)
            coeffs = build_coefficients(data, grid, "areal")
            fld = AxisymField.from_function(coeffs, u_fn)
            rc = grid.r[np.argmin(np.abs(grid.r - 5.0))]
            rep = boundary_formula_check(data, fld, rc)
            assert not rep.excluded_flagged
            residuals.append(abs(rep.residual))
        orders = [np.log2(residuals[i] / residuals[i + 1]) for i in range(2)]
        assert min(orders) >= 1.7


class TestIntegralFormula:
    def test_flat_ball_both_sides_zero(self, flat_field):
        data, fld = flat_field
        r_hi = fld.grid.r[np.argmin(np.abs(fld.grid.r - 10.0))]
        rep = integral_formula_check(data, fld, (None, r_hi))
        assert abs(rep.lhs) <= 1e-10
        assert abs(rep.rhs) <= 1e-9
        assert rep.inequality_ok()

    def test_schwarzschild_annulus_refinement(self):
        data = scenario_build("schwarzschild", m=1.0)
        residuals = []
        for n in (48, 96):
            grid = build_solver_grid(data, n, n, 40.0, r_inner=3.0)
            fld = solve_spacetime_harmonic(
                data, grid=grid, options=SolveOptions(inner="trapped_const"))
            ra = grid.r[np.argmin(np.abs(grid.r - 4.0))]
            rb = grid.r[np.argmin(np.abs(grid.r - 8.0))]
            rep = integral_formula_check(data, fld, (ra, rb))
            residuals.append(abs(rep.residual))
            assert rep.lhs + rep.defect <= rep.rhs + 2.0 * abs(rep.residual) \
                + 1e-8
        assert residuals[1] <= 0.5 * residuals[0]

    def test_flat_k_injection_shifts_consistently(self):
        c_amp = 0.3
        dom = (0.0, 260.0)
        patch = RadialPatch(flat_metric_profile(260.0),
                            ScalarProfile.constant(c_amp, dom),
                            ScalarProfile.constant(c_amp, dom), 0.0, 260.0)
        data = scenario_build("custom", patches=[patch], label="flat_kcg")
        grid = build_solver_grid(data, 48, 48, 20.0)
        coeffs = build_coefficients(data, grid, "areal")
        fld = AxisymField.from_function(coeffs, lambda R, X: R * X)
        r_hi = grid.r[np.argmin(np.abs(grid.r - 6.0))]
        rep = integral_formula_check(data, fld, (None, r_hi))
        vol = 4.0 / 3.0 * np.pi * r_hi**3
        assert rep.lhs == pytest.approx(4.5 * c_amp**2 * vol, rel=1e-3)
        assert rep.defect == pytest.approx(-rep.lhs, rel=1e-9)
        assert abs(rep.residual) <= 1e-9

    def test_region_must_avoid_corners(self):
        from cornermass.errors import DomainError
        data = scenario_build("hyperbolic_negschw")
        fld = solve_spacetime_harmonic(data, n_r=24, n_theta=24, L=10.0)
        lo = fld.grid.r[2]
        hi = fld.grid.r[-3]
        with pytest.raises(DomainError):
            integral_formula_check(data, fld, (lo, hi))


class TestFieldExport:
    def test_csv(self, flat_field, tmp_path):
        data, fld = flat_field
        path = tmp_path / "field.csv"
        fld.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,theta,u,grad_norm"
        assert len(lines) == 1 + fld.grid.n_r * fld.grid.n_theta
