import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alarmtaxis.model import (
    CutoffSpec, ParameterError, Params, StateTriple,
    kinetics_ode, lipschitz_bound, ode_oracle,
    reaction_f, reaction_g, reaction_h, reaction_jacobian,
    sigma_eps, sigma_eps_prime, sigma_prime_bound, smooth_step, smooth_step_prime,
)
from alarmtaxis.grid import Field, GridSpec

coef = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)


class TestParams:
    def test_unit(self):
        p = Params.unit()
        assert p.eta1 == 0.5
        assert p.eta2 == 0.25
        assert p.lam_max == 1.0
        assert p.mu_min == 1.0

    def test_xi_zero_allowed(self):
        Params.unit(xi=0.0)

    @pytest.mark.parametrize("key", ["d1", "chi", "lambda2", "mu3", "a1", "b3"])
    def test_positive_required(self, key):
        with pytest.raises(ParameterError):
            Params.unit(**{key: 0.0})

    def test_negative_xi_rejected(self):
        with pytest.raises(ParameterError):
            Params.unit(xi=-0.5)

    @given(coef, coef, coef, coef, coef, coef)
    @settings(max_examples=100, deadline=None)
    def test_eta_sign_conditions(self, a1, a2, a3, b1, b2, b3):
        p = Params.unit(a1=a1, a2=a2, a3=a3, b1=b1, b2=b2, b3=b3)
        assert 0 < p.eta1 < 1 and 0 < p.eta2 < 1
        assert p.b1 * p.eta1 <= p.a1
        assert p.b2 * p.eta2 <= p.a2
        assert p.b3 * p.eta2 <= p.a3 * p.eta1


class TestReactions:
    def test_f_vanishes_at_zero_prey(self):
        p = Params.unit()
        for v, w in [(0.0, 0.0), (2.0, 3.0), (10.0, 0.1)]:
            assert reaction_f(0.0, v, w, p) == 0.0

    def test_f_direct_substitution(self):
        p = Params.unit(lambda1=2.0)
        assert reaction_f(1.0, 0.0, 0.0, p) == 1.0

    def test_g_vanishes_at_zero_predator(self):
        p = Params.unit()
        assert reaction_g(1.5, 0.0, 2.0, p) == 0.0

    def test_g_direct_substitution(self):
        p = Params.unit()
        assert reaction_g(1.0, 1.0, 0.0, p) == 1.0

    def test_h_vanishes_at_zero(self):
        p = Params.unit()
        assert reaction_h(2.0, 2.0, 0.0, p) == 0.0

    def test_h_direct_substitution(self):
        p = Params.unit()
        assert reaction_h(1.0, 1.0, 1.0, p) == 2.0

    def test_unit_equilibrium_via_linear_solve(self):
        # interior equilibrium solves mu1 u + a1 v + a2 w = lam1 etc.;
        # for unit coefficients the solution is (0, 0, 1)
        p = Params.unit()
        A = np.array([[p.mu1, p.a1, p.a2],
                      [-p.b1, p.mu2, p.a3],
                      [-p.b2, -p.b3, p.mu3]])
        lam = np.array([p.lambda1, p.lambda2, p.lambda3])
        eq = np.linalg.solve(A, lam)
        np.testing.assert_allclose(eq, [0.0, 0.0, 1.0], atol=1e-14)
        assert reaction_f(*eq, p) == pytest.approx(0.0, abs=1e-14)
        assert reaction_g(*eq, p) == pytest.approx(0.0, abs=1e-14)
        assert reaction_h(*eq, p) == pytest.approx(0.0, abs=1e-14)

    def test_negative_input_rejected(self):
        p = Params.unit()
        for fn in (reaction_f, reaction_g, reaction_h):
            with pytest.raises(ValueError):
                fn(-0.1, 1.0, 1.0, p)

    def test_jacobian_matches_finite_differences(self):
        p = Params.unit(a1=2.0, b2=0.3, mu3=1.7)
        rng = np.random.default_rng(5)
        delta = 1e-6
        for _ in range(10):
            u, v, w = rng.uniform(0.1, 3.0, 3)
            jac = reaction_jacobian(u, v, w, p)
            fd = np.zeros((3, 3))
            for j, dvec in enumerate(np.eye(3) * delta):
                up = kinetics_ode(0.0, [u + dvec[0], v + dvec[1], w + dvec[2]], p)
                dn = kinetics_ode(0.0, [u - dvec[0], v - dvec[1], w - dvec[2]], p)
                fd[:, j] = (np.asarray(up) - np.asarray(dn)) / (2 * delta)
            np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-6)

    def test_lipschitz_bound_at_origin(self):
        p = Params.unit(lambda2=3.0)
        assert lipschitz_bound(0.0, 0.0, 0.0, p) == 3.0

    def test_lipschitz_dominates_percapita_losses(self):
        p = Params.unit(a1=2.0, mu2=0.5)
        U, V, W = 2.0, 3.0, 1.0
        L = lipschitz_bound(U, V, W, p)
        assert p.mu1 * U + p.a1 * V + p.a2 * W <= L
        assert p.mu2 * V + p.a3 * W <= L
        assert p.mu3 * W <= L


class TestSmoothStep:
    def test_plateaus(self):
        assert smooth_step(-1.0) == 1.0
        assert smooth_step(0.0) == 1.0
        assert smooth_step(1.0) == 0.0
        assert smooth_step(2.0) == 0.0

    def test_monotone_decreasing(self):
        xs = np.linspace(-0.5, 1.5, 400)
        vals = smooth_step(xs)
        assert np.all(np.diff(vals) <= 1e-15)

    def test_derivative_matches_fd(self):
        xs = np.linspace(0.05, 0.95, 50)
        fd = (smooth_step(xs + 1e-6) - smooth_step(xs - 1e-6)) / 2e-6
        np.testing.assert_allclose(smooth_step_prime(xs), fd, atol=1e-6)


class TestCutoff:
    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            CutoffSpec(eps=0.0)
        with pytest.raises(ParameterError):
            CutoffSpec(eps=1.5)
        c = CutoffSpec(eps=0.5)
        assert c.sigma_prime_bound == sigma_prime_bound()

    def test_identity_branch_exact(self):
        c = CutoffSpec(eps=0.5)
        assert sigma_eps(1.0, c) == 1.0
        xs = np.linspace(0.0, 2.0, 97)
        np.testing.assert_array_equal(sigma_eps(xs, c), xs)

    def test_zero_branch_exact(self):
        c = CutoffSpec(eps=0.5)
        assert sigma_eps(5.0, c) == 0.0
        assert sigma_eps(4.0, c) == 0.0

    def test_middle_branch_in_range(self):
        c = CutoffSpec(eps=0.5)
        s = 3.0
        val = sigma_eps(s, c)
        assert 0.0 <= val <= s
        mid = np.linspace(2.0, 4.0, 41)
        vals = sigma_eps(mid, c)
        assert np.all(vals >= 0.0) and np.all(vals <= mid)

    def test_negative_rejected(self):
        c = CutoffSpec(eps=0.5)
        with pytest.raises(ValueError):
            sigma_eps(-1.0, c)
        with pytest.raises(ValueError):
            sigma_eps_prime(-1.0, c)

    def test_prime_branches(self):
        c = CutoffSpec(eps=0.5)
        assert sigma_eps_prime(1.0, c) == 1.0
        assert sigma_eps_prime(2.0, c) == 1.0
        assert sigma_eps_prime(5.0, c) == 0.0

    def test_prime_matches_central_differences(self):
        # |(sig(s+d) - sig(s-d))/2d - sig'(s)| <= 1e-6 at d = 1e-5
        c = CutoffSpec(eps=0.5)
        delta = 1e-5
        ss = np.linspace(delta, 3.0 / c.eps, 100)
        fd = (sigma_eps(ss + delta, c) - sigma_eps(ss - delta, c)) / (2 * delta)
        np.testing.assert_allclose(sigma_eps_prime(ss, c), fd, atol=1e-6)

    def test_prime_bounded(self):
        for eps in (0.05, 0.31, 1.0):
            c = CutoffSpec(eps=eps)
            ss = np.linspace(0.0, 4.0 / eps, 5000)
            assert np.abs(sigma_eps_prime(ss, c)).max() <= c.sigma_prime_bound

    def test_global_lipschitz_sampled(self):
        # 1e4 point pairs against the derivative bound
        c = CutoffSpec(eps=0.2)
        rng = np.random.default_rng(9)
        s1 = rng.uniform(0.0, 3.0 / c.eps, 10_000)
        s2 = rng.uniform(0.0, 3.0 / c.eps, 10_000)
        num = np.abs(sigma_eps(s1, c) - sigma_eps(s2, c))
        den = np.abs(s1 - s2)
        mask = den > 0
        assert (num[mask] <= c.sigma_prime_bound * den[mask] * (1 + 1e-12)).all()

    def test_pointwise_convergence(self):
        # sigma_eps(s) = s exactly once eps <= 1/s
        s = 7.3
        for eps in (1.0 / s, 0.5 / s, 0.01):
            assert sigma_eps(s, CutoffSpec(eps=eps)) == s
        assert sigma_eps(s, CutoffSpec(eps=min(1.0, 1.9 / s))) < s


class TestOdeOracle:
    def test_reaches_superpredator_equilibrium(self):
        # lambda1 = lambda2 = 1/2 makes (0, 0, 1) exponentially attracting
        p = Params.unit(lambda1=0.5, lambda2=0.5)
        times = np.linspace(0.0, 60.0, 7)
        y = ode_oracle(p, [0.5, 0.4, 0.3], times)
        np.testing.assert_allclose(y[:, -1], [0.0, 0.0, 1.0], atol=1e-6)


class TestStateTriple:
    def test_shared_grid_required(self):
        a = Field.constant(GridSpec(4, 1, 1.0, 1.0), 1.0)
        b = Field.constant(GridSpec(5, 1, 1.0, 1.0), 1.0)
        with pytest.raises(ValueError):
            StateTriple(a, b, a.copy())

    def test_nonnegativity_required(self):
        g = GridSpec(4, 1, 1.0, 1.0)
        bad = Field(g, [0.0, -0.1, 0.0, 0.0])
        ok = Field.constant(g, 1.0)
        with pytest.raises(ValueError):
            StateTriple(ok, bad, ok.copy())
