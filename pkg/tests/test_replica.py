import math

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss

from sbmi.replica import (
    R_STAR_TRICRITICAL,
    ReplicaSolution,
    minimize_psi,
    phase_diagram,
    psi,
    psi_prime,
    psi_prime_analytic,
    scalar_overlap,
    state_evolution,
)

LAMBDAS = (0.3, 0.8, 1.0, 1.5, 3.0)
RS = (0.5, 0.35, 0.15)


class TestPotentialValues:
    def test_uninformative_value_exact(self):
        for lam in LAMBDAS:
            for r in RS:
                assert abs(psi(0.0, lam, r) - lam / 4.0) < 1e-12

    def test_symmetric_prior_closed_form(self):
        # at r = 1/2 the letters are +-1 and the inner sum is a cosh
        nodes, weights = hermgauss(121)
        z = nodes * math.sqrt(2.0)
        w = weights / math.sqrt(math.pi)
        for lam, q in ((1.5, 0.3), (1.5, 1.0), (4.0, 3.0)):
            e_ln = float(w @ np.log(np.cosh(np.sqrt(q) * z + q))) - q / 2.0
            want = lam / 4.0 + q * q / (4.0 * lam) - e_ln
            assert abs(psi(q, lam, 0.5) - want) < 1e-10

    def test_symmetric_prior_overlap_closed_form(self):
        from scipy.integrate import quad
        for q in (0.2, 1.0, 2.5):
            want, _ = quad(
                lambda z: math.tanh(math.sqrt(q) * z + q)
                * math.exp(-z * z / 2.0) / math.sqrt(2.0 * math.pi),
                -12.0, 12.0, epsabs=1e-13, epsrel=1e-13)
            assert abs(scalar_overlap(q, 0.5) - want) < 1e-10

    def test_overlap_zero_at_origin_and_bounded(self):
        for r in RS:
            assert abs(scalar_overlap(0.0, r)) < 1e-14
            qs = np.linspace(0.0, 6.0, 25)
            m = scalar_overlap(qs, r)
            assert np.all(np.diff(m) > -1e-12)
            assert np.all(m <= 1.0 + 1e-12)

    def test_vectorized_matches_scalar(self):
        qs = np.array([0.0, 0.4, 1.3, 2.9])
        vec = psi(qs, 1.2, 0.4)
        for q, v in zip(qs, vec):
            assert abs(psi(float(q), 1.2, 0.4) - v) < 1e-14

    def test_quadrature_order_invariance(self):
        # panel branch engages at large q; both orders must agree there
        qs = np.array([0.05, 0.5, 2.0, 8.0, 20.0])
        for r in RS:
            a = psi(qs, 25.0, r, quad_order=61)
            b = psi(qs, 25.0, r, quad_order=121)
            assert np.max(np.abs(a - b)) < 1e-11


class TestDerivative:
    @pytest.mark.parametrize("q,lam,r", [
        (0.3, 1.2, 0.5), (1.0, 1.5, 0.4), (2.5, 3.0, 0.25),
        (0.05, 0.8, 0.5), (6.0, 8.0, 0.15),
    ])
    def test_analytic_matches_stencil(self, q, lam, r):
        a = psi_prime_analytic(q, lam, r)
        b = psi_prime(q, lam, r)
        assert abs(a - b) < 1e-7 * (1.0 + abs(a))

    def test_stationary_at_informative_minimum(self):
        sol = minimize_psi(2.0, 0.5)
        assert sol.q_star > 0.5
        assert abs(psi_prime_analytic(sol.q_star, 2.0, 0.5)) < 1e-7


class TestMinimization:
    def test_agrees_with_dense_grid(self):
        for lam, r in ((0.7, 0.5), (1.5, 0.5), (1.2, 0.3), (2.5, 0.15)):
            sol = minimize_psi(lam, r)
            qs = np.linspace(0.0, lam, 20001)
            vals = psi(qs, lam, r)
            k = int(np.argmin(vals))
            assert sol.psi_star <= vals[k] + 1e-12
            assert abs(sol.q_star - qs[k]) < 2 * lam / 20000 + 1e-6

    def test_below_transition_uninformative(self):
        sol = minimize_psi(0.8, 0.5)
        assert sol.q_star == 0.0
        assert sol.psi_star == pytest.approx(0.2, abs=1e-12)

    def test_above_transition_informative(self):
        sol = minimize_psi(1.5, 0.5)
        assert sol.q_star > 0.3
        assert sol.psi_star < 1.5 / 4.0

    def test_minimum_value_bounded_by_uninformative(self):
        for lam in LAMBDAS:
            for r in RS:
                sol = minimize_psi(lam, r)
                assert sol.psi_star <= lam / 4.0 + 1e-12

    def test_record_round_trip(self):
        sol = minimize_psi(1.5, 0.4)
        rec = sol.to_record()
        assert rec["lambda"] == 1.5
        assert rec["r"] == 0.4
        assert rec["q_star"] == sol.q_star
        assert rec["transition_order"] in ("none", "continuous",
                                           "discontinuous")
        assert isinstance(rec["local_minima"], list)


class TestStateEvolution:
    def test_fixed_point_property(self):
        q, iterates, converged = state_evolution(1.8, 0.5, q0=1.8)
        assert converged
        assert abs(q - 1.8 * scalar_overlap(q, 0.5)) < 1e-10
        assert iterates[0] == 1.8

    def test_matches_potential_minimum(self):
        for lam, r in ((1.5, 0.5), (2.0, 0.4), (3.0, 0.3)):
            q, _, converged = state_evolution(lam, r, q0=lam)
            sol = minimize_psi(lam, r)
            assert converged
            assert abs(q - sol.q_star) < 1e-6

    def test_uninformative_fixed_point_stable_below_one(self):
        q, _, converged = state_evolution(0.9, 0.5, q0=0.01)
        assert converged
        assert q < 1e-6

    def test_damping_reaches_same_point(self):
        qa, _, _ = state_evolution(2.0, 0.4, q0=2.0, damping=1.0)
        qb, _, _ = state_evolution(2.0, 0.4, q0=2.0, damping=0.5,
                                   max_iter=2000)
        assert abs(qa - qb) < 1e-9


class TestPhaseDiagram:
    def test_symmetric_slice_continuous(self):
        grid = np.arange(0.85, 1.35, 0.05)
        pd = phase_diagram(grid, [0.5])
        rep = pd.reports[0]
        assert rep.order == "continuous"
        assert abs(rep.lambda_c - 1.0) < 0.01

    def test_asymmetric_slice_discontinuous(self):
        grid = np.arange(0.85, 1.35, 0.05)
        pd = phase_diagram(grid, [0.08])
        rep = pd.reports[0]
        assert rep.order == "discontinuous"
        assert rep.lambda_c < 1.0 - 1e-4

    def test_tricritical_constant(self):
        assert R_STAR_TRICRITICAL == pytest.approx(
            (1.0 - 1.0 / math.sqrt(3.0)) / 2.0, rel=0)
        assert 0.2 < R_STAR_TRICRITICAL < 0.22


class TestDomain:
    def test_negative_q_rejected(self):
        with pytest.raises(ValueError):
            psi(-0.1, 1.0, 0.5)
        with pytest.raises(ValueError):
            scalar_overlap(np.array([0.2, -0.3]), 0.5)

    def test_prime_needs_positive_q(self):
        with pytest.raises(ValueError):
            psi_prime(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            psi_prime_analytic(-1.0, 1.0, 0.5)

    def test_state_evolution_validation(self):
        with pytest.raises(ValueError):
            state_evolution(1.0, 0.5, q0=2.0)
        with pytest.raises(ValueError):
            state_evolution(1.0, 0.5, q0=0.5, damping=0.0)

    def test_quad_order_floor(self):
        with pytest.raises(ValueError):
            psi(0.5, 1.0, 0.5, quad_order=2)
