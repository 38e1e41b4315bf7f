import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmi.model import (
    Alphabet,
    ModelParams,
    ParametrizationError,
    check_dense_hypotheses,
    params_from_channel,
    params_from_degrees,
)


class TestAlphabet:
    def test_centered_unit_variance(self):
        for r in (0.5, 0.3, 0.1, 0.05):
            ab = Alphabet.from_r(r)
            assert abs(ab.moment(1)) < 1e-12
            assert abs(ab.moment(2) - 1.0) < 1e-12

    def test_symmetric_case(self):
        ab = Alphabet.from_r(0.5)
        assert ab.x1 == 1.0
        assert ab.x2 == -1.0

    def test_domain(self):
        with pytest.raises(ParametrizationError):
            Alphabet.from_r(0.0)
        with pytest.raises(ParametrizationError):
            Alphabet.from_r(0.7)

    @given(st.floats(min_value=0.01, max_value=0.5))
    @settings(max_examples=25, deadline=None)
    def test_moments_any_r(self, r):
        ab = Alphabet.from_r(r)
        assert abs(ab.moment(1)) < 1e-10
        assert abs(ab.moment(2) - 1.0) < 1e-10


class TestChannelParametrization:
    def test_lambda_round_trip(self):
        p = params_from_channel(50, 0.4, 0.3, 1.7)
        assert abs(p.lambda_n - 1.7) < 1e-12
        assert abs(p.n * p.delta ** 2
                   - 1.7 * p.p_bar * (1.0 - p.p_bar)) < 1e-12

    def test_degree_parametrization_consistency(self):
        p = params_from_channel(40, 0.5, 0.25, 1.2)
        q = params_from_degrees(40, 0.5, p.d_n, p.b_n)
        assert abs(q.delta - p.delta) < 1e-12
        assert abs(q.lambda_n - p.lambda_n) < 1e-10

    def test_disassortative_sign(self):
        p = params_from_channel(30, 0.5, 0.5, 1.0, sign=-1)
        assert p.delta < 0.0
        ab = p.alphabet
        assert p.edge_probability(ab.x1, ab.x1) < p.p_bar

    def test_edge_probability_formula(self):
        p = params_from_channel(20, 0.35, 0.4, 0.9)
        ab = p.alphabet
        for xi in (ab.x1, ab.x2):
            for xj in (ab.x1, ab.x2):
                for t in (0.0, 0.37, 1.0):
                    expected = p.p_bar + math.sqrt(1.0 - t) * p.delta * xi * xj
                    assert p.edge_probability(xi, xj, t) == pytest.approx(
                        expected, abs=1e-15)

    def test_t_one_removes_signal(self):
        p = params_from_channel(20, 0.35, 0.4, 0.9)
        ab = p.alphabet
        assert p.edge_probability(ab.x1, ab.x2, 1.0) == pytest.approx(
            p.p_bar, abs=1e-15)

    def test_probability_domain_enforced(self):
        # n = 4, r = 0.3, lambda = 1.2 pushes the dense pair type past 1
        with pytest.raises(ParametrizationError):
            params_from_channel(4, 0.3, 0.5, 1.2)

    def test_invalid_inputs(self):
        with pytest.raises(ParametrizationError):
            params_from_channel(0, 0.5, 0.5, 1.0)
        with pytest.raises(ParametrizationError):
            params_from_channel(10, 0.5, 1.2, 1.0)
        with pytest.raises(ParametrizationError):
            params_from_channel(10, 0.5, 0.5, -0.5)
        with pytest.raises(ParametrizationError):
            params_from_channel(10, 0.5, 0.5, 1.0, sign=2)


class TestRecordRoundTrip:
    def test_to_from_record(self):
        p = params_from_channel(12, 0.45, 0.3, 1.3)
        q = ModelParams.from_record(p.to_record())
        assert q == p

    def test_record_types(self):
        rec = params_from_channel(12, 0.45, 0.3, 1.3).to_record()
        assert isinstance(rec["n"], int)
        assert all(isinstance(rec[k], float) for k in rec if k != "n")


class TestDenseDiagnostics:
    def test_dense_regime_clean(self):
        p = params_from_channel(2000, 0.5, 0.5, 1.0)
        diag = check_dense_hypotheses(p)
        assert not diag.large_corrections
        assert diag.correction_ratio <= diag.threshold

    def test_sparse_regime_flagged(self):
        p = params_from_degrees(1000, 0.5, 3.0, 0.5)
        diag = check_dense_hypotheses(p)
        assert diag.large_corrections

    def test_ratio_matches_lambda(self):
        p = params_from_channel(200, 0.5, 0.4, 1.7)
        diag = check_dense_hypotheses(p)
        assert diag.correction_ratio == pytest.approx(
            math.sqrt(p.lambda_n / diag.np_cubed), rel=1e-12)
