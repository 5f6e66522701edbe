import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergolearn.errors import DomainError
from ergolearn.process_core import (
    BINARY,
    WAR_ALPHABET,
    Alphabet,
    Distribution,
    History,
    cesaro_means,
    full_density_limit_test,
    sup_distance,
)


def squares_indicator(n):
    v = np.zeros(n)
    k = 0
    while k * k < n:
        v[k * k] = 1.0
        k += 1
    return v


class TestAlphabetAndHistory:
    def test_duplicate_symbols_rejected(self):
        with pytest.raises(DomainError):
            Alphabet(("a", "a"))

    def test_single_symbol_rejected(self):
        with pytest.raises(DomainError):
            Alphabet(("a",))

    def test_encode_decode_roundtrip(self):
        assert WAR_ALPHABET.decode(WAR_ALPHABET.encode("WBGG")) == ("W", "B", "G", "G")

    def test_history_validates_indices(self):
        with pytest.raises(DomainError):
            History(BINARY, (0, 2))

    def test_empty_history_is_valid(self):
        assert len(History(BINARY)) == 0


class TestDistribution:
    def test_rejects_unnormalized(self):
        with pytest.raises(DomainError):
            Distribution(BINARY, [0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            Distribution(BINARY, [-0.1, 1.1])

    def test_point_mass_and_lookup(self):
        d = Distribution.point_mass(WAR_ALPHABET, "B")
        assert d["B"] == 1.0 and d["W"] == 0.0


class TestSupDistance:
    def test_identity(self):
        assert sup_distance([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_disjoint_point_masses(self):
        assert sup_distance([1, 0], [0, 1]) == 1.0

    def test_three_symbols(self):
        assert sup_distance([0.5, 0.25, 0.25], [0.5, 0.5, 0.0]) == 0.25

    def test_alphabet_mismatch(self):
        p = Distribution.uniform(BINARY)
        q = Distribution.uniform(Alphabet(("x", "y")))
        with pytest.raises(DomainError):
            sup_distance(p, q)

    def test_size_mismatch(self):
        with pytest.raises(DomainError):
            sup_distance([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_triangle_inequality_random_triples(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            m = rng.integers(2, 6)
            p, q, r = rng.dirichlet(np.ones(m), size=3)
            assert sup_distance(p, r) <= sup_distance(p, q) + sup_distance(q, r) + 1e-12

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.data())
    @settings(max_examples=100)
    def test_symmetric_and_zero_iff_equal(self, raw, data):
        p = np.array(raw) / sum(raw)
        other = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(raw), max_size=len(raw)))
        q = np.array(other) / sum(other)
        assert sup_distance(p, q) == sup_distance(q, p)
        assert sup_distance(p, p) == 0.0
        assert 0.0 <= sup_distance(p, q) <= 1.0


class TestCesaro:
    def test_constant(self):
        tr = cesaro_means([0.3] * 10)
        np.testing.assert_allclose(tr.running_means, 0.3, atol=1e-15)

    def test_squares_at_100(self):
        assert cesaro_means(squares_indicator(100)).final_mean == pytest.approx(0.1, abs=1e-15)

    def test_alternating_exact_half(self):
        assert cesaro_means([0, 1] * 500).final_mean == 0.5

    def test_empty(self):
        assert len(cesaro_means([])) == 0

    def test_running_means_match_direct_sums(self):
        rng = np.random.default_rng(3)
        v = rng.random(5000)
        tr = cesaro_means(v)
        for n in (1, 17, 999, 5000):
            assert abs(tr.running_means[n - 1] - math.fsum(v[:n]) / n) < 1e-10

    @pytest.mark.parametrize("N", [1, 2, 5, 99, 100, 101, 1000, 9999])
    def test_squares_count_formula(self, N):
        expected = math.floor(math.sqrt(N - 1) + 1) / N
        assert cesaro_means(squares_indicator(N)).final_mean == pytest.approx(expected, abs=1e-12)


class TestFullDensityLimit:
    def test_zero_trace(self):
        v = full_density_limit_test(cesaro_means(np.zeros(50)), 1e-6, 0.5)
        assert v.weak and v.strong

    def test_squares_weak_not_strong(self):
        v = full_density_limit_test(cesaro_means(squares_indicator(10_000)), 0.05, 0.5)
        assert v.weak is True and v.strong is False

    def test_constant_one(self):
        v = full_density_limit_test(cesaro_means(np.ones(10)), 0.5, 0.5)
        assert not v.weak and not v.strong

    def test_empty_trace_errors(self):
        with pytest.raises(DomainError):
            full_density_limit_test(cesaro_means([]), 0.05, 0.5)

    @pytest.mark.parametrize("eps,tail", [(0.0, 0.5), (0.1, 0.0), (0.1, 1.0)])
    def test_bad_parameters(self, eps, tail):
        with pytest.raises(DomainError):
            full_density_limit_test(cesaro_means([0.0]), eps, tail)
