import itertools

import numpy as np
import pytest

from signcut.kernels import matvec_signed, pack_signs, unpack_signs
from signcut.search import (
    CutResult,
    InstanceTooLarge,
    SearchConfig,
    axial_greedy_cut,
    brute_force_cut,
    greedy_signed_cut,
)

from conftest import random_signs


def enumerate_cut(a):
    """max <s_1 x ... x s_k, a> over every sign assignment, no symmetry tricks."""
    best = -np.inf
    for combo in itertools.product(*[list(itertools.product((-1, 1), repeat=n)) for n in a.shape]):
        outer = np.ones(())
        for s in combo:
            outer = np.multiply.outer(outer, np.array(s))
        best = max(best, float(np.sum(outer * a)))
    return best


def outer_of(signs):
    out = np.ones(())
    for s in signs:
        out = np.multiply.outer(out, unpack_signs(s).astype(float))
    return out


class TestSearchConfig:
    def test_defaults(self):
        cfg = SearchConfig()
        assert (cfg.seed, cfg.restarts, cfg.max_sweeps) == (0, 1, 100)

    @pytest.mark.parametrize("kwargs", [dict(restarts=0), dict(max_sweeps=0), dict(seed=-1), dict(seed=2**64)])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SearchConfig(**kwargs)


class TestGreedySignedCut:
    def test_rank_one_sign_matrix(self, rng):
        s, t = random_signs(rng, 5), random_signs(rng, 7)
        A = np.outer(s, t).astype(float)
        res = greedy_signed_cut(A, SearchConfig(seed=3))
        assert res.value == 35.0
        got_s, got_t = (unpack_signs(x) for x in res.signs)
        flip = got_s[0] * s[0]
        np.testing.assert_array_equal(got_s, flip * s)
        np.testing.assert_array_equal(got_t, flip * t)

    def test_checkerboard(self):
        A = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert enumerate_cut(A) == 4.0
        for seed in range(8):
            res = greedy_signed_cut(A, SearchConfig(seed=seed, restarts=8))
            assert res.value == 4.0
            s, t = (unpack_signs(x) for x in res.signs)
            assert abs(int(s @ np.array([1, -1]))) == 2
            assert abs(int(t @ np.array([1, -1]))) == 2

    def test_checkerboard_single_start_can_stall_at_zero(self):
        # t0 = +-(1, 1) gives A t0 = 0, and sgn(0) = +1 keeps every later product at 0
        A = np.array([[1.0, -1.0], [-1.0, 1.0]])
        values = {greedy_signed_cut(A, SearchConfig(seed=seed)).value for seed in range(32)}
        assert values == {0.0, 4.0}

    def test_all_ones(self):
        assert greedy_signed_cut(np.ones((3, 3))).value == 9.0

    def test_value_recomputed_from_signs(self, rng):
        for seed in range(10):
            A = rng.standard_normal((13, 21))
            res = greedy_signed_cut(A, SearchConfig(seed=seed))
            s, t = (unpack_signs(x).astype(float) for x in res.signs)
            assert res.value == pytest.approx(s @ A @ t, rel=1e-10)

    def test_monotone_history(self, rng):
        for seed in range(20):
            A = rng.standard_normal((40, 30))
            res = greedy_signed_cut(A, SearchConfig(seed=seed))
            slack = 1e-9 * np.linalg.norm(A)
            h = np.array(res.history)
            assert np.all(np.diff(h[:-1]) >= -slack)
            assert res.iterations == len(h)

    def test_fixed_point(self, rng):
        A = rng.standard_normal((20, 25))
        res = greedy_signed_cut(A, SearchConfig(seed=1))
        s, t = res.signs
        s2 = pack_signs(np.where(matvec_signed(A, t) < 0, -1, 1))
        t2 = pack_signs(np.where(matvec_signed(A, s2, transpose=True) < 0, -1, 1))
        s2f, t2f = (unpack_signs(x).astype(float) for x in (s2, t2))
        assert s2f @ A @ t2f == pytest.approx(res.value, rel=1e-12)

    def test_deterministic(self, rng):
        A = rng.standard_normal((30, 30))
        cfg = SearchConfig(seed=99, restarts=4)
        a, b = greedy_signed_cut(A, cfg), greedy_signed_cut(A, cfg)
        assert a.value == b.value and a.signs == b.signs and a.history == b.history

    def test_restarts_never_worse(self, rng):
        A = rng.standard_normal((12, 12))
        single = greedy_signed_cut(A, SearchConfig(seed=5))
        multi = greedy_signed_cut(A, SearchConfig(seed=5, restarts=8))
        assert multi.value >= single.value

    def test_cache_coherence(self, rng):
        A = rng.standard_normal((50, 40))
        seen = []

        def check(sweep, t_prev, s, y_dense, z_dense):
            np.testing.assert_allclose(y_dense, matvec_signed(A, t_prev), rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(z_dense, matvec_signed(A, s, transpose=True), rtol=1e-10, atol=1e-10)
            seen.append(sweep)

        for seed in range(10):
            greedy_signed_cut(A, SearchConfig(seed=seed), callback=check)
        assert max(seen) >= 3

    def test_max_sweeps_cap(self, rng):
        A = rng.standard_normal((30, 30))
        res = greedy_signed_cut(A, SearchConfig(seed=0, max_sweeps=1))
        assert res.iterations == 1

    def test_lower_bound(self, rng):
        for seed in range(30):
            A = rng.standard_normal((4, 5))
            assert greedy_signed_cut(A, SearchConfig(seed=seed)).value <= enumerate_cut(A) + 1e-12

    def test_rejects_empty_and_nan(self):
        with pytest.raises(ValueError):
            greedy_signed_cut(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            greedy_signed_cut(np.array([[np.inf]]))


class TestAxialGreedyCut:
    def test_all_ones(self):
        res = axial_greedy_cut(np.ones((2, 2, 2)))
        assert res.value == 8.0
        # any maximizer is a product of constant vectors; normalize the global flips
        assert np.all(outer_of(res.signs) == 1)

    def test_rank_one_sign_tensor(self, rng):
        s, t, k = random_signs(rng, 3), random_signs(rng, 4), random_signs(rng, 5)
        a = np.einsum("i,j,k->ijk", s, t, k).astype(float)
        res = axial_greedy_cut(a, SearchConfig(seed=2))
        assert res.value == 60.0

    def test_value_recomputed(self, rng):
        a = rng.standard_normal((4, 5, 6))
        res = axial_greedy_cut(a, SearchConfig(seed=4))
        assert res.value == pytest.approx(float(np.sum(outer_of(res.signs) * a)), rel=1e-10)

    def test_monotone(self, rng):
        for seed in range(10):
            a = rng.standard_normal((6, 5, 4, 3))
            h = np.array(axial_greedy_cut(a, SearchConfig(seed=seed)).history)
            assert np.all(np.diff(h[:-1]) >= -1e-9 * np.linalg.norm(a))

    def test_matches_matrix_search_on_matrices(self, rng):
        for seed in range(10):
            A = rng.standard_normal((17, 23))
            cfg = SearchConfig(seed=seed)
            a, b = axial_greedy_cut(A, cfg), greedy_signed_cut(A, cfg)
            assert a.signs == b.signs
            assert a.value == pytest.approx(b.value, rel=1e-12)

    def test_order_one(self, rng):
        a = rng.standard_normal(9)
        assert axial_greedy_cut(a).value == pytest.approx(np.abs(a).sum(), rel=1e-14)

    def test_lower_bound(self, rng):
        for seed in range(20):
            a = rng.standard_normal((2, 3, 2))
            assert axial_greedy_cut(a, SearchConfig(seed=seed)).value <= enumerate_cut(a) + 1e-12


class TestBruteForce:
    def test_scalar(self):
        assert brute_force_cut(np.array([[-2.5]])).value == 2.5

    def test_checkerboard(self):
        assert brute_force_cut(np.array([[1.0, -1.0], [-1.0, 1.0]])).value == 4.0

    def test_matches_plain_enumeration(self, rng):
        for shape in [(3, 4), (4, 4), (2, 2, 2), (2, 3, 2), (5,), (1, 6), (2, 1, 3, 2)]:
            a = rng.standard_normal(shape)
            res = brute_force_cut(a)
            assert res.value == pytest.approx(enumerate_cut(a), rel=1e-12)
            assert res.value == pytest.approx(float(np.sum(outer_of(res.signs) * a)), rel=1e-12)

    def test_bounded_by_l1(self, rng):
        for _ in range(50):
            shape = tuple(rng.integers(1, 4, size=rng.integers(1, 4)))
            a = rng.standard_normal(shape)
            assert brute_force_cut(a).value <= np.abs(a).sum() * (1 + 1e-12)

    def test_l1_attained_on_rank_one_sign_pattern(self, rng):
        for _ in range(20):
            s, t, k = random_signs(rng, 2), random_signs(rng, 3), random_signs(rng, 2)
            a = np.einsum("i,j,k->ijk", s, t, k) * rng.uniform(0.1, 2.0, size=(2, 3, 2))
            assert brute_force_cut(a).value == pytest.approx(np.abs(a).sum(), rel=1e-12)

    def test_l1_not_attained_otherwise(self):
        a = np.array([[1.0, 1.0], [1.0, -1.0]])
        assert brute_force_cut(a).value == 2.0 < np.abs(a).sum()

    def test_guard(self):
        with pytest.raises(InstanceTooLarge):
            brute_force_cut(np.ones((13, 12)))

    def test_returns_cut_result(self):
        assert isinstance(brute_force_cut(np.ones((2, 2))), CutResult)
