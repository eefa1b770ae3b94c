"""Randomized greedy search for the signed cut norm.

The signed cut norm of a tensor ``a`` of shape ``(n_1, ..., n_k)`` is the
maximum of ``<s_1 x ... x s_k, a>`` over sign vectors ``s_i``. Given all but
one factor the best remaining factor is the sign of the axial contraction,
so alternating those exact half-steps gives a non-decreasing sequence of
cut values. Matrices get a dedicated path that caches ``A t`` and
``A^T s`` and updates them through the columns whose sign flipped.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_tensor
from .kernels import (
    SignMatrix,
    axial_contract,
    delta_matvec,
    matvec_signed,
    pack_mask,
    signed_dot,
)

__all__ = [
    "SearchConfig",
    "CutResult",
    "InstanceTooLarge",
    "greedy_signed_cut",
    "axial_greedy_cut",
    "brute_force_cut",
    "substream",
]

REFRESH_EVERY = 16
BRUTE_FORCE_MAX_BITS = 24


class InstanceTooLarge(ValueError):
    """Raised when exhaustive enumeration would exceed the size guard."""


@dataclass(frozen=True)
class SearchConfig:
    """Seed and effort knobs for one cut search.

    ``restarts`` independent initializations are run and the best value is
    kept (earliest restart wins ties). ``max_sweeps`` caps a single run.
    """

    seed: int = 0
    restarts: int = 1
    max_sweeps: int = 100

    def __post_init__(self):
        check_count(self.seed, "seed")
        if self.seed >= 2**64:
            raise ValueError("seed must fit in 64 bits")
        check_count(self.restarts, "restarts", minimum=1)
        check_count(self.max_sweeps, "max_sweeps", minimum=1)


@dataclass(frozen=True)
class CutResult:
    """Outcome of a cut search.

    ``value`` is ``<s_1 x ... x s_k, a>`` recomputed from scratch for the
    returned ``signs``. ``history`` holds the cut value after every sweep
    of the winning run.
    """

    value: float
    signs: tuple
    iterations: int
    history: tuple = field(default=(), repr=False)


def substream(seed, *key):
    """PCG64 generator for ``seed`` and a spawn key such as ``(term, restart)``.

    Every ``(seed, key)`` pair gets a statistically independent stream that
    is reproducible across platforms.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _random_signs(rng, n):
    return pack_mask(rng.integers(0, 2, size=n, dtype=np.uint8).astype(bool))


class ImplicitResidual:
    """A dense tensor minus buffered sign terms, never materialized.

    Represents ``dense - sum_j alpha_j * (f_j1 x ... x f_jk)``. Contractions
    against sign vectors are the dense contraction minus a low-rank part
    whose per-term weights come from popcount inner products.
    """

    def __init__(self, dense, alphas=(), factors=None):
        self.dense = dense
        self.shape = dense.shape
        self.alphas = np.asarray(alphas, dtype=np.float64)
        if factors is None:
            factors = [SignMatrix(n) for n in self.shape]
        self.factors = factors
        self._neg = [f.negative_mask() for f in factors] if len(self.alphas) else None

    @property
    def ndim(self):
        return len(self.shape)

    def lowrank(self, axis, signs):
        if self._neg is None:
            return np.zeros(self.shape[axis])
        beta = self.alphas
        for i, s in enumerate(signs):
            if i != axis:
                beta = beta * self.factors[i].inner_with(s)
        return np.where(self._neg[axis], -beta, beta).sum(axis=1)

    def dense_contract(self, axis, signs):
        others = [s for i, s in enumerate(signs) if i != axis]
        if self.ndim == 2:
            # kept axis 0 is A t, kept axis 1 is A^T s
            return matvec_signed(self.dense, others[0], transpose=axis == 1)
        return axial_contract(self.dense, axis, others)

    def contract(self, axis, signs):
        return self.dense_contract(axis, signs) - self.lowrank(axis, signs)


def _matrix_run(op, rng, max_sweeps, callback=None):
    m, n = op.shape
    s = _random_signs(rng, m)
    t = _random_signs(rng, n)
    R = op.dense
    y_dense = op.dense_contract(0, [None, t])
    z_dense = None
    c_prev = -np.inf
    history = []
    for sweep in range(1, max_sweeps + 1):
        y = y_dense - op.lowrank(0, [None, t])
        s_new = pack_mask(y < 0)
        if z_dense is None or sweep % REFRESH_EVERY == 0:
            z_dense = op.dense_contract(1, [s_new, None])
        else:
            z_dense = delta_matvec(R, z_dense, s_new, s, transpose=True)
        z = z_dense - op.lowrank(1, [s_new, None])
        t_new = pack_mask(z < 0)
        c = float(np.abs(z).sum())
        history.append(c)
        if callback is not None:
            callback(sweep, t, s_new, y_dense, z_dense)
        s = s_new
        if c <= c_prev:
            t = t_new
            break
        c_prev = c
        if (sweep + 1) % REFRESH_EVERY == 0:
            y_dense = op.dense_contract(0, [None, t_new])
        else:
            y_dense = delta_matvec(R, y_dense, t_new, t)
        t = t_new
    value = signed_dot(s, op.contract(0, [None, t]))
    return CutResult(value, (s, t), len(history), tuple(history))


def _axial_run(op, rng, max_sweeps):
    k = op.ndim
    signs = [_random_signs(rng, n) for n in op.shape]
    c_prev = -np.inf
    history = []
    for _ in range(max_sweeps):
        for i in range(k):
            v = op.contract(i, signs)
            signs[i] = pack_mask(v < 0)
        c = float(np.abs(v).sum())
        history.append(c)
        if c <= c_prev:
            break
        c_prev = c
    value = signed_dot(signs[-1], op.contract(k - 1, signs))
    return CutResult(value, tuple(signs), len(history), tuple(history))


def run_search(op, cfg, term=0, *, axial=None, callback=None):
    """Best-of-``cfg.restarts`` search on an :class:`ImplicitResidual`."""
    if axial is None:
        axial = op.ndim != 2
    best = None
    for restart in range(cfg.restarts):
        rng = substream(cfg.seed, term, restart)
        if axial:
            res = _axial_run(op, rng, cfg.max_sweeps)
        else:
            res = _matrix_run(op, rng, cfg.max_sweeps, callback)
        if best is None or res.value > best.value:
            best = res
    return best


def greedy_signed_cut(A, cfg=None, *, term=0, callback=None):
    """Lower bound on the signed cut norm of a matrix by alternating signs.

    Starting from uniformly random ``(s, t)``, repeatedly sets
    ``s = sgn(A t)`` then ``t = sgn(A^T s)`` until the cut value stops
    increasing or ``cfg.max_sweeps`` is reached.

    Parameters
    ----------
    A : array-like of shape (m, n)
    cfg : SearchConfig, optional
    term : int, default=0
        Stream index, so repeated calls inside a decomposition draw
        independent starting points.
    callback : callable, optional
        Called as ``callback(sweep, t_prev, s, At_prev, ATs)`` with the cached
        dense products after each sweep; intended for instrumentation.

    Returns
    -------
    CutResult
        ``signs == (s, t)``.
    """
    A = check_tensor(A, min_order=2, max_order=2, name="A")
    cfg = cfg or SearchConfig()
    return run_search(ImplicitResidual(A), cfg, term, axial=False, callback=callback)


def axial_greedy_cut(a, cfg=None, *, term=0):
    """Tensor version of :func:`greedy_signed_cut`.

    Each sweep visits the axes in order and replaces that axis' signs by the
    sign of the contraction against the current signs on all other axes
    (already-updated ones included).
    """
    a = check_tensor(a, name="a")
    cfg = cfg or SearchConfig()
    return run_search(ImplicitResidual(a), cfg, term, axial=True)


def brute_force_cut(a, chunk=4096):
    """Exact signed cut norm by enumeration.

    The largest axis is solved in closed form (absolute values of the
    contraction); every other axis is enumerated with the first entry of
    the first enumerated axis pinned to +1, which removes the global flip.

    Raises
    ------
    InstanceTooLarge
        If the total number of sign bits exceeds 24.
    """
    a = check_tensor(a, name="a")
    if sum(a.shape) > BRUTE_FORCE_MAX_BITS:
        raise InstanceTooLarge(
            f"2^{sum(a.shape)} sign assignments exceed the 2^{BRUTE_FORCE_MAX_BITS} guard"
        )
    if a.ndim == 1:
        s = pack_mask(a < 0)
        return CutResult(float(np.abs(a).sum()), (s,), 0)

    free = int(np.argmax(a.shape))
    others = [i for i in range(a.ndim) if i != free]
    M = np.moveaxis(a, free, -1).reshape(-1, a.shape[free])
    sizes = [a.shape[i] for i in others]
    n_bits = sum(sizes) - 1
    offsets = np.cumsum([0] + sizes)

    best_value, best_code, best_v = -np.inf, 0, None
    total = 1 << n_bits
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(n_bits)) & 1).astype(bool)
        neg = np.concatenate([np.zeros((len(codes), 1), dtype=bool), bits], axis=1)
        P = np.ones((len(codes), 1))
        for j, n in enumerate(sizes):
            axis_signs = np.where(neg[:, offsets[j]:offsets[j + 1]], -1.0, 1.0)
            P = (P[:, :, None] * axis_signs[:, None, :]).reshape(len(codes), -1)
        V = P @ M
        values = np.abs(V).sum(axis=1)
        idx = int(np.argmax(values))
        if values[idx] > best_value:
            best_value, best_code, best_v = float(values[idx]), int(codes[idx]), V[idx]

    neg = np.concatenate(
        [[False], ((best_code >> np.arange(n_bits)) & 1).astype(bool)]
    )
    signs = [None] * a.ndim
    for j, i in enumerate(others):
        signs[i] = pack_mask(neg[offsets[j]:offsets[j + 1]])
    signs[free] = pack_mask(best_v < 0)
    return CutResult(best_value, tuple(signs), 0)
