"""Width-w signed cut decompositions.

A decomposition of a tensor ``a`` with shape ``(n_1, ..., n_k)`` is a sum of
``w`` terms ``alpha_j * (s_j1 x ... x s_jk)`` with sign vectors ``s_ji``.
Coefficients are always stored as the multiplier that :func:`expand` applies,
so for greedy output ``alpha_j = c_j / prod(n_i)`` where ``c_j`` is the cut
value found on the residual at step ``j``.

The scalar-channel variant keeps sign factors only on the non-channel axes
and stores one real coefficient per channel and term.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import check_count, check_tensor
from .kernels import SignMatrix, axial_contract, matvec_signed, pack_mask, rank1_update, signed_dot
from .search import ImplicitResidual, SearchConfig, run_search, substream

__all__ = [
    "CutDecomposition",
    "CutStep",
    "CutReport",
    "DecomposeConfig",
    "GramSystem",
    "MemoryBudgetExceeded",
    "decompose",
    "greedy_decompose",
    "lstsq_decompose",
    "rgb_scalars_decompose",
    "correct_coefficients",
    "gram_system",
    "solve_normal_equations",
    "expand",
]

MAX_CHANNELS = 8
METHODS = ("greedy", "lstsq")


class MemoryBudgetExceeded(ValueError):
    pass


@dataclass(eq=False)
class CutDecomposition:
    """Sign factors and expansion multipliers of a width-w decomposition.

    Parameters
    ----------
    shape : tuple of int
        Shape of the approximated tensor.
    factors : list of SignMatrix
        One per signed axis, each with ``width`` columns. Every axis is
        signed unless ``channel_axis`` is set, in which case that axis has
        no factor.
    coefficients : ndarray
        Shape ``(width,)``, or ``(width, q)`` when ``channel_axis`` is set.
    channel_axis : int or None
    """

    shape: tuple
    factors: list
    coefficients: np.ndarray
    channel_axis: int | None = None

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.channel_axis is not None:
            self.channel_axis = int(self.channel_axis) % len(self.shape)
            q = self.shape[self.channel_axis]
            if self.coefficients.ndim != 2 or self.coefficients.shape[1] != q:
                raise ValueError(f"channel coefficients must have shape (width, {q})")
        elif self.coefficients.ndim != 1:
            raise ValueError("coefficients must be a vector")
        axes = self.signed_axes
        if len(self.factors) != len(axes):
            raise ValueError(f"expected {len(axes)} sign factors, got {len(self.factors)}")
        for ax, f in zip(axes, self.factors):
            if f.rows != self.shape[ax]:
                raise ValueError(f"factor for axis {ax} has {f.rows} rows, expected {self.shape[ax]}")
            if f.width != self.width:
                raise ValueError(f"factor for axis {ax} has width {f.width}, expected {self.width}")

    @classmethod
    def empty(cls, shape, channel_axis=None):
        shape = tuple(int(n) for n in shape)
        if channel_axis is None:
            coeffs = np.zeros(0)
        else:
            channel_axis %= len(shape)
            coeffs = np.zeros((0, shape[channel_axis]))
        axes = [i for i in range(len(shape)) if i != channel_axis]
        return cls(shape, [SignMatrix(shape[i]) for i in axes], coeffs, channel_axis)

    @property
    def width(self):
        return self.coefficients.shape[0]

    @property
    def signed_axes(self):
        return tuple(i for i in range(len(self.shape)) if i != self.channel_axis)

    @property
    def n_channels(self):
        return 1 if self.channel_axis is None else self.shape[self.channel_axis]

    def term_signs(self, j):
        return tuple(f[j] for f in self.factors)

    def truncated(self, width):
        width = min(check_count(width, "width"), self.width)
        return CutDecomposition(
            self.shape,
            [f.truncated(width) for f in self.factors],
            self.coefficients[:width].copy(),
            self.channel_axis,
        )

    def with_coefficients(self, coefficients):
        return CutDecomposition(
            self.shape, [f.copy() for f in self.factors], coefficients, self.channel_axis
        )

    def append(self, signs, coefficient):
        for f, s in zip(self.factors, signs):
            f.append(s)
        coefficient = np.asarray(coefficient, dtype=np.float64).reshape(
            (1,) + self.coefficients.shape[1:]
        )
        self.coefficients = np.concatenate([self.coefficients, coefficient])

    def __eq__(self, other):
        if not isinstance(other, CutDecomposition):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.channel_axis == other.channel_axis
            and self.factors == other.factors
            and self.coefficients.shape == other.coefficients.shape
            and self.coefficients.tobytes() == other.coefficients.tobytes()
        )

    def __repr__(self):
        mode = "" if self.channel_axis is None else f", channel_axis={self.channel_axis}"
        return f"CutDecomposition(shape={self.shape}, width={self.width}{mode})"


@dataclass(frozen=True)
class CutStep:
    k: int
    value: float
    residual_norm: float


@dataclass
class CutReport:
    """Per-width history of a decomposition run.

    ``steps[k-1]`` describes the state after ``k`` terms: the cut value found
    at that step and the Frobenius norm of the residual.
    """

    initial_norm: float
    steps: list = field(default_factory=list)
    final_norm: float | None = None
    method: str = "greedy"

    @property
    def widths(self):
        return np.arange(len(self.steps) + 1)

    @property
    def values(self):
        return np.array([s.value for s in self.steps])

    @property
    def residual_norms(self):
        """Residual norms for widths ``0..len(steps)``."""
        return np.array([self.initial_norm] + [s.residual_norm for s in self.steps])

    @property
    def relative_errors(self):
        if self.initial_norm == 0:
            return np.zeros(len(self.steps) + 1)
        return self.residual_norms / self.initial_norm


@dataclass(frozen=True)
class DecomposeConfig:
    """Settings for a decomposition run.

    Parameters
    ----------
    width : int
        Number of terms to produce.
    flush_width : int, default=32
        Greedy only: buffered terms held implicitly before they are
        subtracted from the dense residual.
    method : {"greedy", "lstsq"}
        ``"lstsq"`` re-fits all coefficients after every new term.
    search : SearchConfig
    record_curve : bool, default=True
        Keep one :class:`CutStep` per term in the report.
    min_value_fraction : float, default=0.0
        Stop early once a cut value drops to this fraction of
        ``sqrt(prod(n_i)) * ||R||_F`` (its upper bound). 0 never stops.
    memory_budget : int or None
        Maximum bytes for the stored factors and coefficients.
    """

    width: int
    flush_width: int = 32
    method: str = "greedy"
    search: SearchConfig = field(default_factory=SearchConfig)
    record_curve: bool = True
    min_value_fraction: float = 0.0
    memory_budget: int | None = None

    def __post_init__(self):
        check_count(self.width, "width")
        check_count(self.flush_width, "flush_width", minimum=1)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.min_value_fraction <= 1.0:
            raise ValueError("min_value_fraction must lie in [0, 1]")
        if self.memory_budget is not None:
            check_count(self.memory_budget, "memory_budget")


@dataclass(frozen=True)
class GramSystem:
    """Normal equations ``gram @ c = rhs`` for fixed sign factors.

    ``gram[i, j]`` is the product over signed axes of the sign-vector inner
    products, i.e. the inner product of the i-th and j-th sign outer
    products. ``rhs`` has one column per channel in the scalar-channel case.
    """

    gram: np.ndarray
    rhs: np.ndarray
    n_entries: int


def _check_budget(shape, cfg, channel_axis=None):
    if cfg.memory_budget is None:
        return
    q = 1 if channel_axis is None else shape[channel_axis]
    per_term = 8 * q + sum((n + 7) // 8 for i, n in enumerate(shape) if i != channel_axis)
    needed = cfg.width * per_term
    if needed > cfg.memory_budget:
        raise MemoryBudgetExceeded(
            f"width {cfg.width} needs {needed} bytes, budget is {cfg.memory_budget}"
        )


def _sign_arrays(factors):
    return [f.to_signs(np.float64) for f in factors]


def _expand_terms(shape, coefficients, factors, channel_axis=None):
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape[0] == 0:
        return np.zeros(shape)
    axes = [i for i in range(len(shape)) if i != channel_axis]
    K = len(shape)
    operands = [coefficients, [K] if channel_axis is None else [K, channel_axis]]
    for ax, F in zip(axes, _sign_arrays(factors)):
        operands += [F, [ax, K]]
    out = np.einsum(*operands, list(range(K)), optimize=True)
    return np.ascontiguousarray(out, dtype=np.float64).reshape(shape)


def expand(d):
    """Dense tensor ``sum_j alpha_j * (outer product of term j's signs)``."""
    return _expand_terms(d.shape, d.coefficients, d.factors, d.channel_axis)


def _term_inner(A, signs):
    """``<s_1 x ... x s_k, A>`` with one sign vector per axis of ``A``."""
    if A.ndim == 2:
        return signed_dot(signs[0], matvec_signed(A, signs[1]))
    return signed_dot(signs[0], axial_contract(A, 0, signs[1:]))


def _rhs_entry(A, signs, channel_axis=None):
    if channel_axis is None:
        return _term_inner(A, signs)
    planes = np.moveaxis(A, channel_axis, 0)
    return np.array([_term_inner(np.ascontiguousarray(p), signs) for p in planes])


def _gram_column(factors, signs):
    col = np.ones(factors[0].width, dtype=np.int64)
    for f, s in zip(factors, signs):
        col = col * f.inner_with(s)
    return col


def gram_system(A, d):
    """Assemble the normal equations for ``d``'s sign factors against ``A``."""
    A = check_tensor(A, name="A")
    if A.shape != d.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {d.shape}")
    w = d.width
    G = np.ones((w, w), dtype=np.int64)
    for f in d.factors:
        G *= f.gram()
    rhs = np.array(
        [_rhs_entry(A, d.term_signs(j), d.channel_axis) for j in range(w)],
        dtype=np.float64,
    ).reshape(d.coefficients.shape)
    return GramSystem(G, rhs, math.prod(d.shape[i] for i in d.signed_axes))


def solve_normal_equations(gram, rhs, n_entries):
    """Solve ``gram @ c = rhs`` for a symmetric positive semidefinite gram.

    Uses a Cholesky factorization. If that fails, a ridge of
    ``1e-10 * n_entries`` is added to the diagonal and doubled up to three
    times; as a last resort the minimum-norm least-squares solution is used.
    """
    G = np.asarray(gram, dtype=np.float64)
    b = np.asarray(rhs, dtype=np.float64)
    if G.shape[0] == 0:
        return np.zeros(b.shape)
    ridge = 1e-10 * n_entries
    # a rounding-sized pivot means the gram is singular in exact arithmetic
    min_pivot_sq = 1e-12 * n_entries
    for attempt in range(5):
        lam = 0.0 if attempt == 0 else ridge * 2 ** (attempt - 1)
        try:
            factor = scipy.linalg.cho_factor(G + lam * np.eye(len(G)), check_finite=False)
        except np.linalg.LinAlgError:
            continue
        if attempt == 0 and np.min(np.diag(factor[0])) ** 2 < min_pivot_sq:
            continue
        c = scipy.linalg.cho_solve(factor, b, check_finite=False)
        if np.all(np.isfinite(c)):
            return c
    return np.linalg.lstsq(G, b, rcond=None)[0]


def correct_coefficients(A, d):
    """Replace ``d``'s coefficients by the least-squares optimum.

    Sign factors are kept; the result minimizes ``||A - expand(d)||_F`` over
    all coefficient choices.
    """
    system = gram_system(A, d)
    coeffs = solve_normal_equations(system.gram, system.rhs, system.n_entries)
    return d.with_coefficients(coeffs)


def _search(op, cfg, term):
    return run_search(op, cfg.search, term, axial=op.ndim != 2)


def _subtract_terms(dense, alphas, buffer):
    if dense.ndim == 2 and len(alphas) == 1:
        rank1_update(dense, alphas[0], buffer[0][0], buffer[1][0])
    else:
        dense -= _expand_terms(dense.shape, alphas, buffer)


def greedy_decompose(A, cfg):
    """Greedy residual descent.

    Each step finds a cut ``(c, s_1..s_k)`` on the current residual and
    subtracts ``c / prod(n_i)`` times the sign outer product, which lowers
    ``||R||_F^2`` by exactly ``c^2 / prod(n_i)``. New terms are buffered and
    folded into the dense residual every ``cfg.flush_width`` steps.

    Returns
    -------
    decomposition : CutDecomposition
    report : CutReport
    """
    A = check_tensor(A, name="A")
    _check_budget(A.shape, cfg)
    N = A.size
    dense = A.copy()
    norm_sq = float(np.vdot(A, A))
    report = CutReport(math.sqrt(norm_sq), method="greedy")
    d = CutDecomposition.empty(A.shape)
    buffer = [SignMatrix(n) for n in A.shape]
    buffer_alphas = []

    def flush():
        nonlocal buffer, buffer_alphas
        if buffer_alphas:
            _subtract_terms(dense, buffer_alphas, buffer)
        buffer = [SignMatrix(n) for n in A.shape]
        buffer_alphas = []
        return float(np.vdot(dense, dense))

    for k in range(cfg.width):
        op = ImplicitResidual(dense, buffer_alphas, buffer)
        cut = _search(op, cfg, k)
        if cfg.min_value_fraction and cut.value <= cfg.min_value_fraction * math.sqrt(
            N * max(norm_sq, 0.0)
        ):
            break
        alpha = cut.value / N
        d.append(cut.signs, alpha)
        for f, s in zip(buffer, cut.signs):
            f.append(s)
        buffer_alphas.append(alpha)
        norm_sq -= cut.value**2 / N
        if len(buffer_alphas) >= cfg.flush_width:
            norm_sq = flush()
        if cfg.record_curve:
            report.steps.append(CutStep(k + 1, cut.value, math.sqrt(max(norm_sq, 0.0))))
    report.final_norm = math.sqrt(flush())
    return d, report


def lstsq_decompose(A, cfg):
    """Greedy sign search with least-squares re-fitting of all coefficients.

    Every step searches the explicit residual ``A - expand(current)``,
    appends the new sign term, extends the Gram matrix by one row and
    column, and re-solves the normal equations.
    """
    A = check_tensor(A, name="A")
    _check_budget(A.shape, cfg)
    N = A.size
    R = A.copy()
    norm = float(np.linalg.norm(A))
    report = CutReport(norm, method="lstsq")
    d = CutDecomposition.empty(A.shape)
    G = np.zeros((0, 0), dtype=np.int64)
    b = np.zeros(0)
    for k in range(cfg.width):
        cut = _search(ImplicitResidual(R), cfg, k)
        if cfg.min_value_fraction and cut.value <= cfg.min_value_fraction * math.sqrt(N) * norm:
            break
        d.append(cut.signs, 0.0)
        G = _grow_gram(G, _gram_column(d.factors, cut.signs))
        b = np.append(b, _rhs_entry(A, cut.signs))
        d.coefficients = solve_normal_equations(G, b, N)
        R = A - expand(d)
        norm = float(np.linalg.norm(R))
        if cfg.record_curve:
            report.steps.append(CutStep(k + 1, cut.value, norm))
    report.final_norm = norm
    return d, report


def _grow_gram(G, column):
    w = G.shape[0]
    out = np.empty((w + 1, w + 1), dtype=np.int64)
    out[:w, :w] = G
    out[:, w] = column
    out[w, :] = column
    return out


def _channel_values(R, signs):
    """Per-channel ``<s_1 x ... x s_k, R[..., q]>`` with channels last."""
    out = R
    for ax in range(len(signs) - 1, -1, -1):
        shape = [1] * out.ndim
        shape[ax] = out.shape[ax]
        out = np.where(signs[ax].negative.reshape(shape), -out, out).sum(axis=ax)
    return out


def _outer_signs(signs):
    out = np.ones(())
    for s in signs:
        out = np.multiply.outer(out, s.to_signs(np.float64))
    return out


def _channel_run(R, rng, max_sweeps):
    spatial = R.shape[:-1]
    q = R.shape[-1]
    signs = [pack_mask(rng.integers(0, 2, size=n, dtype=np.uint8).astype(bool)) for n in spatial]
    weights = np.full(q, 1.0 / math.sqrt(q))
    c_prev = -np.inf
    history = []
    for _ in range(max_sweeps):
        M = R @ weights
        for i in range(len(spatial)):
            others = [s for j, s in enumerate(signs) if j != i]
            signs[i] = pack_mask(axial_contract(M, i, others) < 0)
        v = _channel_values(R, signs)
        c = float(np.linalg.norm(v))
        history.append(c)
        if c <= c_prev or c == 0.0:
            break
        c_prev = c
        weights = v / c
    return v, tuple(signs), history


def _channel_search(R, search, term):
    best = None
    for restart in range(search.restarts):
        v, signs, history = _channel_run(R, substream(search.seed, term, restart), search.max_sweeps)
        if best is None or np.linalg.norm(v) > np.linalg.norm(best[0]):
            best = (v, signs, history)
    return best


def rgb_scalars_decompose(a, cfg, channel_axis=-1):
    """Shared sign factors on the spatial axes, one coefficient per channel.

    Each term is ``s_1 x ... x s_k x c_j`` with ``c_j`` real of length ``q``.
    Sign vectors are found by alternating between the spatial signs and the
    unit channel direction that maximizes ``||(<s, a[..., q]>)_q||_2``. With
    ``method="lstsq"`` all coefficients are re-fitted after each term using
    one Gram matrix and ``q`` right-hand sides.

    Returns
    -------
    decomposition : CutDecomposition
        ``channel_axis`` set, coefficients of shape ``(width, q)``.
    report : CutReport
        ``value`` per step is the Euclidean norm of the channel cut vector.
    """
    a = check_tensor(a, min_order=2, name="a")
    channel_axis %= a.ndim
    q = a.shape[channel_axis]
    if q > MAX_CHANNELS:
        raise ValueError(f"channel axis has length {q}, at most {MAX_CHANNELS} supported")
    _check_budget(a.shape, cfg, channel_axis)
    A = np.ascontiguousarray(np.moveaxis(a, channel_axis, -1))
    N = math.prod(A.shape[:-1])
    R = A.copy()
    norm = float(np.linalg.norm(A))
    report = CutReport(norm, method=cfg.method)
    d = CutDecomposition.empty(a.shape, channel_axis)
    G = np.zeros((0, 0), dtype=np.int64)
    b = np.zeros((0, q))
    for k in range(cfg.width):
        v, signs, _ = _channel_search(R, cfg.search, k)
        value = float(np.linalg.norm(v))
        if cfg.min_value_fraction and value <= cfg.min_value_fraction * math.sqrt(N) * norm:
            break
        if cfg.method == "greedy":
            coeff = v / N
            d.append(signs, coeff)
            R -= _outer_signs(signs)[..., None] * coeff
        else:
            d.append(signs, np.zeros(q))
            G = _grow_gram(G, _gram_column(d.factors, signs))
            b = np.vstack([b, _channel_values(A, list(signs))])
            d.coefficients = solve_normal_equations(G, b, N)
            R = A - np.moveaxis(expand(d), channel_axis, -1)
        norm = float(np.linalg.norm(R))
        if cfg.record_curve:
            report.steps.append(CutStep(k + 1, value, norm))
    report.final_norm = norm
    return d, report


def decompose(A, cfg, channel_axis=None):
    """Dispatch on ``cfg.method`` and the presence of a scalar channel axis."""
    if channel_axis is not None:
        return rgb_scalars_decompose(A, cfg, channel_axis)
    if cfg.method == "lstsq":
        return lstsq_decompose(A, cfg)
    return greedy_decompose(A, cfg)
