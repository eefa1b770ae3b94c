"""Signed cut decompositions of matrices and tensors.

Approximates a real tensor by a weighted sum of outer products of
{-1, +1}-valued vectors, stored as packed bits plus one real per term.
"""

from .containers import (
    FormatError,
    read_ppm,
    read_raw,
    read_scd,
    truncate_scd,
    write_ppm,
    write_raw,
    write_scd,
)
from .decompose import (
    CutDecomposition,
    CutReport,
    CutStep,
    DecomposeConfig,
    GramSystem,
    MemoryBudgetExceeded,
    correct_coefficients,
    decompose,
    expand,
    gram_system,
    greedy_decompose,
    lstsq_decompose,
    rgb_scalars_decompose,
    solve_normal_equations,
)
from .estimator import SignedCutApproximator
from .kernels import (
    SignMatrix,
    SignVector,
    axial_contract,
    delta_matvec,
    matvec_signed,
    pack_signs,
    rank1_update,
    sgn_vector,
    signed_dot,
    unpack_signs,
)
from .metrics import (
    CurvePoint,
    StorageModel,
    compression_rate,
    emit_curve,
    quantize_half,
    relative_error,
    width_for_compression,
)
from .search import (
    CutResult,
    InstanceTooLarge,
    SearchConfig,
    axial_greedy_cut,
    brute_force_cut,
    greedy_signed_cut,
)

__version__ = "0.1.0"

__all__ = [
    "CurvePoint",
    "CutDecomposition",
    "CutReport",
    "CutResult",
    "CutStep",
    "DecomposeConfig",
    "FormatError",
    "GramSystem",
    "InstanceTooLarge",
    "MemoryBudgetExceeded",
    "SearchConfig",
    "SignMatrix",
    "SignVector",
    "SignedCutApproximator",
    "StorageModel",
    "axial_contract",
    "axial_greedy_cut",
    "brute_force_cut",
    "compression_rate",
    "correct_coefficients",
    "decompose",
    "delta_matvec",
    "emit_curve",
    "expand",
    "gram_system",
    "greedy_decompose",
    "greedy_signed_cut",
    "lstsq_decompose",
    "matvec_signed",
    "pack_signs",
    "quantize_half",
    "rank1_update",
    "read_ppm",
    "read_raw",
    "read_scd",
    "relative_error",
    "rgb_scalars_decompose",
    "sgn_vector",
    "signed_dot",
    "solve_normal_equations",
    "truncate_scd",
    "unpack_signs",
    "width_for_compression",
    "write_ppm",
    "write_raw",
    "write_scd",
]
