"""Independent correctness oracles and comparison utilities.

The main check used throughout the test suite: accumulate the whole
sequence into an explicit orthogonal matrix Q, multiply A by Q with a
deliberately naive triple loop, and compare against whichever variant
is under test. This route shares no traversal logic with the blocked
and kernel paths, so it catches ordering bugs that a replay-based
bitwise comparison could mask.

Tolerance profiles are centralized here so every module means the same
thing by "equal".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit_strict
from .core import RotationSequence, TransformKind, apply_naive, require_colmajor

EPS = float(np.finfo(np.float64).eps)


def fast_mode_tol(k: int) -> float:
    """Frobenius-relative (and row-scaled elementwise) bound for
    comparing fused-multiply-add output against strict output."""
    return 16.0 * max(k, 1) * EPS


def norm_preservation_tol(k: int) -> float:
    """Relative bound on row and Frobenius norm drift for orthonormal
    sequences."""
    return 100.0 * max(k, 1) * EPS


@dataclass(frozen=True)
class ComparisonReport:
    max_abs_diff: float
    max_rel_diff: float
    frobenius_rel_diff: float
    bitwise_equal: bool
    passed: bool | None = None

    def __str__(self):
        verdict = "" if self.passed is None else ("  PASS" if self.passed else "  FAIL")
        return (
            f"max|d|={self.max_abs_diff:.3e} rel={self.max_rel_diff:.3e} "
            f"fro={self.frobenius_rel_diff:.3e} bitwise={self.bitwise_equal}{verdict}"
        )


def compare(
    X: np.ndarray,
    Y: np.ndarray,
    tol_profile: str | None = None,
    k: int = 1,
) -> ComparisonReport:
    """Elementwise comparison report for two equally shaped matrices.

    ``tol_profile``: None (report only), 'strict' (pass iff bitwise
    equal) or 'fast' (pass iff the Frobenius-relative difference and
    the row-norm-scaled elementwise differences stay under
    ``fast_mode_tol(k)``).
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    bitwise = bool(np.array_equal(X.view(np.uint64), Y.view(np.uint64)))
    diff = np.abs(X - Y)
    max_abs = float(diff.max()) if diff.size else 0.0
    scale = np.maximum(np.abs(X), np.abs(Y))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(diff > 0, diff / np.maximum(scale, np.finfo(np.float64).tiny), 0.0)
    max_rel = float(rel.max()) if rel.size else 0.0
    x_fro = float(np.linalg.norm(X))
    fro_rel = float(np.linalg.norm(X - Y)) / (x_fro if x_fro > 0 else 1.0)
    passed = None
    if tol_profile == "strict":
        passed = bitwise
    elif tol_profile == "fast":
        tol = fast_mode_tol(k)
        if X.ndim == 2 and X.size:
            row_norms = np.linalg.norm(X, axis=1, keepdims=True)
            elem_ok = bool(np.all(diff <= tol * np.maximum(row_norms, np.finfo(np.float64).tiny)))
        else:
            elem_ok = max_abs <= tol
        passed = fro_rel <= tol and elem_ok
    elif tol_profile is not None:
        raise ValueError(f"unknown tolerance profile {tol_profile!r}")
    return ComparisonReport(
        max_abs_diff=max_abs,
        max_rel_diff=max_rel,
        frobenius_rel_diff=fro_rel,
        bitwise_equal=bitwise,
        passed=passed,
    )


def accumulate_q(
    seq: RotationSequence, kind: TransformKind = TransformKind.ROTATION
) -> np.ndarray:
    """Accumulate the sequence into the explicit n x n orthogonal matrix
    Q such that applying the sequence to A equals A @ Q."""
    Q = np.eye(seq.n_cols, order="F")
    apply_naive(Q, seq, kind)
    return Q


@njit_strict
def _matmul_naive(A, B, out):
    m, kk = A.shape
    n = B.shape[1]
    for j in range(n):
        for i in range(m):
            acc = 0.0
            for l in range(kk):
                acc += A[i, l] * B[l, j]
            out[i, j] = acc


def reference_multiply(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Plain triple-loop product A @ Q in double precision.

    Intentionally unblocked so it stays independent of the optimized
    code paths it is used to check.
    """
    require_colmajor(A)
    Q = np.asfortranarray(Q, dtype=np.float64)
    if A.shape[1] != Q.shape[0]:
        raise ValueError(f"inner dimensions disagree: {A.shape} x {Q.shape}")
    out = np.empty((A.shape[0], Q.shape[1]), order="F")
    _matmul_naive(A, Q, out)
    return out
