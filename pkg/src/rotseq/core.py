"""Core rotation-sequence algorithms.

A dense matrix is a 2-D float64 numpy array in column-major layout
(``order='F'``, or any view whose first stride is one element, so row
sub-blocks of a larger column-major matrix work too). A sequence of
plane rotations is stored as paired cosine/sine matrices ``C`` and
``S`` of shape ``(n-1, k)``: entry ``(j, p)`` acts on columns ``j`` and
``j+1`` of the target matrix during sequence ``p``.

The module provides a single-rotation primitive, the straightforward
sequence loop, a wavefront reordering, a parallelogram block, and a
register-grouped ("fused") variant. All variants apply the exact same
multiset of transforms and, for every matrix element, the same 2x2
operations in the same order, so in strict arithmetic mode their
outputs are bit-identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numba.extending import register_jitable

from ._jit import dual


class TransformKind(enum.Enum):
    """2x2 action applied to a column pair.

    ROTATION is G = [[c, s], [-s, c]]. REFLECTOR is the symmetric
    orthogonal H = [[c, s], [s, -c]], evaluated with the 3-multiply /
    3-addition scheme (see ``apply_reflector_pair``).
    """

    ROTATION = "rotation"
    REFLECTOR = "reflector"


def require_colmajor(A: np.ndarray, name: str = "A") -> None:
    """Validate a column-major float64 matrix (views with ld > rows ok)."""
    if not isinstance(A, np.ndarray) or A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D numpy array")
    if A.dtype != np.float64:
        raise ValueError(f"{name} must have dtype float64, got {A.dtype}")
    if A.shape[0] > 1 and A.strides[0] != A.itemsize:
        raise ValueError(
            f"{name} must be column-major (order='F' or a row block of an "
            "F-ordered array); use np.asfortranarray"
        )


@dataclass(frozen=True)
class RotationSequence:
    """k sequences of n-1 transforms acting on an n-column matrix.

    ``C`` and ``S`` have shape ``(n_cols - 1, k)`` in column-major
    layout. ``orthonormal`` records whether c^2 + s^2 = 1 was verified
    at construction; norm-preservation guarantees only hold when it is
    set.
    """

    n_cols: int
    k: int
    C: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    orthonormal: bool = True

    ORTHONORMAL_TOL = 1e-12

    @classmethod
    def from_arrays(cls, C, S, check_orthonormal: bool = True) -> "RotationSequence":
        C = np.asfortranarray(C, dtype=np.float64)
        S = np.asfortranarray(S, dtype=np.float64)
        if C.ndim != 2 or C.shape != S.shape:
            raise ValueError(f"C and S must share a 2-D shape, got {C.shape} vs {S.shape}")
        rows, k = C.shape
        if rows < 1 or k < 1:
            raise ValueError("sequence needs at least one rotation row and one sequence")
        ok = True
        if check_orthonormal:
            err = np.abs(C * C + S * S - 1.0).max()
            if err > cls.ORTHONORMAL_TOL:
                raise ValueError(
                    f"c^2 + s^2 deviates from 1 by {err:.3e} (> {cls.ORTHONORMAL_TOL}); "
                    "pass check_orthonormal=False to accept non-orthonormal input"
                )
        else:
            ok = bool(np.abs(C * C + S * S - 1.0).max() <= cls.ORTHONORMAL_TOL)
        return cls(n_cols=rows + 1, k=k, C=C, S=S, orthonormal=ok)


def generate_sequence(n: int, k: int, seed: int) -> RotationSequence:
    """Deterministic random orthonormal sequence for tests and benchmarks.

    Angles are drawn uniformly from [0, 2*pi) with the counter-based
    Philox generator, so the result is reproducible across platforms
    and processes for a fixed (n, k, seed).
    """
    if n < 2:
        raise ValueError(f"need n >= 2 columns, got {n}")
    if k < 1:
        raise ValueError(f"need k >= 1 sequences, got {k}")
    rng = np.random.Generator(np.random.Philox(seed))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(n - 1, k))
    return RotationSequence.from_arrays(np.cos(theta), np.sin(theta))


def _check_apply_args(A, seq: RotationSequence) -> None:
    require_colmajor(A)
    if A.shape[1] < 2:
        raise ValueError(f"matrix needs at least 2 columns, got {A.shape[1]}")
    if seq.n_cols != A.shape[1]:
        raise ValueError(
            f"sequence acts on {seq.n_cols} columns but matrix has {A.shape[1]}"
        )


# ---------------------------------------------------------------------------
# jitted bodies
#
# Every traversal funnels through the same two scalar formulas so that
# outputs are bit-identical in strict mode:
#   rotation:  t = c*x + s*y;  y' = c*y - s*x;  x' = t
#   reflector: w = s*(x + y);  x' = w + (c-s)*x;  y' = w - (c+s)*y
# ---------------------------------------------------------------------------


@register_jitable(inline="always")
def _rot_cols(A, j, r0, r1, c, s):
    for i in range(r0, r1):
        xv = A[i, j]
        yv = A[i, j + 1]
        t = c * xv + s * yv
        A[i, j + 1] = c * yv - s * xv
        A[i, j] = t


@register_jitable(inline="always")
def _refl_cols(A, j, r0, r1, c, s):
    d = c - s
    e = c + s
    for i in range(r0, r1):
        xv = A[i, j]
        yv = A[i, j + 1]
        w = s * (xv + yv)
        A[i, j] = w + d * xv
        A[i, j + 1] = w - e * yv


@register_jitable(inline="always")
def _span_impl(A, C, S, p0, kw, t0, t1, r0, r1, refl):
    # Waves t in [t0, t1) of the kw-wide sequence chunk starting at
    # global sequence p0, restricted to rows [r0, r1). Wave t applies
    # transforms (q = t - l, p0 + l) for ascending lane l.
    n = A.shape[1]
    for t in range(t0, t1):
        lo = t - (n - 2)
        if lo < 0:
            lo = 0
        hi = kw - 1
        if t < hi:
            hi = t
        for l in range(lo, hi + 1):
            q = t - l
            c = C[q, p0 + l]
            s = S[q, p0 + l]
            if refl:
                _refl_cols(A, q, r0, r1, c, s)
            else:
                _rot_cols(A, q, r0, r1, c, s)


def _rot_pair_py(x, y, c, s):
    for i in range(x.shape[0]):
        xv = x[i]
        yv = y[i]
        t = c * xv + s * yv
        y[i] = c * yv - s * xv
        x[i] = t


def _refl_pair_py(x, y, c, s):
    d = c - s
    e = c + s
    for i in range(x.shape[0]):
        xv = x[i]
        yv = y[i]
        w = s * (xv + yv)
        x[i] = w + d * xv
        y[i] = w - e * yv


def _naive_py(A, C, S, refl):
    n = A.shape[1]
    m = A.shape[0]
    for p in range(C.shape[1]):
        for j in range(n - 1):
            c = C[j, p]
            s = S[j, p]
            if refl:
                _refl_cols(A, j, 0, m, c, s)
            else:
                _rot_cols(A, j, 0, m, c, s)


def _wave_span_py(A, C, S, p0, kw, t0, t1, r0, r1, refl):
    _span_impl(A, C, S, p0, kw, t0, t1, r0, r1, refl)


def _block_py(A, C, S, refl):
    # Parallelogram block: A has nb + kb columns, C and S are
    # (nb + kb - 1) x kb; sequence p covers rows kb-1-p .. nb-p-1.
    m = A.shape[0]
    kb = C.shape[1]
    nb = A.shape[1] - kb
    for p in range(kb):
        for j in range(kb - 1 - p, nb - p):
            c = C[j, p]
            s = S[j, p]
            if refl:
                _refl_cols(A, j, 0, m, c, s)
            else:
                _rot_cols(A, j, 0, m, c, s)


def _fused_band_generic_py(A, C, S, p0, kb, n_r, n_groups, refl):
    # Full n_r x kb groups of one band, anchors ascending. Boundary
    # cells are handled by the caller with wave spans.
    m = A.shape[0]
    for g in range(n_groups):
        a = kb - 1 + g * n_r
        for b in range(kb):
            for r in range(n_r):
                q = a + r - b
                c = C[q, p0 + b]
                s = S[q, p0 + b]
                if refl:
                    _refl_cols(A, q, 0, m, c, s)
                else:
                    _rot_cols(A, q, 0, m, c, s)


def _fused_band_2x2_py(A, C, S, p0, n_groups, refl):
    # Specialized 2x2 band: each group keeps its four column values in
    # locals through the whole member sequence, so every touched column
    # is loaded and stored once per group.
    m = A.shape[0]
    for g in range(n_groups):
        a = 1 + 2 * g
        j = a - 1
        c1 = C[a, p0]
        s1 = S[a, p0]
        c2 = C[a + 1, p0]
        s2 = S[a + 1, p0]
        c3 = C[a - 1, p0 + 1]
        s3 = S[a - 1, p0 + 1]
        c4 = C[a, p0 + 1]
        s4 = S[a, p0 + 1]
        if refl:
            d1 = c1 - s1
            e1 = c1 + s1
            d2 = c2 - s2
            e2 = c2 + s2
            d3 = c3 - s3
            e3 = c3 + s3
            d4 = c4 - s4
            e4 = c4 + s4
            for i in range(m):
                v0 = A[i, j]
                v1 = A[i, j + 1]
                v2 = A[i, j + 2]
                v3 = A[i, j + 3]
                w = s1 * (v1 + v2)
                v1 = w + d1 * v1
                v2 = w - e1 * v2
                w = s2 * (v2 + v3)
                v2 = w + d2 * v2
                v3 = w - e2 * v3
                w = s3 * (v0 + v1)
                v0 = w + d3 * v0
                v1 = w - e3 * v1
                w = s4 * (v1 + v2)
                v1 = w + d4 * v1
                v2 = w - e4 * v2
                A[i, j] = v0
                A[i, j + 1] = v1
                A[i, j + 2] = v2
                A[i, j + 3] = v3
        else:
            for i in range(m):
                v0 = A[i, j]
                v1 = A[i, j + 1]
                v2 = A[i, j + 2]
                v3 = A[i, j + 3]
                t = c1 * v1 + s1 * v2
                v2 = c1 * v2 - s1 * v1
                v1 = t
                t = c2 * v2 + s2 * v3
                v3 = c2 * v3 - s2 * v2
                v2 = t
                t = c3 * v0 + s3 * v1
                v1 = c3 * v1 - s3 * v0
                v0 = t
                t = c4 * v1 + s4 * v2
                v2 = c4 * v2 - s4 * v1
                v1 = t
                A[i, j] = v0
                A[i, j + 1] = v1
                A[i, j + 2] = v2
                A[i, j + 3] = v3


_rot_pair = dual(_rot_pair_py)
_refl_pair = dual(_refl_pair_py)
_naive = dual(_naive_py)
_wave_span = dual(_wave_span_py)
_block = dual(_block_py)
_fused_band_generic = dual(_fused_band_generic_py)
_fused_band_2x2 = dual(_fused_band_2x2_py)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def rot(x: np.ndarray, y: np.ndarray, c: float, s: float) -> None:
    """Apply one plane rotation to the vector pair (x, y), in place.

    x[i] <- c*x[i] + s*y[i] and y[i] <- -s*x[i] + c*y[i], both using
    the old values.
    """
    _check_pair(x, y)
    _rot_pair.strict(x, y, float(c), float(s))


def apply_reflector_pair(
    x: np.ndarray, y: np.ndarray, c: float, s: float, check_orthonormal: bool = False
) -> None:
    """Apply one 2x2 reflector H = [[c, s], [s, -c]] to (x, y), in place.

    Evaluated as w = s*(x+y); x' = w + (c-s)*x; y' = w - (c+s)*y, which
    costs 3 multiplies and 3 additions per pair with (c-s) and (c+s)
    hoisted out of the loop, and the two trailing updates shaped for
    fused multiply-add.
    """
    _check_pair(x, y)
    if check_orthonormal and abs(c * c + s * s - 1.0) > RotationSequence.ORTHONORMAL_TOL:
        raise ValueError(f"c^2 + s^2 = {c * c + s * s!r} is not 1")
    _refl_pair.strict(x, y, float(c), float(s))


def _check_pair(x, y):
    for v, name in ((x, "x"), (y, "y")):
        if not isinstance(v, np.ndarray) or v.ndim != 1 or v.dtype != np.float64:
            raise ValueError(f"{name} must be a 1-D float64 array")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if np.shares_memory(x, y):
        raise ValueError("x and y must not alias")


def apply_naive(
    A: np.ndarray,
    seq: RotationSequence,
    kind: TransformKind = TransformKind.ROTATION,
    fast: bool = False,
) -> None:
    """Apply all (n-1)*k transforms in plain order: sequences outer,
    column index inner."""
    _check_apply_args(A, seq)
    _naive.pick(fast)(A, seq.C, seq.S, kind is TransformKind.REFLECTOR)


def apply_wavefront(
    A: np.ndarray,
    seq: RotationSequence,
    kind: TransformKind = TransformKind.ROTATION,
    fast: bool = False,
) -> None:
    """Apply the sequence reordered into diagonal waves.

    Wave t applies transforms (t - l, l) for ascending lane l; startup
    waves grow from 1 to k-1 transforms, pipeline waves hold k,
    shutdown waves shrink back to 1. Requires k <= n-1.
    """
    _check_apply_args(A, seq)
    n, k = seq.n_cols, seq.k
    if k > n - 1:
        raise ValueError(
            f"wavefront needs k <= n-1 (got k={k}, n={n}); use apply_blocked, "
            "which chunks k"
        )
    refl = kind is TransformKind.REFLECTOR
    _wave_span.pick(fast)(A, seq.C, seq.S, 0, k, 0, n + k - 2, 0, A.shape[0], refl)


def apply_block(
    A_block: np.ndarray,
    C_block: np.ndarray,
    S_block: np.ndarray,
    kind: TransformKind = TransformKind.ROTATION,
    fast: bool = False,
) -> None:
    """Apply one parallelogram block of k*(n-k+1) transforms.

    ``A_block`` has n+k columns; ``C_block``/``S_block`` are
    (n+k-1) x k with the parallelogram region populated. Sequence p
    covers rotation rows k-1-p through n-p-1, so the block has no
    startup or shutdown phase.
    """
    require_colmajor(A_block)
    C_block = np.asarray(C_block)
    S_block = np.asarray(S_block)
    if C_block.shape != S_block.shape or C_block.ndim != 2:
        raise ValueError("C_block and S_block must share a 2-D shape")
    kb = C_block.shape[1]
    nb = A_block.shape[1] - kb
    if C_block.shape[0] != nb + kb - 1:
        raise ValueError(
            f"expected coefficient rows = A columns - 1 = {A_block.shape[1] - 1}, "
            f"got {C_block.shape[0]}"
        )
    if kb > nb:
        raise ValueError(f"block needs k <= n, got k={kb}, n={nb}")
    Cb = np.asfortranarray(C_block, dtype=np.float64)
    Sb = np.asfortranarray(S_block, dtype=np.float64)
    _block.pick(fast)(A_block, Cb, Sb, kind is TransformKind.REFLECTOR)


def _fused_group_count(n: int, kb: int, n_r: int) -> int:
    if n - kb - n_r >= 0:
        return (n - kb - n_r) // n_r + 1
    return 0


def apply_fused(
    A: np.ndarray,
    seq: RotationSequence,
    n_r: int,
    k_r: int,
    kind: TransformKind = TransformKind.ROTATION,
    fast: bool = False,
) -> None:
    """Apply the sequence in n_r x k_r register groups.

    The group anchored at rotation row a in a band of k_r sequences
    contains members (a + r - b, band_start + b), applied for ascending
    b then ascending r, so each of the n_r + k_r touched columns is
    loaded and stored once per group. Bands of k_r sequences are
    processed in order; cells that do not fit a full group (the band's
    startup triangle and ragged tail) fall back to single transforms in
    wavefront order. With n_r = k_r = 1 the traversal is exactly the
    wavefront order.
    """
    _check_apply_args(A, seq)
    if n_r < 1 or k_r < 1:
        raise ValueError(f"group shape must be positive, got {n_r} x {k_r}")
    refl = kind is TransformKind.REFLECTOR
    n, k = seq.n_cols, seq.k
    m = A.shape[0]
    span = _wave_span.pick(fast)
    if n_r == 1 and k_r == 1:
        span(A, seq.C, seq.S, 0, k, 0, n + k - 2, 0, m, refl)
        return
    band2 = _fused_band_2x2.pick(fast)
    bandg = _fused_band_generic.pick(fast)
    for p0 in range(0, k, k_r):
        kb = min(k_r, k - p0)
        G = _fused_group_count(n, kb, n_r)
        span(A, seq.C, seq.S, p0, kb, 0, kb - 1, 0, m, refl)
        if n_r == 2 and kb == 2:
            band2(A, seq.C, seq.S, p0, G, refl)
        else:
            bandg(A, seq.C, seq.S, p0, kb, n_r, G, refl)
        span(A, seq.C, seq.S, p0, kb, kb - 1 + G * n_r, n + kb - 2, 0, m, refl)


# ---------------------------------------------------------------------------
# traversal generators: pure-python mirrors of the jitted loops, used
# by the instrumented runner and the order-equivalence tests
# ---------------------------------------------------------------------------


def naive_traversal(n: int, k: int):
    for p in range(k):
        for j in range(n - 1):
            yield j, p


def wavefront_traversal(n: int, k: int):
    for t in range(n + k - 2):
        for l in range(max(0, t - (n - 2)), min(k - 1, t) + 1):
            yield t - l, l


def block_traversal(n: int, k: int):
    """Transform order of one parallelogram block whose coefficient
    arrays have n+k-1 rows."""
    for p in range(k):
        for j in range(k - 1 - p, n - p):
            yield j, p


def fused_groups(n: int, k: int, n_r: int, k_r: int):
    """Groups of apply_fused, in traversal order.

    Yields (members, is_full_group); members list the (q, p) transforms
    in application order.
    """
    if n_r == 1 and k_r == 1:
        for q, p in wavefront_traversal(n, k):
            yield [(q, p)], False
        return
    for p0 in range(0, k, k_r):
        kb = min(k_r, k - p0)
        G = _fused_group_count(n, kb, n_r)
        for t in range(kb - 1):
            for l in range(max(0, t - (n - 2)), min(kb - 1, t) + 1):
                yield [(t - l, p0 + l)], False
        for g in range(G):
            a = kb - 1 + g * n_r
            yield [(a + r - b, p0 + b) for b in range(kb) for r in range(n_r)], True
        for t in range(kb - 1 + G * n_r, n + kb - 2):
            for l in range(max(0, t - (n - 2)), min(kb - 1, t) + 1):
                yield [(t - l, p0 + l)], False


def fused_traversal(n: int, k: int, n_r: int, k_r: int):
    for members, _ in fused_groups(n, k, n_r, k_r):
        yield from members
