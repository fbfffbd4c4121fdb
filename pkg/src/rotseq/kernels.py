"""Register-reuse micro-kernels on packed panels.

A panel holds m_r rows of the matrix with columns stored contiguously:
shape (n_cols, m_r), C-contiguous, so panel[j] is column j. The kernel
applies n_waves waves of k_r transforms; wave w touches the column
window [w, w + k_r] and lane l rotates columns (w + k_r - 1 - l,
w + k_r - l), i.e. the wave walks down the dependency diagonal. Only
one column enters and one column leaves the working set per wave, so
panel traffic is m_r * (n_waves + k_r) loads and as many stores per
call, while coefficients stream past (2 * n_waves * k_r loads).

Coefficients arrive pre-gathered in wave-major tiles: entry
``tile[w * k_r + l]`` is the lane-l value of wave w.

Fixed-shape instantiations are provided for the (m_r, k_r) shapes
(16, 2), (8, 5), (12, 3) and (48, 1); they keep the whole column
window in locals for each row and are bit-identical to the generic
kernel. Anything else is served by the generic kernel, so block
planning never depends on a specialization being present.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._jit import dual

DEFAULT_VECTOR_REGISTERS = 16


@dataclass(frozen=True)
class KernelShape:
    """Micro-kernel tile: m_r rows per panel, k_r transforms per wave.

    ``vector_width`` (reals per hardware vector lane) is informational
    and only feeds the advisory register-budget warning; shapes that
    exceed the budget still run (the 48x1 configuration does).
    """

    m_r: int
    k_r: int
    vector_width: int = 4
    mode: str = "strict"

    def __post_init__(self):
        if self.m_r < 1 or self.k_r < 1:
            raise ValueError(f"kernel shape must be positive, got {self.m_r}x{self.k_r}")
        if self.mode not in ("strict", "fast"):
            raise ValueError(f"mode must be 'strict' or 'fast', got {self.mode!r}")
        lanes = -(-self.m_r // self.vector_width)
        budget = lanes * (self.k_r + 1) + 2
        if budget > DEFAULT_VECTOR_REGISTERS:
            warnings.warn(
                f"kernel {self.m_r}x{self.k_r} wants ~{budget} vector registers "
                f"(> {DEFAULT_VECTOR_REGISTERS}); expect spills",
                stacklevel=2,
            )

    @property
    def fast(self) -> bool:
        return self.mode == "fast"


@dataclass(frozen=True)
class PanelView:
    """Addressing of one panel inside a packed buffer: column j of the
    panel occupies m_r contiguous values at ``base + j * m_r``."""

    base: int
    n_cols: int
    m_r: int

    def as_array(self, buffer: np.ndarray) -> np.ndarray:
        end = self.base + self.n_cols * self.m_r
        return buffer[self.base:end].reshape(self.n_cols, self.m_r)


def _kern_generic_py(P, ct, st, n_waves, col0, k_r, refl):
    for w in range(n_waves):
        base = w * k_r
        for l in range(k_r):
            c = ct[base + l]
            s = st[base + l]
            j = col0 + w + k_r - 1 - l
            if refl:
                d = c - s
                e = c + s
                for i in range(P.shape[1]):
                    xv = P[j, i]
                    yv = P[j + 1, i]
                    wv = s * (xv + yv)
                    P[j, i] = wv + d * xv
                    P[j + 1, i] = wv - e * yv
            else:
                for i in range(P.shape[1]):
                    xv = P[j, i]
                    yv = P[j + 1, i]
                    t = c * xv + s * yv
                    P[j + 1, i] = c * yv - s * xv
                    P[j, i] = t


_kern_generic = dual(_kern_generic_py)


def _kern_16x2_py(P, ct, st, n_waves, col0, refl):
    for w in range(n_waves):
        j = col0 + w
        c1 = ct[2 * w]
        s1 = st[2 * w]
        c2 = ct[2 * w + 1]
        s2 = st[2 * w + 1]
        if refl:
            d1 = c1 - s1
            e1 = c1 + s1
            d2 = c2 - s2
            e2 = c2 + s2
            for i in range(16):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                wv = s1 * (v1 + v2)
                v1 = wv + d1 * v1
                v2 = wv - e1 * v2
                wv = s2 * (v0 + v1)
                v0 = wv + d2 * v0
                v1 = wv - e2 * v1
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2
        else:
            for i in range(16):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                t = c1 * v1 + s1 * v2
                v2 = c1 * v2 - s1 * v1
                v1 = t
                t = c2 * v0 + s2 * v1
                v1 = c2 * v1 - s2 * v0
                v0 = t
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2


def _kern_12x3_py(P, ct, st, n_waves, col0, refl):
    for w in range(n_waves):
        j = col0 + w
        c1 = ct[3 * w]
        s1 = st[3 * w]
        c2 = ct[3 * w + 1]
        s2 = st[3 * w + 1]
        c3 = ct[3 * w + 2]
        s3 = st[3 * w + 2]
        if refl:
            d1 = c1 - s1
            e1 = c1 + s1
            d2 = c2 - s2
            e2 = c2 + s2
            d3 = c3 - s3
            e3 = c3 + s3
            for i in range(12):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                v3 = P[j + 3, i]
                wv = s1 * (v2 + v3)
                v2 = wv + d1 * v2
                v3 = wv - e1 * v3
                wv = s2 * (v1 + v2)
                v1 = wv + d2 * v1
                v2 = wv - e2 * v2
                wv = s3 * (v0 + v1)
                v0 = wv + d3 * v0
                v1 = wv - e3 * v1
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2
                P[j + 3, i] = v3
        else:
            for i in range(12):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                v3 = P[j + 3, i]
                t = c1 * v2 + s1 * v3
                v3 = c1 * v3 - s1 * v2
                v2 = t
                t = c2 * v1 + s2 * v2
                v2 = c2 * v2 - s2 * v1
                v1 = t
                t = c3 * v0 + s3 * v1
                v1 = c3 * v1 - s3 * v0
                v0 = t
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2
                P[j + 3, i] = v3


def _kern_8x5_py(P, ct, st, n_waves, col0, refl):
    for w in range(n_waves):
        j = col0 + w
        b = 5 * w
        if refl:
            for i in range(8):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                v3 = P[j + 3, i]
                v4 = P[j + 4, i]
                v5 = P[j + 5, i]
                c = ct[b]
                s = st[b]
                wv = s * (v4 + v5)
                v4 = wv + (c - s) * v4
                v5 = wv - (c + s) * v5
                c = ct[b + 1]
                s = st[b + 1]
                wv = s * (v3 + v4)
                v3 = wv + (c - s) * v3
                v4 = wv - (c + s) * v4
                c = ct[b + 2]
                s = st[b + 2]
                wv = s * (v2 + v3)
                v2 = wv + (c - s) * v2
                v3 = wv - (c + s) * v3
                c = ct[b + 3]
                s = st[b + 3]
                wv = s * (v1 + v2)
                v1 = wv + (c - s) * v1
                v2 = wv - (c + s) * v2
                c = ct[b + 4]
                s = st[b + 4]
                wv = s * (v0 + v1)
                v0 = wv + (c - s) * v0
                v1 = wv - (c + s) * v1
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2
                P[j + 3, i] = v3
                P[j + 4, i] = v4
                P[j + 5, i] = v5
        else:
            for i in range(8):
                v0 = P[j, i]
                v1 = P[j + 1, i]
                v2 = P[j + 2, i]
                v3 = P[j + 3, i]
                v4 = P[j + 4, i]
                v5 = P[j + 5, i]
                c = ct[b]
                s = st[b]
                t = c * v4 + s * v5
                v5 = c * v5 - s * v4
                v4 = t
                c = ct[b + 1]
                s = st[b + 1]
                t = c * v3 + s * v4
                v4 = c * v4 - s * v3
                v3 = t
                c = ct[b + 2]
                s = st[b + 2]
                t = c * v2 + s * v3
                v3 = c * v3 - s * v2
                v2 = t
                c = ct[b + 3]
                s = st[b + 3]
                t = c * v1 + s * v2
                v2 = c * v2 - s * v1
                v1 = t
                c = ct[b + 4]
                s = st[b + 4]
                t = c * v0 + s * v1
                v1 = c * v1 - s * v0
                v0 = t
                P[j, i] = v0
                P[j + 1, i] = v1
                P[j + 2, i] = v2
                P[j + 3, i] = v3
                P[j + 4, i] = v4
                P[j + 5, i] = v5


def _kern_48x1_py(P, ct, st, n_waves, col0, refl):
    for w in range(n_waves):
        j = col0 + w
        c = ct[w]
        s = st[w]
        if refl:
            d = c - s
            e = c + s
            for i in range(48):
                xv = P[j, i]
                yv = P[j + 1, i]
                wv = s * (xv + yv)
                P[j, i] = wv + d * xv
                P[j + 1, i] = wv - e * yv
        else:
            for i in range(48):
                xv = P[j, i]
                yv = P[j + 1, i]
                t = c * xv + s * yv
                P[j + 1, i] = c * yv - s * xv
                P[j, i] = t


_kern_16x2 = dual(_kern_16x2_py)
_kern_12x3 = dual(_kern_12x3_py)
_kern_8x5 = dual(_kern_8x5_py)
_kern_48x1 = dual(_kern_48x1_py)

SPECIALIZED_SHAPES = {
    (16, 2): _kern_16x2,
    (12, 3): _kern_12x3,
    (8, 5): _kern_8x5,
    (48, 1): _kern_48x1,
}


def _check_panel(panel: np.ndarray) -> None:
    if (
        not isinstance(panel, np.ndarray)
        or panel.ndim != 2
        or panel.dtype != np.float64
        or not panel.flags.c_contiguous
    ):
        raise ValueError("panel must be a C-contiguous (n_cols, m_r) float64 array")


def kernel_wave_apply(
    panel: np.ndarray,
    C_tile: np.ndarray,
    S_tile: np.ndarray,
    n_waves: int,
    shape: KernelShape,
    kind=None,
    col0: int = 0,
    force_generic: bool = False,
) -> None:
    """Apply n_waves waves of k_r transforms to a packed panel.

    ``C_tile``/``S_tile`` are wave-major: one (c, s) per (wave, lane).
    Dispatches to a fixed-shape instantiation when one exists for
    (m_r, k_r), otherwise to the generic kernel; outputs are identical
    either way.
    """
    from .core import TransformKind

    _check_panel(panel)
    if panel.shape[1] != shape.m_r:
        raise ValueError(f"panel holds {panel.shape[1]} rows, shape wants {shape.m_r}")
    if panel.shape[0] - col0 < n_waves + shape.k_r:
        raise ValueError(
            f"panel has {panel.shape[0] - col0} usable columns, need "
            f"{n_waves + shape.k_r} for {n_waves} waves of {shape.k_r}"
        )
    ct = np.ascontiguousarray(C_tile, dtype=np.float64).ravel()
    st = np.ascontiguousarray(S_tile, dtype=np.float64).ravel()
    if ct.size < n_waves * shape.k_r or st.size < n_waves * shape.k_r:
        raise ValueError("coefficient tiles shorter than n_waves * k_r")
    refl = kind is TransformKind.REFLECTOR
    key = (shape.m_r, shape.k_r)
    if not force_generic and key in SPECIALIZED_SHAPES:
        SPECIALIZED_SHAPES[key].pick(shape.fast)(panel, ct, st, n_waves, col0, refl)
    else:
        _kern_generic.pick(shape.fast)(panel, ct, st, n_waves, col0, shape.k_r, refl)


def kernel_edge_apply(
    panel: np.ndarray,
    C: np.ndarray,
    S: np.ndarray,
    p0: int,
    k_chunk: int,
    triangle: str,
    shape: KernelShape,
    kind=None,
) -> None:
    """Apply a chunk's startup or shutdown triangle with k_r = 1 waves.

    The startup triangle runs, for each sequence offset pp, the row run
    [0, k_chunk-2-pp]; the shutdown triangle runs [n-1-pp, n-2]. Each
    run is a k_r=1 kernel pass, so the full-width kernel never sees a
    partial wave.
    """
    from .core import TransformKind

    _check_panel(panel)
    if triangle not in ("startup", "shutdown"):
        raise ValueError(f"triangle must be 'startup' or 'shutdown', got {triangle!r}")
    refl = kind is TransformKind.REFLECTOR
    n = panel.shape[0]
    kern = _kern_generic.pick(shape.fast)
    if triangle == "startup":
        for pp in range(k_chunk - 1):
            run = k_chunk - 1 - pp
            ct = np.ascontiguousarray(C[0:run, p0 + pp])
            st = np.ascontiguousarray(S[0:run, p0 + pp])
            kern(panel, ct, st, run, 0, 1, refl)
    else:
        for pp in range(1, k_chunk):
            q0 = n - 1 - pp
            ct = np.ascontiguousarray(C[q0:n - 1, p0 + pp])
            st = np.ascontiguousarray(S[q0:n - 1, p0 + pp])
            kern(panel, ct, st, pp, q0, 1, refl)


def edge_traversal(n: int, k_chunk: int, triangle: str):
    """(q, pp) order of kernel_edge_apply, pp relative to the chunk."""
    if triangle == "startup":
        for pp in range(k_chunk - 1):
            for q in range(k_chunk - 1 - pp):
                yield q, pp
    else:
        for pp in range(1, k_chunk):
            for q in range(n - 1 - pp, n - 1):
                yield q, pp
