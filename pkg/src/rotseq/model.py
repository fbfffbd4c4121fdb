"""Analytic memory-operation and I/O models, plus instrumented runs
that validate the formulas against counted accesses on small inputs.

Counting granularity is one matrix element = one memory operation,
matching the units of the closed-form expressions. All formulas are
normalized per block by X = m_b * (n_b - k_b) * k_b applied transforms:

  basic   total = 4*X + 2*(n_b - k_b)*k_b            (plain column passes)
  fused   total = (2/n_r + 2/k_r + 2/m_b) * X        (n_r x k_r groups)
  kernel  total = (2/k_r + 2/n_b + 2/m_r) * X        (panel-resident waves)

The instrumented runners replay each variant's exact traversal with
numpy column operations (bit-identical to the strict jitted paths) and
count loads/stores at the model's granularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocking import BlockPlan, pack_row_block, unpack_row_block, _chunk_widths
from .core import (
    RotationSequence,
    TransformKind,
    fused_groups,
    generate_sequence,
    naive_traversal,
    wavefront_traversal,
)
from .kernels import KernelShape

INSTRUMENT_LIMIT = 1 << 20


@dataclass(frozen=True)
class MemOpReport:
    formula_id: str
    loads: float
    stores: float
    per_rotation_factor: float

    @property
    def total(self) -> float:
        return self.loads + self.stores

    def csv_row(self, params: dict) -> str:
        p = ";".join(f"{k}={v}" for k, v in params.items())
        return (
            f"{self.formula_id},{p},{self.loads:.6g},{self.stores:.6g},"
            f"{self.total:.6g},{self.per_rotation_factor:.6g}"
        )


@dataclass(frozen=True)
class IoReport:
    lower_bound: float
    wavefront_io: float
    op_intensity_bound: float
    op_intensity_wavefront: float
    flops: float


def _check_block_params(m_b, n_b, k_b):
    if m_b < 1 or n_b < 1 or k_b < 1:
        raise ValueError(f"block parameters must be positive: {m_b}, {n_b}, {k_b}")
    if n_b <= k_b:
        raise ValueError(f"model needs n_b > k_b, got n_b={n_b}, k_b={k_b}")


def memops_basic(m_b: int, n_b: int, k_b: int) -> MemOpReport:
    """Element traffic of plain column-pass application of one block:
    2 loads and 2 stores of the target per transform row, plus the
    coefficient pair."""
    _check_block_params(m_b, n_b, k_b)
    X = m_b * (n_b - k_b) * k_b
    loads = 2.0 * X + 2.0 * (n_b - k_b) * k_b
    stores = 2.0 * X
    return MemOpReport("basic", loads, stores, (loads + stores) / X)


def memops_fused(n_r: int, k_r: int, m_b: int, n_b: int, k_b: int) -> MemOpReport:
    """Element traffic with n_r x k_r register groups: each group of
    n_r*k_r transforms moves its n_r + k_r columns once."""
    if n_r < 1 or k_r < 1:
        raise ValueError(f"group shape must be positive, got {n_r} x {k_r}")
    _check_block_params(m_b, n_b, k_b)
    X = m_b * (n_b - k_b) * k_b
    a_side = (1.0 / n_r + 1.0 / k_r) * X
    loads = a_side + (2.0 / m_b) * X
    stores = a_side
    return MemOpReport("fused", loads, stores, (loads + stores) / X)


def memops_kernel(k_r: int, m_r: int, m_b: int, n_b: int, k_b: int) -> MemOpReport:
    """Element traffic of the panel kernel: one column enters and one
    leaves the resident window per wave of k_r transforms, while
    coefficients stream past."""
    if k_r < 1 or m_r < 1:
        raise ValueError(f"kernel shape must be positive, got {m_r} x {k_r}")
    _check_block_params(m_b, n_b, k_b)
    X = m_b * (n_b - k_b) * k_b
    a_side = (1.0 / k_r + 1.0 / n_b) * X
    loads = a_side + (2.0 / m_r) * X
    stores = a_side
    return MemOpReport("kernel", loads, stores, (loads + stores) / X)


def fused_register_budget(n_r: int, k_r: int) -> int:
    """Values a fused group must keep resident: the group's coefficient
    pairs plus one value per touched column."""
    return 2 * n_r * k_r + k_r + n_r


def model_flops(m: int, n: int, k: int) -> float:
    """Asymptotic operation count used by the I/O model (6 per element
    per transform)."""
    return 6.0 * m * n * k


def flops_applied(m: int, n: int, k: int) -> float:
    """Exact flop count of one full application: (n-1)*k transforms of
    6 flops over m rows (reflectors cost the same 6)."""
    return 6.0 * m * (n - 1) * k


def io_models(m: int, n: int, k: int, S: int, m_b: int, k_b: int) -> IoReport:
    """Two-level-memory traffic estimates for a cache of S elements.

    The wavefront sweep moves one m_b column in, one out, and 2*k_b
    coefficients per m_b*k_b transforms, so its traffic is
    (m*n*k / (m_b*k_b)) * (2*m_b + 2*k_b); the transfer lower bound is
    m*n*k / sqrt(S).
    """
    if min(m, n, k, S, m_b, k_b) < 1:
        raise ValueError("all io_models parameters must be positive")
    if m_b * k_b > S:
        raise ValueError(
            f"m_b*k_b = {m_b * k_b} exceeds cache size S = {S}; the residency "
            "assumption behind the wavefront I/O estimate fails"
        )
    flops = model_flops(m, n, k)
    work = float(m) * n * k
    lower = work / math.sqrt(S)
    wf = work / (m_b * k_b) * (2.0 * m_b + 2.0 * k_b)
    return IoReport(
        lower_bound=lower,
        wavefront_io=wf,
        op_intensity_bound=6.0 * math.sqrt(S),
        op_intensity_wavefront=flops / wf,
        flops=flops,
    )


# ---------------------------------------------------------------------------
# instrumented runs
# ---------------------------------------------------------------------------


@dataclass
class Counters:
    rotations: int = 0
    a_loads: int = 0
    a_stores: int = 0
    coef_loads: int = 0
    kernel_calls: list = field(default_factory=list)
    block_events: list = field(default_factory=list)
    rotation_multiset: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.a_loads + self.a_stores + self.coef_loads


def _np_apply(A, q, c, s, refl):
    x = A[:, q].copy()
    y = A[:, q + 1].copy()
    if refl:
        w = s * (x + y)
        A[:, q] = w + (c - s) * x
        A[:, q + 1] = w - (c + s) * y
    else:
        A[:, q] = c * x + s * y
        A[:, q + 1] = c * y - s * x


def _np_apply_panel(P, q, c, s, refl):
    x = P[q].copy()
    y = P[q + 1].copy()
    if refl:
        w = s * (x + y)
        P[q] = w + (c - s) * x
        P[q + 1] = w - (c + s) * y
    else:
        P[q] = c * x + s * y
        P[q + 1] = c * y - s * x


def instrumented_apply(
    variant: str,
    A: np.ndarray,
    seq: RotationSequence,
    kind: TransformKind = TransformKind.ROTATION,
    n_r: int = 2,
    k_r: int = 2,
    plan: BlockPlan | None = None,
    shape: KernelShape | None = None,
) -> tuple[np.ndarray, Counters]:
    """Shadow execution of a variant: returns (output, counters).

    The output is produced by replaying the variant's exact transform
    order, so in strict mode it is bit-identical to the jitted variant.
    Element traffic is counted at each variant's model granularity.
    Sizes are limited to m*n <= 2**20 to keep shadow counting cheap.
    """
    m, n = A.shape
    if m * n > INSTRUMENT_LIMIT:
        raise ValueError(f"instrumented runs limited to m*n <= {INSTRUMENT_LIMIT}")
    if seq.n_cols != n:
        raise ValueError(f"sequence acts on {seq.n_cols} columns, matrix has {n}")
    refl = kind is TransformKind.REFLECTOR
    out = np.array(A, order="F", copy=True)
    cnt = Counters()
    k = seq.k
    C, S = seq.C, seq.S

    def one(q, p, rows=m, target=out):
        _np_apply(target, q, C[q, p], S[q, p], refl)
        cnt.rotations += 1
        cnt.rotation_multiset.append((q, p))
        cnt.a_loads += 2 * rows
        cnt.a_stores += 2 * rows
        cnt.coef_loads += 2

    if variant == "naive":
        for q, p in naive_traversal(n, k):
            one(q, p)
    elif variant == "wavefront":
        if k > n - 1:
            raise ValueError("wavefront needs k <= n-1")
        for q, p in wavefront_traversal(n, k):
            one(q, p)
    elif variant == "fused":
        for members, full in fused_groups(n, k, n_r, k_r):
            if full:
                cols = n_r + k_r
                cnt.a_loads += m * cols
                cnt.a_stores += m * cols
                cnt.coef_loads += 2 * len(members)
                for q, p in members:
                    _np_apply(out, q, C[q, p], S[q, p], refl)
                    cnt.rotations += 1
                    cnt.rotation_multiset.append((q, p))
            else:
                one(*members[0])
    elif variant == "blocked":
        if plan is None:
            raise ValueError("blocked instrumentation needs a BlockPlan")
        # transform counts are logical (each row block replays the same
        # schedule), so only the first row block feeds the counter
        for rb in range(0, m, plan.m_b):
            rc = min(plan.m_b, m - rb)
            view = out[rb:rb + rc]
            first = rb == 0
            for p0, kw in _chunk_widths(k, plan.k_b, n):
                total = n + kw - 2
                for t0 in range(0, total, plan.n_b):
                    cnt.block_events.append((rb, p0, t0))
                    for t in range(t0, min(t0 + plan.n_b, total)):
                        for l in range(max(0, t - (n - 2)), min(kw - 1, t) + 1):
                            q, p = t - l, p0 + l
                            _np_apply(view, q, C[q, p], S[q, p], refl)
                            if first:
                                cnt.rotations += 1
                                cnt.rotation_multiset.append((q, p))
                            cnt.a_loads += 2 * rc
                            cnt.a_stores += 2 * rc
                            cnt.coef_loads += 2
    elif variant == "kernel":
        if plan is None or shape is None:
            raise ValueError("kernel instrumentation needs a BlockPlan and KernelShape")
        _instrumented_kernel(out, seq, plan, shape, refl, cnt)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return out, cnt


def _instrumented_kernel(out, seq, plan, shape, refl, cnt):
    m, n = out.shape
    k = seq.k
    C, S = seq.C, seq.S
    m_r, k_r = shape.m_r, shape.k_r

    def member(P, q, p, count):
        _np_apply_panel(P, q, C[q, p], S[q, p], refl)
        if count:
            cnt.rotations += 1
            cnt.rotation_multiset.append((q, p))

    for rb in range(0, m, plan.m_b):
        rc = min(plan.m_b, m - rb)
        first_block = rb == 0
        panels = pack_row_block(out, rb, rc, m_r)
        P3 = panels.panels3d
        for p0, kw in _chunk_widths(k, plan.k_b, n):
            for q in range(panels.n_panels):
                for pp in range(kw - 1):
                    for row in range(kw - 1 - pp):
                        member(P3[q], row, p0 + pp, first_block and q == 0)
                        cnt.a_loads += 2 * m_r
                        cnt.a_stores += 2 * m_r
                        cnt.coef_loads += 2
            nL = (kw + k_r - 1) // k_r
            for t0 in range(kw - 1, n - 1, plan.n_b):
                nw = min(plan.n_b, n - 1 - t0)
                cnt.block_events.append((rb, p0, t0))
                for q in range(panels.n_panels):
                    for l in range(nL):
                        kr_l = min(k_r, kw - l * k_r)
                        cnt.kernel_calls.append((nw, kr_l))
                        cnt.a_loads += m_r * (nw + kr_l)
                        cnt.a_stores += m_r * (nw + kr_l)
                        cnt.coef_loads += 2 * nw * kr_l
                        for w in range(nw):
                            for lam in range(kr_l):
                                q_row = t0 + w - l * k_r - lam
                                member(P3[q], q_row, p0 + l * k_r + lam,
                                       first_block and q == 0)
            for q in range(panels.n_panels):
                for pp in range(1, kw):
                    for row in range(n - 1 - pp, n - 1):
                        member(P3[q], row, p0 + pp, first_block and q == 0)
                        cnt.a_loads += 2 * m_r
                        cnt.a_stores += 2 * m_r
                        cnt.coef_loads += 2
        unpack_row_block(panels, out, rb)


def count_kernel_wave_traffic(m_r: int, k_r: int, n_waves: int) -> Counters:
    """Walk the kernel's sliding window and count panel traffic.

    Each of the n_waves + k_r touched columns enters the resident set
    once and is written back once; coefficients stream past, two per
    (wave, lane).
    """
    cnt = Counters()
    resident = list(range(k_r))
    cnt.a_loads += m_r * k_r
    for w in range(n_waves):
        resident.append(w + k_r)
        cnt.a_loads += m_r
        cnt.coef_loads += 2 * k_r
        cnt.rotations += k_r
        resident.remove(w)
        cnt.a_stores += m_r
    cnt.a_stores += m_r * len(resident)
    return cnt


@dataclass(frozen=True)
class BlockInstrumentation:
    """Counted traffic of one standalone pipeline block, next to the
    closed-form predictions."""

    basic: Counters
    kernel: Counters
    basic_formula: float
    kernel_formula: float
    outputs_match: bool

    @property
    def basic_ratio(self) -> float:
        return self.basic.total / self.basic_formula

    @property
    def kernel_ratio(self) -> float:
        return self.kernel.total / self.kernel_formula


def instrumented_pipeline_block(
    m_b: int,
    n_b: int,
    k_b: int,
    shape: KernelShape,
    kind: TransformKind = TransformKind.ROTATION,
    seed: int = 0,
) -> BlockInstrumentation:
    """Run one pipeline block (n_b - k_b waves of k_b transforms on
    m_b rows) through the plain and kernel decompositions, counting
    element traffic for both.

    The plain counters match the basic formula exactly; the kernel
    counters land within the startup-window correction of the kernel
    formula (the formulas describe the steady pipeline only).
    """
    _check_block_params(m_b, n_b, k_b)
    if m_b * n_b > INSTRUMENT_LIMIT:
        raise ValueError(f"instrumented runs limited to m_b*n_b <= {INSTRUMENT_LIMIT}")
    refl = kind is TransformKind.REFLECTOR
    W = n_b - k_b
    rng = np.random.Generator(np.random.Philox(seed))
    A0 = np.asfortranarray(rng.standard_normal((m_b, n_b)))
    seq = generate_sequence(n_b, k_b, seed + 1)
    C, S = seq.C, seq.S
    rotations = [(t - p, p) for p in range(k_b) for t in range(k_b - 1, k_b - 1 + W)]

    basic = Counters()
    out_basic = A0.copy(order="F")
    for q, p in sorted(rotations, key=lambda qp: (qp[1], qp[0])):
        _np_apply(out_basic, q, C[q, p], S[q, p], refl)
        basic.rotations += 1
        basic.a_loads += 2 * m_b
        basic.a_stores += 2 * m_b
        basic.coef_loads += 2

    m_r, k_r = shape.m_r, shape.k_r
    kern = Counters()
    out_kernel = A0.copy(order="F")
    panels = pack_row_block(out_kernel, 0, m_b, m_r)
    P3 = panels.panels3d
    nL = (k_b + k_r - 1) // k_r
    t0 = k_b - 1
    for q in range(panels.n_panels):
        for l in range(nL):
            kr_l = min(k_r, k_b - l * k_r)
            kern.kernel_calls.append((W, kr_l))
            kern.a_loads += m_r * (W + kr_l)
            kern.a_stores += m_r * (W + kr_l)
            kern.coef_loads += 2 * W * kr_l
            for w in range(W):
                for lam in range(kr_l):
                    row = t0 + w - l * k_r - lam
                    p = l * k_r + lam
                    _np_apply_panel(P3[q], row, C[row, p], S[row, p], refl)
                    kern.rotations += 1
    unpack_row_block(panels, out_kernel, 0)

    return BlockInstrumentation(
        basic=basic,
        kernel=kern,
        basic_formula=memops_basic(m_b, n_b, k_b).total,
        kernel_formula=memops_kernel(k_r, m_r, m_b, n_b, k_b).total,
        outputs_match=bool(np.array_equal(out_basic, out_kernel)),
    )
