"""Equivalence grids shared by the verify command and the test suite.

``run_variant`` is the single dispatch point for every algorithm the
package exposes; the grid runners apply each variant across a case
grid and compare against the plain loop (bitwise in strict mode) and
against the accumulated-Q oracle (tolerance-based).

Setting the environment variable ROTSEQ_PERTURB_KERNEL=1 injects a
one-ulp perturbation into kernel-path outputs; it exists so the
failure path of the verifier can itself be tested.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .blocking import (
    BlockPlan,
    CacheSpec,
    apply_blocked,
    apply_blocked_packed,
    choose_block_sizes,
    pack_row_block,
    unpack_row_block,
)
from .core import (
    RotationSequence,
    TransformKind,
    apply_fused,
    apply_naive,
    apply_wavefront,
    generate_sequence,
)
from .kernels import KernelShape
from .oracle import ComparisonReport, accumulate_q, compare, reference_multiply

FAULT_ENV = "ROTSEQ_PERTURB_KERNEL"

ALGORITHMS = ("naive", "wavefront", "blocked", "fused", "kernel", "kernel-prepacked")


def _maybe_perturb(A: np.ndarray) -> None:
    if os.environ.get(FAULT_ENV) and A.size:
        A.flat[0] = np.nextafter(A.flat[0], np.inf)


def run_variant(
    algo: str,
    A: np.ndarray,
    seq: RotationSequence,
    kind: TransformKind = TransformKind.ROTATION,
    fast: bool = False,
    plan: BlockPlan | None = None,
    shape: KernelShape | None = None,
    n_r: int = 2,
    k_r: int = 2,
    threads: int = 1,
) -> None:
    """Apply one named algorithm to A in place."""
    if algo == "naive":
        apply_naive(A, seq, kind, fast=fast)
    elif algo == "wavefront":
        apply_wavefront(A, seq, kind, fast=fast)
    elif algo == "fused":
        apply_fused(A, seq, n_r, k_r, kind, fast=fast)
    elif algo == "blocked":
        apply_blocked(A, seq, plan or default_plan(), shape=None, kind=kind,
                      threads=threads, fast=fast, use_kernel=False)
    elif algo == "kernel":
        shp = shape or default_shape()
        apply_blocked(A, seq, plan or default_plan(shp), shp,
                      kind=kind, threads=threads, fast=fast, use_kernel=True)
        _maybe_perturb(A)
    elif algo == "kernel-prepacked":
        shp = shape or default_shape()
        panels = pack_row_block(A, 0, A.shape[0], shp.m_r)
        apply_blocked_packed(panels, seq, plan or default_plan(shp), shp, kind=kind,
                             threads=threads, fast=fast)
        unpack_row_block(panels, A, 0)
        _maybe_perturb(A)
    else:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")


# Measured-fastest kernel shape for this build's JIT backend; the
# 16x2 / 8x5 / 12x3 / 48x1 shapes stay available through --mr/--kr.
DEFAULT_MR = 128
DEFAULT_KR = 4


def default_shape(m_r: int = DEFAULT_MR, k_r: int = DEFAULT_KR, mode: str = "strict") -> KernelShape:
    return KernelShape(m_r=m_r, k_r=k_r, mode=mode)


def default_plan(shape: KernelShape | None = None, cache: CacheSpec | None = None) -> BlockPlan:
    return choose_block_sizes(cache or CacheSpec(), shape or default_shape())


def make_inputs(m: int, n: int, k: int, seed: int) -> tuple[np.ndarray, RotationSequence]:
    rng = np.random.Generator(np.random.Philox(seed))
    A = np.asfortranarray(rng.standard_normal((m, n)))
    return A, generate_sequence(n, k, seed + 1)


@dataclass(frozen=True)
class CaseResult:
    algo: str
    config: str
    kind: str
    m: int
    n: int
    k: int
    report: ComparisonReport

    @property
    def ok(self) -> bool:
        return bool(self.report.passed)

    def __str__(self):
        tag = "ok " if self.ok else "FAIL"
        cfg = f"[{self.config}]" if self.config else ""
        return (
            f"{tag} {self.algo:16s}{cfg:14s} {self.kind:9s} "
            f"m={self.m:<4d} n={self.n:<4d} k={self.k:<3d} {self.report}"
        )


def variant_configs(quick: bool = False):
    """(algo, config-label, kwargs) triples for the equivalence grid."""
    plans = [
        ("plan8/2/16", BlockPlan(n_b=8, k_b=2, m_b=16)),
        ("plan7/3/40", BlockPlan(n_b=7, k_b=3, m_b=40)),
    ]
    if not quick:
        plans.append(("plan13/5/24", BlockPlan(n_b=13, k_b=5, m_b=24)))
    out = [
        ("wavefront", "", {}),
        ("fused", "2x2", dict(n_r=2, k_r=2)),
    ]
    for label, plan in plans:
        out.append(("blocked", label, dict(plan=plan)))
    shapes = [(16, 2), (8, 5)] if quick else [(16, 2), (8, 5), (12, 3), (4, 2)]
    for m_r, k_r in shapes:
        out.append((
            "kernel",
            f"{m_r}x{k_r}",
            dict(shape=KernelShape(m_r=m_r, k_r=k_r),
                 plan=BlockPlan(n_b=max(8, k_r + 1), k_b=max(4, k_r), m_b=2 * m_r)),
        ))
    out.append((
        "kernel-prepacked",
        "16x2",
        dict(shape=KernelShape(16, 2), plan=BlockPlan(n_b=8, k_b=4, m_b=16)),
    ))
    return out


def case_grid(quick: bool = False):
    if quick:
        ms = (3, 17, 64)
        ns = (9, 33, 64)
        ks = (1, 3, 8)
    else:
        ms = (2, 3, 8, 17, 32, 33, 64, 129, 257)
        ns = (4, 9, 16, 33, 64, 128, 256)
        ks = (1, 2, 3, 5, 8, 12)
    for m in ms:
        for n in ns:
            seen = set()
            for k in ks:
                k = min(k, n - 1)
                if k in seen:
                    continue
                seen.add(k)
                yield m, n, k


def bitwise_grid(kind: TransformKind, quick: bool = False, seed: int = 7):
    """Criterion-style strict-mode grid: every variant bit-identical to
    the plain loop."""
    configs = variant_configs(quick)
    for m, n, k in case_grid(quick):
        A0, seq = make_inputs(m, n, k, seed)
        ref = A0.copy(order="F")
        apply_naive(ref, seq, kind)
        for algo, label, kwargs in configs:
            if algo == "wavefront" and k > n - 1:
                continue
            got = A0.copy(order="F")
            run_variant(algo, got, seq, kind, fast=False, **kwargs)
            rep = compare(ref, got, tol_profile="strict")
            yield CaseResult(algo, label, kind.value, m, n, k, rep)


def oracle_grid(kind: TransformKind, seed: int = 11):
    """Accumulated-Q chain: every variant against reference_multiply."""
    tol = 1e-12 if kind is TransformKind.ROTATION else 1e-11
    configs = variant_configs(quick=True)
    for mn in (16, 48, 96):
        for k in (3, 18):
            A0, seq = make_inputs(mn, mn, k, seed)
            expected = reference_multiply(A0, accumulate_q(seq, kind))
            for algo, label, kwargs in configs + [("naive", "", {})]:
                if algo == "wavefront" and k > mn - 1:
                    continue
                got = A0.copy(order="F")
                run_variant(algo, got, seq, kind, fast=False, **kwargs)
                rep = compare(expected, got)
                rep = ComparisonReport(
                    max_abs_diff=rep.max_abs_diff,
                    max_rel_diff=rep.max_rel_diff,
                    frobenius_rel_diff=rep.frobenius_rel_diff,
                    bitwise_equal=rep.bitwise_equal,
                    passed=rep.frobenius_rel_diff <= tol,
                )
                yield CaseResult(algo, label, kind.value, mn, mn, k, rep)
