import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import assert_bitwise, make_case
from rotseq.blocking import BlockPlan
from rotseq.core import TransformKind, apply_naive, apply_wavefront, apply_fused
from rotseq.blocking import apply_blocked
from rotseq.kernels import KernelShape
from rotseq.model import (
    flops_applied,
    fused_register_budget,
    instrumented_apply,
    instrumented_pipeline_block,
    io_models,
    memops_basic,
    memops_fused,
    memops_kernel,
    model_flops,
)


def test_memops_basic_smallest():
    rep = memops_basic(1, 2, 1)
    assert rep.total == 6
    assert rep.loads == 4 and rep.stores == 2


def test_memops_basic_reference_point():
    rep = memops_basic(100, 216, 60)
    assert rep.total == 4 * 100 * 156 * 60 + 2 * 156 * 60 == 3_762_720


def test_memops_basic_factor_limit():
    rep = memops_basic(10**9, 216, 60)
    assert rep.per_rotation_factor == pytest.approx(4.0, rel=1e-8)


def test_memops_fused_recovers_two_by_two():
    m_b, n_b, k_b = 64, 32, 8
    X = m_b * (n_b - k_b) * k_b
    rep = memops_fused(2, 2, m_b, n_b, k_b)
    assert rep.total == pytest.approx(2 * X + 2 * (n_b - k_b) * k_b, rel=1e-12)


def test_memops_fused_no_fusing_limit():
    rep = memops_fused(1, 1, 10**9, 216, 60)
    assert rep.per_rotation_factor == pytest.approx(4.0, rel=1e-8)


def test_fused_register_budget():
    assert fused_register_budget(2, 2) == 12


def test_memops_kernel_8x5_asymptote():
    rep = memops_kernel(5, 8, 100, 10**7, 60)
    assert rep.per_rotation_factor == pytest.approx(0.65, abs=1e-5)
    assert 2 / 5 + 2 / 8 == 0.65


def test_memops_kernel_16x2_asymptote():
    rep = memops_kernel(2, 16, 100, 10**7, 60)
    assert rep.per_rotation_factor == pytest.approx(1.125, abs=1e-5)


def test_memops_kernel_factor_decomposition():
    k_r, m_r, m_b, n_b, k_b = 2, 16, 64, 48, 12
    rep = memops_kernel(k_r, m_r, m_b, n_b, k_b)
    assert rep.per_rotation_factor == pytest.approx(2 / k_r + 2 / n_b + 2 / m_r, rel=1e-12)


def test_memops_errors():
    with pytest.raises(ValueError, match="n_b > k_b"):
        memops_basic(4, 6, 6)
    with pytest.raises(ValueError, match="positive"):
        memops_fused(0, 2, 4, 8, 2)
    with pytest.raises(ValueError, match="positive"):
        memops_kernel(2, 0, 4, 8, 2)


@settings(max_examples=200)
@given(
    k_r=st.integers(1, 12),
    m_r=st.integers(1, 64),
    n_b=st.integers(3, 400),
    k_b=st.integers(1, 40),
)
def test_memops_kernel_monotone(k_r, m_r, n_b, k_b):
    if k_b >= n_b:
        k_b = n_b - 1
    base = memops_kernel(k_r, m_r, 32, n_b, k_b).per_rotation_factor
    assert memops_kernel(k_r + 1, m_r, 32, n_b, k_b).per_rotation_factor <= base
    assert memops_kernel(k_r, m_r + 1, 32, n_b, k_b).per_rotation_factor <= base
    assert memops_kernel(k_r, m_r, 32, n_b + 1, k_b).per_rotation_factor <= base


def test_io_models_at_sqrt_s():
    m, n, k, S = 300, 400, 50, 10000
    io = io_models(m, n, k, S, 100, 100)
    assert io.wavefront_io == pytest.approx(4 * m * n * k / 100.0, rel=1e-12)
    assert io.op_intensity_wavefront == pytest.approx(1.5 * 100.0, rel=1e-12)
    assert io.op_intensity_bound == pytest.approx(6 * 100.0, rel=1e-12)
    assert io.wavefront_io / io.lower_bound == pytest.approx(4.0, rel=1e-12)
    assert io.flops == 6.0 * m * n * k


def test_io_models_residency_error():
    with pytest.raises(ValueError, match="residency|exceeds"):
        io_models(10, 10, 10, 100, 20, 20)


@settings(max_examples=200)
@given(
    m=st.integers(1, 1000),
    n=st.integers(1, 1000),
    k=st.integers(1, 300),
    S=st.integers(1, 10**6),
    m_b=st.integers(1, 1000),
    k_b=st.integers(1, 1000),
)
def test_io_wavefront_at_least_lower_bound(m, n, k, S, m_b, k_b):
    if m_b * k_b > S:
        S = m_b * k_b
    io = io_models(m, n, k, S, m_b, k_b)
    assert io.wavefront_io >= io.lower_bound


def test_flop_counts():
    assert flops_applied(10, 5, 3) == 6 * 10 * 4 * 3
    assert model_flops(10, 5, 3) == 6 * 10 * 5 * 3


# --- instrumented runs ------------------------------------------------------


def test_instrumented_block_basic_exact():
    res = instrumented_pipeline_block(16, 12, 4, KernelShape(16, 2))
    assert res.basic.total == res.basic_formula == 2112
    assert res.basic.rotations == (12 - 4) * 4


def test_instrumented_block_kernel_within_ten_percent():
    res = instrumented_pipeline_block(16, 12, 4, KernelShape(16, 2))
    assert res.outputs_match
    assert res.kernel.total == 704
    assert abs(res.kernel_ratio - 1.0) <= 0.10
    assert res.kernel.rotations == res.basic.rotations


def test_instrumented_block_reflector():
    res = instrumented_pipeline_block(16, 12, 4, KernelShape(8, 2), kind=TransformKind.REFLECTOR)
    assert res.outputs_match


@pytest.mark.parametrize("variant", ["naive", "wavefront", "fused", "blocked", "kernel"])
def test_rotation_count_conservation(variant):
    m = n = 32
    k = 5
    A0, seq = make_case(m, n, k, seed=1)
    out, cnt = instrumented_apply(
        variant, A0, seq,
        plan=BlockPlan(n_b=8, k_b=4, m_b=16), shape=KernelShape(8, 2),
    )
    assert cnt.rotations == (n - 1) * k
    from collections import Counter

    assert Counter(cnt.rotation_multiset) == Counter(
        (q, p) for p in range(k) for q in range(n - 1)
    )


@pytest.mark.parametrize(
    "variant,runner",
    [
        ("naive", lambda A, seq: apply_naive(A, seq)),
        ("wavefront", lambda A, seq: apply_wavefront(A, seq)),
        ("fused", lambda A, seq: apply_fused(A, seq, 2, 2)),
        (
            "blocked",
            lambda A, seq: apply_blocked(
                A, seq, BlockPlan(n_b=8, k_b=4, m_b=16), use_kernel=False
            ),
        ),
        (
            "kernel",
            lambda A, seq: apply_blocked(
                A, seq, BlockPlan(n_b=8, k_b=4, m_b=16), KernelShape(8, 2)
            ),
        ),
    ],
)
def test_instrumented_output_matches_uninstrumented(variant, runner):
    A0, seq = make_case(21, 18, 4, seed=2)
    out, _ = instrumented_apply(
        variant, A0, seq,
        plan=BlockPlan(n_b=8, k_b=4, m_b=16), shape=KernelShape(8, 2),
    )
    direct = A0.copy(order="F")
    runner(direct, seq)
    assert_bitwise(direct, out, variant)


def test_instrumented_naive_traffic():
    A0, seq = make_case(7, 9, 3)
    _, cnt = instrumented_apply("naive", A0, seq)
    rots = 8 * 3
    assert cnt.a_loads == 2 * 7 * rots
    assert cnt.a_stores == 2 * 7 * rots
    assert cnt.coef_loads == 2 * rots


def test_instrumented_kernel_call_traffic():
    A0, seq = make_case(16, 14, 2, seed=4)
    _, cnt = instrumented_apply(
        "kernel", A0, seq, plan=BlockPlan(n_b=6, k_b=2, m_b=16), shape=KernelShape(16, 2)
    )
    for nw, kr_l in cnt.kernel_calls:
        assert nw <= 6 and kr_l <= 2
    # per-call panel traffic is m_r*(nw + kr_l) each way; the startup and
    # shutdown triangles are counted per transform
    expected = sum(16 * (nw + kr_l) for nw, kr_l in cnt.kernel_calls)
    edge_rots = cnt.rotations - sum(nw * kr_l for nw, kr_l in cnt.kernel_calls)
    assert cnt.a_loads == expected + 2 * 16 * edge_rots
    assert cnt.a_stores == expected + 2 * 16 * edge_rots


def test_instrumented_blocked_events_respect_dependencies():
    A0, seq = make_case(40, 20, 6, seed=5)
    _, cnt = instrumented_apply("blocked", A0, seq, plan=BlockPlan(n_b=4, k_b=3, m_b=16))
    events = cnt.block_events
    order = {ev: i for i, ev in enumerate(events)}
    for rb, p0, t0 in events:
        nxt = (rb, p0, t0 + 4)
        if nxt in order:
            assert order[nxt] > order[(rb, p0, t0)]
        nxt_chunk = (rb, p0 + 3, 0)
        if nxt_chunk in order:
            assert order[nxt_chunk] > order[(rb, p0, t0)]


def test_instrumented_size_limit():
    A0, seq = make_case(2, 3, 1)
    big = np.zeros((2048, 1024), order="F")
    with pytest.raises(ValueError, match="limited"):
        instrumented_apply("naive", big, seq)


def test_instrumented_unknown_variant():
    A0, seq = make_case(4, 4, 1)
    with pytest.raises(ValueError, match="unknown"):
        instrumented_apply("sideways", A0, seq)
