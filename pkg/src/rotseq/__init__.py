"""rotseq: apply sequences of plane rotations (and 2x2 reflectors) to a
dense matrix with progressively optimized algorithms, model their
memory traffic, and benchmark the lot."""

from .blocking import (
    BlockPlan,
    CacheSpec,
    PackedPanels,
    PlanningError,
    apply_blocked,
    apply_blocked_packed,
    choose_block_sizes,
    pack_row_block,
    partition_rows,
    raw_kb_bound,
    raw_mb_bound,
    raw_nb_bound,
    unpack_row_block,
)
from .core import (
    RotationSequence,
    TransformKind,
    apply_block,
    apply_fused,
    apply_naive,
    apply_reflector_pair,
    apply_wavefront,
    generate_sequence,
    rot,
)
from .kernels import KernelShape, PanelView, kernel_edge_apply, kernel_wave_apply
from .model import (
    IoReport,
    MemOpReport,
    flops_applied,
    instrumented_apply,
    instrumented_pipeline_block,
    io_models,
    memops_basic,
    memops_fused,
    memops_kernel,
)
from .oracle import ComparisonReport, accumulate_q, compare, reference_multiply

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
