import numpy as np
import pytest

from rotseq.core import RotationSequence, generate_sequence


def make_matrix(m: int, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return np.asfortranarray(rng.standard_normal((m, n)))


def make_case(m: int, n: int, k: int, seed: int = 0):
    return make_matrix(m, n, seed), generate_sequence(n, k, seed + 1)


def assert_bitwise(expected: np.ndarray, got: np.ndarray, msg: str = ""):
    if not np.array_equal(expected.view(np.uint64), got.view(np.uint64)):
        diff = np.abs(expected - got)
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        pytest.fail(
            f"not bit-identical {msg}: max |diff| {diff.max():.3e} at {idx} "
            f"({expected[idx]!r} vs {got[idx]!r})"
        )


def assert_naive_equivalent_order(order, n: int, k: int):
    """An order is exchangeable with the plain loop iff, per matrix
    column, the transforms touching it appear in their plain-order
    positions; and the multiset matches exactly."""
    last = {}
    count = 0
    for q, p in order:
        assert 0 <= q <= n - 2 and 0 <= p <= k - 1, f"(q={q}, p={p}) out of range"
        key = p * (n - 1) + q
        for col in (q, q + 1):
            prev = last.get(col, -1)
            assert prev < key, (
                f"column {col}: transform (q={q}, p={p}) arrives after a "
                f"later plain-order transform (key {prev} >= {key})"
            )
            last[col] = key
        count += 1
    assert count == (n - 1) * k, f"applied {count} transforms, want {(n - 1) * k}"


def non_orthonormal_sequence(n: int, k: int, seed: int = 0) -> RotationSequence:
    rng = np.random.Generator(np.random.Philox(seed))
    C = rng.uniform(-1.2, 1.2, size=(n - 1, k))
    S = rng.uniform(-1.2, 1.2, size=(n - 1, k))
    return RotationSequence.from_arrays(C, S, check_orthonormal=False)
