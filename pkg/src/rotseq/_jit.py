"""Shared numba compilation settings.

Every hot loop in this package is compiled twice from the same Python
source: a strict build (plain IEEE double arithmetic, no contraction,
so every variant is bit-reproducible) and a fast build that permits
fused-multiply-add contraction. ``dual()`` returns the pair; callers
pick one with a ``fast`` flag.
"""

from __future__ import annotations

import numba as nb

STRICT_OPTS = dict(nogil=True, cache=True)
FAST_OPTS = dict(nogil=True, cache=True, fastmath={"contract"})


def njit_strict(func):
    return nb.njit(**STRICT_OPTS)(func)


def njit_fast(func):
    return nb.njit(**FAST_OPTS)(func)


class DualFn:
    """A strict/fast pair of jitted functions sharing one source."""

    __slots__ = ("strict", "fast", "py_func")

    def __init__(self, py_func):
        self.py_func = py_func
        self.strict = njit_strict(py_func)
        self.fast = njit_fast(py_func)

    def __call__(self, *args, fast: bool = False):
        return (self.fast if fast else self.strict)(*args)

    def pick(self, fast: bool):
        return self.fast if fast else self.strict


def dual(func) -> DualFn:
    return DualFn(func)
