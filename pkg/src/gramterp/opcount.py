"""Real-multiplication counts for Gram-matrix computation.

Convention: a complex-by-complex product costs 4 real multiplications, a
squared magnitude 2, a real-by-complex product 2.  Additions are free and
the exact-interpolation operator is treated as precomputed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .channel import FdChannel
from .grammat import BasePointPlan, GramMethod, compute_grams

__all__ = [
    "OpCounter",
    "ComplexityReport",
    "cost_bf",
    "cost_exact",
    "cost_0th",
    "cost_1st",
    "cost_1st_corrected",
    "cost_gram",
    "exact_break_even",
    "cost_matched_filter",
    "cost_inversion",
    "cost_detection",
    "instrumented_count",
    "complexity_report",
]


class OpCounter:
    """Accumulates real multiplications reported by the Gram kernels."""

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)

    def merge(self, other: "OpCounter") -> "OpCounter":
        out = OpCounter()
        out.count = self.count + other.count
        return out


def cost_bf(num_active: int, B: int, U: int) -> int:
    return 2 * num_active * B * U * U


def cost_exact(num_active: int, num_base: int, B: int, U: int) -> int:
    P, N = num_base, num_active
    if P > N:
        raise ValueError("more base points than active subcarriers")
    return 2 * P * (N - P + B) * U * U + 2 * P * (N - P) * U


def cost_0th(num_base: int, B: int, U: int) -> int:
    return 2 * num_base * B * U * U


def cost_1st(num_active: int, num_base: int, B: int, U: int) -> int:
    P, N = num_base, num_active
    if P > N:
        raise ValueError("more base points than active subcarriers")
    return 2 * P * B * U * U + 2 * (N - P) * U * (U + 1)


def cost_1st_corrected(num_active: int, num_base: int, B: int, U: int,
                       num_edge_targets: int) -> int:
    """:func:`cost_1st` minus the interpolation work skipped for edge targets.

    Targets outside the outermost base points are copied, not interpolated.
    """
    return cost_1st(num_active, num_base, B, U) - 2 * num_edge_targets * U * (U + 1)


def cost_gram(method, num_active: int, num_base: int, B: int, U: int) -> int:
    method = GramMethod(method)
    if method is GramMethod.BRUTE_FORCE:
        return cost_bf(num_active, B, U)
    if method is GramMethod.EXACT:
        return cost_exact(num_active, num_base, B, U)
    if method is GramMethod.ORDER0:
        return cost_0th(num_base, B, U)
    return cost_1st(num_active, num_base, B, U)


def exact_break_even(B: int, U: int) -> int:
    """Smallest base-point count at which exact interpolation is no cheaper than BF.

    Exact interpolation is cheaper exactly when ``P < B U / (1 + U)``.
    """
    return -(-B * U // (1 + U))


# The two costs below complete a linear MMSE detector; they are this
# package's own accounting, used only for the Gram share of total detection.
def cost_matched_filter(num_active: int, B: int, U: int) -> int:
    """``H^H y``: B U complex products per subcarrier."""
    return 4 * num_active * B * U


def cost_inversion(num_active: int, U: int) -> int:
    """Regularized U x U solve, charged U^3 complex products per subcarrier."""
    return 4 * num_active * U ** 3


def cost_detection(method, num_active: int, num_base: int, B: int, U: int) -> int:
    return (cost_gram(method, num_active, num_base, B, U)
            + cost_matched_filter(num_active, B, U)
            + cost_inversion(num_active, U))


def instrumented_count(method, fd: FdChannel, plan: Optional[BasePointPlan] = None,
                       delay_spread: Optional[int] = None,
                       fft_size: Optional[int] = None) -> int:
    """Run the Gram kernel for ``method`` and return the multiplications it tallied.

    Operator precomputation (pseudo-inverse, interpolation weights) is
    excluded; the interpolation operator is built once before counting.
    """
    method = GramMethod(method)
    if method is GramMethod.EXACT and plan is not None and plan.targets.size:
        # warm the operator cache outside the counted region
        compute_grams(method, fd, plan, delay_spread, fft_size)
    counter = OpCounter()
    compute_grams(method, fd, plan, delay_spread, fft_size, counter=counter)
    return counter.count


@dataclass(frozen=True)
class ComplexityReport:
    method: GramMethod
    analytical: int
    measured: Optional[int]
    ratio_vs_bf: float
    corrected: Optional[int] = None

    @property
    def matches(self) -> bool:
        """Measured count equals the formula (edge-corrected for 1st order)."""
        if self.measured is None:
            return True
        expected = self.corrected if self.corrected is not None else self.analytical
        return self.measured == expected


def complexity_report(method, fd: FdChannel, plan: Optional[BasePointPlan],
                      delay_spread: Optional[int] = None,
                      fft_size: Optional[int] = None, measure: bool = True) -> ComplexityReport:
    method = GramMethod(method)
    N, B, U = fd.matrices.shape[-3:]
    P = N if plan is None else plan.num_base
    analytical = cost_gram(method, N, P, B, U)
    corrected = None
    if method is GramMethod.ORDER1 and plan is not None:
        corrected = cost_1st_corrected(N, P, B, U, plan.num_edge_targets)
    measured = instrumented_count(method, fd, plan, delay_spread, fft_size) if measure else None
    return ComplexityReport(method, analytical, measured, analytical / cost_bf(N, B, U), corrected)
