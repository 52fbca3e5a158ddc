"""Per-subcarrier Gram matrices: brute force and interpolation.

Only the upper triangle of each Gram matrix is ever computed; the lower
triangle is mirrored.  Every kernel accepts an optional ``counter`` (any
object with an ``add(n)`` method, see :class:`gramterp.opcount.OpCounter`)
which is charged the real-valued multiplications the kernel executes:
4 per complex product, 2 per squared magnitude, 2 per real-by-complex
product.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .channel import FdChannel

__all__ = [
    "GramMethod",
    "GramSet",
    "BasePointPlan",
    "InterpOperator",
    "IllConditionedWarning",
    "IllConditionedError",
    "plan_from_base_points",
    "plan_uniform_base_points",
    "gram_brute_force",
    "build_dft_submatrix",
    "exact_interp_operator",
    "gram_exact_interp",
    "gram_interp_0th",
    "gram_interp_1st",
    "compute_grams",
    "interpolate_from_reference",
]


class GramMethod(str, enum.Enum):
    BRUTE_FORCE = "bf"
    EXACT = "exact"
    ORDER0 = "order0"
    ORDER1 = "order1"


class IllConditionedWarning(RuntimeWarning):
    pass


class IllConditionedError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GramSet:
    subcarriers: np.ndarray
    grams: np.ndarray
    method: GramMethod

    def at(self, subcarrier: int) -> np.ndarray:
        k = int(np.searchsorted(self.subcarriers, subcarrier))
        if k >= len(self.subcarriers) or self.subcarriers[k] != subcarrier:
            raise KeyError(subcarrier)
        return self.grams[k]


@dataclass(frozen=True)
class BasePointPlan:
    """Base points and per-subcarrier interpolation geometry.

    All per-subcarrier arrays are aligned with ``active``.  ``nearest``,
    ``left`` and ``right`` hold subcarrier indices (not positions).
    ``bracketed`` is False for base points themselves and for targets
    outside ``[p_0, p_last]``; for those ``left == right == nearest`` and
    ``weight == 1``.
    """

    active: np.ndarray
    base_points: np.ndarray
    is_base: np.ndarray
    nearest: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    bracketed: np.ndarray

    @property
    def targets(self) -> np.ndarray:
        return self.active[~self.is_base]

    @property
    def num_base(self) -> int:
        return len(self.base_points)

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.base_points)

    @property
    def d_max(self) -> int:
        """Largest distance from an active subcarrier to its nearest base point.

        Half the largest base-point spacing (floored), extended by any active
        tones lying beyond the outermost base points.
        """
        inner = int((self.spacings // 2).max()) if self.num_base > 1 else 0
        edge = max(int(self.base_points[0] - self.active[0]),
                   int(self.active[-1] - self.base_points[-1]))
        return max(inner, edge)

    @property
    def num_edge_targets(self) -> int:
        return int(np.count_nonzero(~self.is_base & ~self.bracketed))


def plan_from_base_points(active, base_points) -> BasePointPlan:
    active = np.asarray(tuple(active), dtype=np.int64)
    base = np.asarray(tuple(base_points), dtype=np.int64)
    if base.size < 1:
        raise ValueError("at least one base point is required")
    if np.any(np.diff(base) <= 0):
        raise ValueError("base points must be strictly increasing")
    if not np.all(np.isin(base, active)):
        raise ValueError("base points must be active subcarriers")

    is_base = np.isin(active, base)
    # k such that base[k-1] < w <= base[k]
    k = np.searchsorted(base, active, side="left")
    lo = base[np.clip(k - 1, 0, base.size - 1)]
    hi = base[np.clip(k, 0, base.size - 1)]
    # lower index wins ties
    nearest = np.where(np.abs(active - lo) <= np.abs(hi - active), lo, hi)
    nearest = np.where(is_base, active, nearest)

    bracketed = (~is_base) & (active > base[0]) & (active < base[-1])
    left = np.where(bracketed, lo, nearest)
    right = np.where(bracketed, hi, nearest)
    span = np.where(bracketed, right - left, 1)
    weight = np.where(bracketed, (right - active) / span, 1.0)

    arrays = (active, base, is_base, nearest, left, right, weight, bracketed)
    for a in arrays:
        a.setflags(write=False)
    return BasePointPlan(*arrays)


def plan_uniform_base_points(active, count: int) -> BasePointPlan:
    """Pick ``count`` base points at evenly spaced positions within ``active``.

    With ``count >= 2`` the first and last active subcarriers are always
    base points; a single base point sits at the middle position.
    """
    active = tuple(active)
    n = len(active)
    if not 1 <= count <= n:
        raise ValueError(f"count must lie in [1, {n}], got {count}")
    if count == 1:
        pos = np.array([(n - 1) // 2])
    else:
        # floor(x + 0.5) keeps positions strictly increasing for step >= 1
        pos = np.floor(np.linspace(0, n - 1, count) + 0.5).astype(np.int64)
    return plan_from_base_points(active, np.asarray(active)[pos])


def _upper_pairs(U: int):
    return np.triu_indices(U)


def _check_aligned(fd: FdChannel, plan: BasePointPlan):
    if not np.array_equal(fd.subcarriers, plan.active):
        raise ValueError("channel subcarriers and plan active set differ")


def _fill_hermitian(upper: np.ndarray, U: int) -> np.ndarray:
    """Expand ``(..., U(U+1)/2)`` upper-triangle entries into full matrices."""
    rows, cols = _upper_pairs(U)
    out = np.zeros(upper.shape[:-1] + (U, U), dtype=complex)
    out[..., rows, cols] = upper
    out[..., cols, rows] = upper.conj()
    d = np.arange(U)
    out[..., d, d] = out[..., d, d].real
    return out


def _brute_force_upper(H: np.ndarray, counter=None) -> np.ndarray:
    """Upper-triangle Gram entries for a stack ``H`` of shape (..., K, B, U).

    Entries are returned in row-major ``triu_indices`` order.
    """
    U = H.shape[-1]
    # number of (realization, subcarrier, antenna) triples
    n_rows = int(np.prod(H.shape[:-1]))
    Hh = np.swapaxes(H, -1, -2).conj()
    # diagonal: squared magnitudes, 2 real multiplies each
    diag = (np.einsum("...bu,...bu->...u", H.real, H.real)
            + np.einsum("...bu,...bu->...u", H.imag, H.imag))
    parts = []
    for i in range(U):
        parts.append(diag[..., i:i + 1])
        if i + 1 < U:
            # row i right of the diagonal: one batched vector-matrix product
            parts.append((Hh[..., i:i + 1, :] @ H[..., i + 1:])[..., 0, :])
    if counter is not None:
        counter.add(2 * n_rows * U + 4 * n_rows * (U * (U - 1) // 2))
    return np.concatenate(parts, axis=-1).astype(complex, copy=False)


def gram_brute_force(fd: FdChannel, counter=None) -> GramSet:
    """``G_w = H_w^H H_w`` on every stored subcarrier."""
    U = fd.matrices.shape[-1]
    grams = _fill_hermitian(_brute_force_upper(fd.matrices, counter), U)
    return GramSet(fd.subcarriers, grams, GramMethod.BRUTE_FORCE)


def build_dft_submatrix(row_indices, delay_spread: int, fft_size: int) -> np.ndarray:
    """Rows of the unitary W-point DFT, restricted to its first L and last L-1 columns."""
    L, W = int(delay_spread), int(fft_size)
    if L < 1:
        raise ValueError("delay_spread must be positive")
    if 2 * L - 1 > W:
        raise ValueError(f"2L-1 = {2 * L - 1} columns exceed the DFT size {W}")
    rows = np.asarray(tuple(row_indices), dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= W):
        raise ValueError(f"row indices must lie in [0, {W})")
    cols = np.concatenate([np.arange(L), np.arange(W - L + 1, W)]).astype(np.int64)
    phase = (rows[:, None] * cols[None, :]) % W
    return np.exp(-2j * np.pi * phase / W) / np.sqrt(W)


@dataclass(frozen=True)
class InterpOperator:
    """``F_targets @ pinv(F_base)`` together with conditioning diagnostics."""

    matrix: np.ndarray
    singular_values: np.ndarray
    rank: int
    rcond: float

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    @property
    def truncated(self) -> bool:
        return self.rank < self.singular_values.size


@lru_cache(maxsize=32)
def _cached_operator(base: tuple, targets: tuple, L: int, W: int, rcond: float):
    Fp = build_dft_submatrix(base, L, W)
    Ft = build_dft_submatrix(targets, L, W)
    u, s, vh = np.linalg.svd(Fp, full_matrices=False)
    keep = s > rcond * s[0]
    pinv = (vh[keep].conj().T / s[keep]) @ u[:, keep].conj().T
    T = Ft @ pinv
    T.setflags(write=False)
    s.setflags(write=False)
    return InterpOperator(T, s, int(keep.sum()), rcond)


def exact_interp_operator(plan: BasePointPlan, delay_spread: int, fft_size: int,
                          rcond: float = 1e-10, strict: bool = False) -> InterpOperator:
    """Interpolation operator mapping base-point entries to target entries.

    The pseudo-inverse is formed from an SVD; singular values below
    ``rcond`` times the largest are discarded.  When that happens an
    :class:`IllConditionedWarning` reporting the condition number is
    issued, or :class:`IllConditionedError` raised if ``strict``.
    Operators are cached per ``(P, targets, L, W, rcond)``.
    """
    op = _cached_operator(tuple(int(p) for p in plan.base_points),
                          tuple(int(t) for t in plan.targets),
                          int(delay_spread), int(fft_size), float(rcond))
    if plan.num_base < 2 * delay_spread - 1:
        warnings.warn(
            f"{plan.num_base} base points cannot determine a degree-{2 * delay_spread - 1} "
            "trigonometric polynomial; exact interpolation is underdetermined",
            IllConditionedWarning, stacklevel=2)
    if op.truncated:
        msg = (f"base-point DFT matrix is numerically rank deficient "
               f"(rank {op.rank} of {op.singular_values.size}, "
               f"condition number {op.condition_number:.3e}, rcond {rcond:g})")
        if strict:
            raise IllConditionedError(msg)
        warnings.warn(msg, IllConditionedWarning, stacklevel=2)
    return op


def _exact_upper(base_upper, plan, delay_spread, fft_size, counter=None,
                 rcond: float = 1e-10, strict: bool = False):
    shape = base_upper.shape[:-2] + (plan.active.size, base_upper.shape[-1])
    upper = np.empty(shape, dtype=complex)
    upper[..., plan.is_base, :] = base_upper
    if plan.targets.size:
        op = exact_interp_operator(plan, delay_spread, fft_size, rcond=rcond, strict=strict)
        upper[..., ~plan.is_base, :] = op.matrix @ base_upper
        if counter is not None:
            counter.add(4 * op.matrix.shape[0] * base_upper.size)
    return upper


def _order0_upper(base_upper, plan):
    return base_upper[..., np.searchsorted(plan.base_points, plan.nearest), :]


def _order1_upper(base_upper, plan, counter=None):
    upper = _order0_upper(base_upper, plan)
    br = plan.bracketed
    if br.any():
        lam = plan.weight[br][:, None]
        g_left = base_upper[..., np.searchsorted(plan.base_points, plan.left[br]), :]
        g_right = base_upper[..., np.searchsorted(plan.base_points, plan.right[br]), :]
        upper[..., br, :] = lam * g_left + (1.0 - lam) * g_right
        if counter is not None:
            # two real-by-complex products per entry
            counter.add(4 * g_left.size)
    return upper


def _base_upper(fd: FdChannel, plan: BasePointPlan, counter):
    _check_aligned(fd, plan)
    return _brute_force_upper(fd.matrices[..., plan.is_base, :, :], counter)


def gram_exact_interp(fd: FdChannel, plan: BasePointPlan, delay_spread: int,
                      fft_size: int, counter=None, rcond: float = 1e-10,
                      strict: bool = False) -> GramSet:
    """Exact DFT-domain interpolation from base-point Gram matrices."""
    U = fd.matrices.shape[-1]
    upper = _exact_upper(_base_upper(fd, plan, counter), plan, delay_spread, fft_size,
                         counter, rcond, strict)
    return GramSet(fd.subcarriers, _fill_hermitian(upper, U), GramMethod.EXACT)


def gram_interp_0th(fd: FdChannel, plan: BasePointPlan, counter=None) -> GramSet:
    """Nearest-base-point copy; ties go to the lower subcarrier index."""
    U = fd.matrices.shape[-1]
    upper = _order0_upper(_base_upper(fd, plan, counter), plan)
    return GramSet(fd.subcarriers, _fill_hermitian(upper, U), GramMethod.ORDER0)


def gram_interp_1st(fd: FdChannel, plan: BasePointPlan, counter=None) -> GramSet:
    """Entrywise linear interpolation between the bracketing base points.

    Targets outside the outermost base points copy the nearest one.
    """
    U = fd.matrices.shape[-1]
    upper = _order1_upper(_base_upper(fd, plan, counter), plan, counter)
    return GramSet(fd.subcarriers, _fill_hermitian(upper, U), GramMethod.ORDER1)


def interpolate_from_reference(method, reference: GramSet, plan: Optional[BasePointPlan] = None,
                               delay_spread: Optional[int] = None,
                               fft_size: Optional[int] = None) -> GramSet:
    """Apply ``method`` reusing base-point Grams taken from a brute-force set.

    Equivalent to :func:`compute_grams` on the channel that produced
    ``reference`` but skips recomputing the base-point Gram matrices, which
    lets several methods share one brute-force pass.
    """
    method = GramMethod(method)
    if reference.method is not GramMethod.BRUTE_FORCE:
        raise ValueError("reference must be a brute-force GramSet")
    if method is GramMethod.BRUTE_FORCE:
        return reference
    if plan is None:
        raise ValueError(f"{method.value} requires a base-point plan")
    if not np.array_equal(reference.subcarriers, plan.active):
        raise ValueError("reference subcarriers and plan active set differ")
    U = reference.grams.shape[-1]
    rows, cols = _upper_pairs(U)
    base_upper = reference.grams[..., plan.is_base, :, :][..., rows, cols]
    if method is GramMethod.EXACT:
        if delay_spread is None or fft_size is None:
            raise ValueError("exact interpolation needs delay_spread and fft_size")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            upper = _exact_upper(base_upper, plan, delay_spread, fft_size)
    elif method is GramMethod.ORDER0:
        upper = _order0_upper(base_upper, plan)
    else:
        upper = _order1_upper(base_upper, plan)
    return GramSet(reference.subcarriers, _fill_hermitian(upper, U), method)


def compute_grams(method, fd: FdChannel, plan: Optional[BasePointPlan] = None,
                  delay_spread: Optional[int] = None, fft_size: Optional[int] = None,
                  counter=None) -> GramSet:
    """Dispatch on :class:`GramMethod`."""
    method = GramMethod(method)
    if method is GramMethod.BRUTE_FORCE:
        return gram_brute_force(fd, counter)
    if plan is None:
        raise ValueError(f"{method.value} requires a base-point plan")
    if method is GramMethod.EXACT:
        if delay_spread is None or fft_size is None:
            raise ValueError("exact interpolation needs delay_spread and fft_size")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            return gram_exact_interp(fd, plan, delay_spread, fft_size, counter)
    if method is GramMethod.ORDER0:
        return gram_interp_0th(fd, plan, counter)
    return gram_interp_1st(fd, plan, counter)
