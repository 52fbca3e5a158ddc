"""Linear MMSE detection, ZF precoding, pilot-based channel estimation and BER.

Arrays follow the frequency-domain layout used elsewhere in the package:
channels are ``(..., K, B, U)``, Gram matrices ``(..., K, U, U)`` and
per-subcarrier vectors ``(..., K, B)`` or ``(..., K, U)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .channel import FdChannel, SystemConfig, apply_bs_correlation, crandn, gen_td_channel, td_to_fd
from .grammat import BasePointPlan, GramMethod, gram_brute_force, interpolate_from_reference

__all__ = [
    "QamConstellation",
    "QAM16",
    "qam_map",
    "qam_demap",
    "SingularGramError",
    "mmse_equalize",
    "zf_precode",
    "dft_pilots",
    "ml_channel_estimate",
    "BerPoint",
    "BerResult",
    "GramSpec",
    "noise_variance_from_snr_db",
    "simulate_uplink_ber",
]


class SingularGramError(np.linalg.LinAlgError):
    pass


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class QamConstellation:
    """Square Gray-labelled QAM.

    Each symbol carries ``k = log2(order)`` bits; the first ``k/2`` select
    the in-phase level and the rest the quadrature level, each through a
    binary-reflected Gray code, so horizontally or vertically adjacent
    points differ in exactly one bit.
    """

    order: int = 16
    energy: float = 1.0
    points: np.ndarray = field(init=False, repr=False)
    levels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        side = int(round(np.sqrt(self.order)))
        if side * side != self.order or side < 2 or side & (side - 1):
            raise ValueError("order must be a square power of two (4, 16, 64, ...)")
        # PAM amplitudes -(side-1), ..., side-1, scaled to the requested energy
        amp = np.arange(-(side - 1), side, 2, dtype=float)
        scale = np.sqrt(self.energy / (2 * np.mean(amp ** 2)))
        levels = amp * scale
        # level index carrying Gray label g
        idx_of_label = np.empty(side, dtype=int)
        for i in range(side):
            idx_of_label[_gray(i)] = i
        labels = np.arange(self.order)
        hb = self.bits_per_symbol // 2
        i_lab, q_lab = labels >> hb, labels & (side - 1)
        pts = levels[idx_of_label[i_lab]] + 1j * levels[idx_of_label[q_lab]]
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "levels", levels)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def min_distance(self) -> float:
        return float(self.levels[1] - self.levels[0])

    def label_bits(self) -> np.ndarray:
        """``(order, k)`` bit matrix, most significant bit first."""
        k = self.bits_per_symbol
        return (np.arange(self.order)[:, None] >> np.arange(k - 1, -1, -1)) & 1


QAM16 = QamConstellation(16)


def qam_map(bits, constellation: QamConstellation = QAM16) -> np.ndarray:
    """Map a bit array whose last axis is a multiple of ``k`` to symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    k = constellation.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(f"bit length must be divisible by {k}")
    groups = bits.reshape(bits.shape[:-1] + (-1, k))
    labels = groups @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[labels]


def _slice_axis(x: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Index of the nearest PAM level for each real value."""
    step = levels[1] - levels[0]
    idx = np.floor((x - levels[0]) / step + 0.5).astype(np.int64)
    return np.clip(idx, 0, levels.size - 1)


def qam_demap(estimates, constellation: QamConstellation = QAM16) -> np.ndarray:
    """Minimum-distance hard decisions, returned as bits (last axis ``k`` per symbol)."""
    est = np.asarray(estimates)
    side = constellation.levels.size
    hb = constellation.bits_per_symbol // 2
    gi = _slice_axis(est.real, constellation.levels)
    gq = _slice_axis(est.imag, constellation.levels)
    gray = np.array([_gray(i) for i in range(side)])
    labels = (gray[gi] << hb) | gray[gq]
    bits = constellation.label_bits()[labels]
    return bits.reshape(est.shape[:-1] + (-1,))


def _hermitian_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve stacked Hermitian systems, Cholesky first, LU when not definite."""
    try:
        C = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        # interpolated Gram matrices (exact scheme with noisy CSI) may be indefinite
        return np.linalg.solve(A, b[..., None])[..., 0]
    z = np.linalg.solve(C, b[..., None])
    return np.linalg.solve(np.swapaxes(C, -1, -2).conj(), z)[..., 0]


def mmse_equalize(G, H, y, noise_variance: float, symbol_energy: float = 1.0) -> np.ndarray:
    """``(G + N0/Es I)^{-1} H^H y`` for stacked subcarriers.

    ``G`` may be any (e.g. interpolated) Gram estimate; ``H`` provides the
    matched filter.
    """
    G, H, y = np.asarray(G), np.asarray(H), np.asarray(y)
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    mf = (np.swapaxes(H, -1, -2).conj() @ y[..., None])[..., 0]
    return _regularized_solve(G, mf, noise_variance, symbol_energy)


def _regularized_solve(G, mf, noise_variance, symbol_energy):
    U = G.shape[-1]
    A = G + (noise_variance / symbol_energy) * np.eye(U)
    if noise_variance == 0:
        rank = np.linalg.matrix_rank(A, hermitian=True)
        if np.any(rank < U):
            raise SingularGramError("Gram matrix is rank deficient and N0 = 0")
    return _hermitian_solve(A, mf)


def zf_precode(G, H, s, normalize: bool = False) -> np.ndarray:
    """Zero-forcing precoder reusing the uplink Gram matrix.

    Returns ``x = conj(H) conj(G)^{-1} s`` so that the downlink channel
    ``H^T`` delivers ``H^T x = s``.  With ``normalize`` each ``x`` is scaled
    to unit norm.
    """
    G, H, s = np.asarray(G), np.asarray(H), np.asarray(s)
    if np.any(np.linalg.matrix_rank(G, hermitian=True) < G.shape[-1]):
        raise SingularGramError("Gram matrix is singular; ZF precoding undefined")
    # conj(G)^{-1} s == conj(G^{-1} conj(s))
    v = np.linalg.solve(G, s.conj()[..., None])[..., 0]
    x = np.einsum("...bu,...u->...b", H, v).conj()
    if normalize:
        x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return x


def dft_pilots(num_users: int, symbol_energy: float = 1.0) -> np.ndarray:
    """``U x U`` orthogonal training block; every entry has energy ``Es``.

    Row ``u`` is user ``u``'s pilot sequence over ``U`` symbol slots, so
    ``P P^H = U Es I``.
    """
    U = num_users
    n = np.arange(U)
    return np.sqrt(symbol_energy) * np.exp(-2j * np.pi * np.outer(n, n) / U)


def ml_channel_estimate(observations, pilots, subcarriers=None) -> FdChannel:
    """ML (least-squares) estimate ``Y P^H (P P^H)^{-1}`` per subcarrier.

    ``observations`` has shape ``(..., K, B, U)`` holding ``Y = H P + N``.
    The pilot block must be square with ``P P^H`` a positive multiple of
    the identity; the estimation error per entry then has variance
    ``N0 / c`` where ``P P^H = c I``.
    """
    P = np.asarray(pilots)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("pilot matrix must be square")
    PPh = P @ P.conj().T
    c = PPh[0, 0].real
    if c <= 0 or not np.allclose(PPh, c * np.eye(P.shape[0]), atol=1e-10 * c):
        raise ValueError("pilot matrix rows must be orthogonal with equal energy")
    Y = np.asarray(observations)
    est = (Y @ P.conj().T) / c
    sc = np.arange(est.shape[-3]) if subcarriers is None else subcarriers
    return FdChannel(sc, est)


def noise_variance_from_snr_db(snr_db, symbol_energy: float = 1.0):
    """N0 for ``SNR = Es E[||h_u||^2] / N0`` with ``E[||h_u||^2] = 1``.

    Every user's channel column has unit expected energy (per-entry power
    ``1/B``), so this is the per-user SNR after coherent combining.
    """
    return symbol_energy * 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class GramSpec:
    """A Gram computation method plus its base-point plan (None for BF)."""

    method: GramMethod
    plan: Optional[BasePointPlan] = None
    label: str = ""

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.plan is None:
            return self.method.value
        return f"{self.method.value}@{self.plan.num_base}"


@dataclass
class BerPoint:
    snr_db: float
    errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def stderr(self) -> float:
        p = self.ber
        return float(np.sqrt(p * (1 - p) / self.bits)) if self.bits else float("nan")


@dataclass
class BerResult:
    """BER curves keyed by :attr:`GramSpec.name`."""

    curves: Dict[str, List[BerPoint]]

    def ber(self, name: str) -> np.ndarray:
        return np.array([p.ber for p in self.curves[name]])

    def snr_db(self, name: str) -> np.ndarray:
        return np.array([p.snr_db for p in self.curves[name]])

    def merge(self, other: "BerResult") -> "BerResult":
        out = {}
        for name, pts in self.curves.items():
            out[name] = [BerPoint(a.snr_db, a.errors + b.errors, a.bits + b.bits)
                         for a, b in zip(pts, other.curves[name])]
        return BerResult(out)


def _trial(cfg: SystemConfig, specs: Sequence[GramSpec], snr_db, csi: str,
           rng: np.random.Generator, constellation: QamConstellation):
    """One channel realization evaluated at every SNR and Gram spec.

    Returns an ``(len(specs), len(snr_db))`` array of bit-error counts and
    the number of bits per (spec, SNR) cell.
    """
    Es = cfg.symbol_energy
    K, B, U = cfg.num_active, cfg.B, cfg.U
    k = constellation.bits_per_symbol
    td = gen_td_channel(cfg, rng)
    if cfg.correlation != 0:
        td = apply_bs_correlation(td, cfg.correlation)
    H = td_to_fd(td, cfg).matrices
    pilots = dft_pilots(U, Es)
    errors = np.zeros((len(specs), len(snr_db)), dtype=np.int64)

    def all_grams(fd):
        # one brute-force pass feeds every method's base points
        ref = gram_brute_force(fd)
        return [interpolate_from_reference(sp.method, ref, sp.plan, cfg.L, cfg.W).grams
                for sp in specs]

    if csi == "perfect":
        H_est = FdChannel(cfg.active_set, H)
        grams = all_grams(H_est)
    for j, snr in enumerate(snr_db):
        N0 = float(noise_variance_from_snr_db(snr, Es))
        if csi != "perfect":
            Y = H @ pilots + np.sqrt(N0) * crandn(rng, (K, B, U))
            H_est = ml_channel_estimate(Y, pilots, cfg.active_set)
            grams = all_grams(H_est)
        bits = rng.integers(0, 2, size=(K, U * k))
        s = qam_map(bits, constellation)
        y = np.einsum("kbu,ku->kb", H, s) + np.sqrt(N0) * crandn(rng, (K, B))
        # matched filter is shared by all methods
        mf = (np.swapaxes(H_est.matrices, -1, -2).conj() @ y[..., None])[..., 0]
        for i, G in enumerate(grams):
            s_hat = _regularized_solve(G, mf, N0, Es)
            errors[i, j] = np.count_nonzero(qam_demap(s_hat, constellation) != bits)
    return errors, K * U * k


def simulate_uplink_ber(cfg: SystemConfig, specs: Sequence[GramSpec], snr_db: Sequence[float],
                        trials: int, seed: int = 0, csi: str = "perfect",
                        constellation: QamConstellation = QAM16, threads: int = 1,
                        stream_key: Sequence[int] = ()) -> BerResult:
    """Monte-Carlo uncoded BER of MMSE detection with the given Gram methods.

    All Gram specs and SNR points of a trial share the same channel, pilot
    noise, bits and receive noise.  ``csi`` is ``"perfect"`` or
    ``"estimated"`` (ML estimation from one orthogonal pilot block per
    subcarrier at the data SNR).  Trial ``t`` draws from
    ``SeedSequence(seed, spawn_key=(*stream_key, t))`` so results are
    identical for any ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if csi not in ("perfect", "estimated"):
        raise ValueError("csi must be 'perfect' or 'estimated'")
    snr_db = [float(s) for s in snr_db]

    def run(t):
        ss = np.random.SeedSequence(seed, spawn_key=tuple(stream_key) + (t,))
        return _trial(cfg, specs, snr_db, csi, np.random.default_rng(ss), constellation)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(t) for t in range(trials)]
    total = sum(r[0] for r in results)
    nbits = sum(r[1] for r in results)
    curves = {spec.name: [BerPoint(snr, int(total[i, j]), nbits) for j, snr in enumerate(snr_db)]
              for i, spec in enumerate(specs)}
    return BerResult(curves)
