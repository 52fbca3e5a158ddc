"""Experiment drivers behind the command-line subcommands.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`ResultTable` plus the plot definitions describing it.  Results are
pure functions of the configuration: every random draw comes from
``numpy.random.SeedSequence(seed, spawn_key=(experiment id, ...))``.
"""
from __future__ import annotations

import math
import warnings
from typing import List, Sequence, Tuple

import numpy as np

from . import __version__
from .channel import (SystemConfig, gen_td_channel, sigma_from_snr, td_to_fd)
from .config import ExperimentConfig, base_count_at_fraction, serialize_config
from .detect import GramSpec, simulate_uplink_ber
from .grammat import (GramMethod, IllConditionedWarning, gram_brute_force,
                      gram_exact_interp, plan_from_base_points, plan_uniform_base_points)
from .opcount import (complexity_report, cost_1st_corrected, cost_bf, cost_detection,
                      cost_gram)
from .results import PlotSpec, ResultTable
from .theory import (MseParams, dominance_condition, fejer, mse_0th, mse_0th_max_bound,
                     mse_1st, oracle_sweep)

__all__ = [
    "EXPERIMENT_IDS",
    "SEEDING",
    "SNR_CONVENTION",
    "required_snr",
    "base_count_at_fraction",
    "run_mse_experiment",
    "run_ber_experiment",
    "run_complexity_report",
    "run_tradeoff_experiment",
    "run_validate",
    "run_experiment",
]

EXPERIMENT_IDS = {"mse": 1, "ber": 2, "complexity": 3, "tradeoff": 4, "validate": 5}

SEEDING = ("numpy SeedSequence(entropy=seed, spawn_key=(experiment id, variant, trial)) "
           "feeding PCG64; experiment ids mse=1 ber=2 complexity=3 tradeoff=4 validate=5")

SNR_CONVENTION = ("SNR = Es/N0 with unit expected column energy E||h_u||^2 = 1 "
                  "(per-entry channel power 1/B); pilots are a U x U DFT block with "
                  "per-symbol energy Es at the data N0")

DETECTION_COST = ("detection total = Gram cost + matched filter 4|Omega|BU "
                  "+ regularized inversion 4|Omega|U^3 real multiplications")


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    meta = {
        "experiment": cfg.kind,
        "artifact_version": __version__,
        "config_sha256": cfg.digest(),
        "seed": str(cfg.seed),
        "scale": cfg.scale,
        "seeding": SEEDING,
    }
    meta.update({k: str(v) for k, v in extra.items()})
    meta["config"] = serialize_config(cfg)
    return meta


def _stream(cfg: ExperimentConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(EXPERIMENT_IDS[cfg.kind],) + key)


def required_snr(snr_db: Sequence[float], ber: Sequence[float], target: float,
                 bits: int = 0) -> float:
    """Smallest SNR at which the BER curve reaches ``target``.

    Linear interpolation of ``log10(BER)`` between the two grid points
    around the first crossing.  A zero BER at the crossing point is replaced
    by half an error (``0.5 / bits``) to keep the logarithm finite.
    Returns NaN when the curve never reaches ``target``.
    """
    snr = np.asarray(snr_db, dtype=float)
    b = np.asarray(ber, dtype=float)
    hit = np.nonzero(b <= target)[0]
    if hit.size == 0:
        return float("nan")
    i = int(hit[0])
    if i == 0:
        return float(snr[0])
    floor = 0.5 / bits if bits else 1e-300
    y0, y1 = math.log10(max(b[i - 1], floor)), math.log10(max(b[i], floor))
    yt = math.log10(target)
    if y1 == y0:
        return float(snr[i])
    return float(snr[i - 1] + (yt - y0) * (snr[i] - snr[i - 1]) / (y1 - y0))


# --- MSE --------------------------------------------------------------------

def run_mse_experiment(cfg: ExperimentConfig, threads: int = 1) -> Tuple[ResultTable, List[PlotSpec]]:
    """Closed-form vs. simulated MSE over the (B, L) grid, ideal and non-ideal."""
    p = cfg.params
    sc = cfg.scenario
    W, U = sc.fft_size, sc.num_users
    pl, pr, target = p["base_left"], p["base_right"], p["target"]
    entry = (p["entry_row"], p["entry_col"])
    cols = ["scenario", "B", "L", "W", "p_left", "p_right", "target", "delta", "sigma",
            "theory_order0", "theory_order1", "empirical_order0", "empirical_order1",
            "stderr_order0", "stderr_order1", "rel_gap_order0", "rel_gap_order1", "trials"]
    table = ResultTable(cols, metadata=_metadata(
        cfg, entry=f"({entry[0]}, {entry[1]})",
        nonideal=f"delta={p['nonideal_correlation']}, sigma from SNR={p['nonideal_snr_db']} dB "
                 f"via SNR = U/(B sigma^2) with U={U}"))
    for iB, B in enumerate(p["bs_antennas"]):
        sigma_ni = sigma_from_snr(10 ** (p["nonideal_snr_db"] / 10), B, U)
        scen = [("ideal", 0.0, 0.0), ("nonideal", p["nonideal_correlation"], sigma_ni)]
        for iL, L in enumerate(p["delay_spreads"]):
            res = oracle_sweep(B, L, W, [(d, s) for _, d, s in scen], (pl, pr), target,
                               orders=(0, 1), trials=p["trials"], seed=_stream(cfg, iB, iL),
                               entry=entry, threads=threads)
            for (name, delta, sigma), (r0, r1) in zip(scen, res):
                mp = MseParams(B, L, W, delta, sigma)
                t0 = float(mse_0th(mp, pl, target))
                t1 = float(mse_1st(mp, pl, pr, target))
                table.add(scenario=name, B=B, L=L, W=W, p_left=pl, p_right=pr, target=target,
                          delta=float(delta), sigma=float(sigma),
                          theory_order0=t0, theory_order1=t1,
                          empirical_order0=r0.mse, empirical_order1=r1.mse,
                          stderr_order0=r0.stderr, stderr_order1=r1.stderr,
                          rel_gap_order0=r0.rel_gap(t0), rel_gap_order1=r1.rel_gap(t1),
                          trials=p["trials"])
    plots = [PlotSpec(f"Interpolation MSE at subcarrier {target} ({s})", "B",
                      ["theory_order0", "theory_order1", "empirical_order0", "empirical_order1"],
                      "BS antennas B", "MSE", "log", "log", series_by=["L"],
                      filters={"scenario": s}) for s in ("ideal", "nonideal")]
    return table, plots


# --- BER --------------------------------------------------------------------

def _ber_specs(system: SystemConfig, methods, counts) -> List[GramSpec]:
    specs = []
    if "bf" in methods:
        specs.append(GramSpec(GramMethod.BRUTE_FORCE))
    for P in counts:
        plan = plan_uniform_base_points(system.active_set, P)
        for m in methods:
            if m != "bf":
                specs.append(GramSpec(GramMethod(m), plan))
    return specs


def _spec_count(spec: GramSpec, n: int) -> int:
    return n if spec.plan is None else spec.plan.num_base


def run_ber_experiment(cfg: ExperimentConfig, threads: int = 1) -> Tuple[ResultTable, List[PlotSpec]]:
    """Uncoded BER vs. SNR for each Gram method and base-point count."""
    p = cfg.params
    system = cfg.scenario.system()
    specs = _ber_specs(system, p["methods"], p["base_counts"])
    cols = ["csi", "method", "num_base", "snr_db", "errors", "bits", "ber", "stderr"]
    table = ResultTable(cols, metadata=_metadata(cfg, snr_convention=SNR_CONVENTION))
    for ic, csi in enumerate(p["csi"]):
        res = simulate_uplink_ber(system, specs, p["snr_db"], p["trials"], seed=cfg.seed,
                                  csi=csi, threads=threads,
                                  stream_key=(EXPERIMENT_IDS["ber"], ic))
        for spec in specs:
            for pt in res.curves[spec.name]:
                table.add(csi=csi, method=spec.method.value,
                          num_base=_spec_count(spec, system.num_active), snr_db=pt.snr_db,
                          errors=pt.errors, bits=pt.bits, ber=pt.ber, stderr=pt.stderr)
    plots = [PlotSpec(f"Uncoded BER, {csi} CSI", "snr_db", ["ber"], "SNR [dB]", "BER",
                      "linear", "log", series_by=["method", "num_base"], filters={"csi": csi})
             for csi in p["csi"]]
    return table, plots


def ber_curve(table: ResultTable, csi: str, method: str, num_base: int):
    """(snr, ber, bits) arrays of one curve from a BER table."""
    rows = table.where(csi=csi, method=method, num_base=num_base)
    return (np.array([r["snr_db"] for r in rows]), np.array([r["ber"] for r in rows]),
            rows[0]["bits"] if rows else 0)


# --- complexity ---------------------------------------------------------------

def run_complexity_report(cfg: ExperimentConfig, threads: int = 1) -> Tuple[ResultTable, List[PlotSpec]]:
    """Analytical and instrumented multiplication counts per method and ``|P|``."""
    p = cfg.params
    system = cfg.scenario.system()
    N, B, U, L, W = system.num_active, system.B, system.U, system.L, system.W
    fd = None
    if p["measure"]:
        rng = np.random.default_rng(_stream(cfg, 0))
        fd = td_to_fd(gen_td_channel(system, rng), system)
    bf = cost_bf(N, B, U)
    bf_total = cost_detection("bf", N, N, B, U)
    cols = ["base_fraction", "num_base", "method", "analytical", "measured", "corrected",
            "matches", "ratio_vs_bf", "detection_total", "gram_share_pct",
            "detection_ratio_vs_bf"]
    table = ResultTable(cols, metadata=_metadata(cfg, detection_cost=DETECTION_COST,
                                                 c_bf=bf))
    for frac in p["base_fractions"]:
        P = max(1, min(N, int(round(frac * N))))
        plan = plan_uniform_base_points(system.active_set, P)
        for m in p["methods"]:
            method = GramMethod(m)
            use_plan = None if method is GramMethod.BRUTE_FORCE else plan
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IllConditionedWarning)
                if fd is not None:
                    rep = complexity_report(method, fd, use_plan, L, W)
                else:
                    analytical = cost_gram(method, N, P, B, U)
                    rep = None
            analytical = rep.analytical if rep else analytical
            measured = rep.measured if rep else None
            corrected = rep.corrected if rep else (
                cost_1st_corrected(N, P, B, U, plan.num_edge_targets)
                if method is GramMethod.ORDER1 else None)
            total = cost_detection(method, N, P, B, U)
            table.add(base_fraction=float(frac), num_base=P, method=method.value,
                      analytical=analytical, measured=measured, corrected=corrected,
                      matches=rep.matches if rep else None,
                      ratio_vs_bf=analytical / bf, detection_total=total,
                      gram_share_pct=100.0 * analytical / total,
                      detection_ratio_vs_bf=total / bf_total)
    plots = [PlotSpec("Detection complexity by Gram method", "base_fraction",
                      ["analytical", "detection_total"], "|P| / |Omega|",
                      "real multiplications", kind="bar", series_by=["method"])]
    return table, plots


# --- trade-off -----------------------------------------------------------------

def run_tradeoff_experiment(cfg: ExperimentConfig, threads: int = 1) -> Tuple[ResultTable, List[PlotSpec]]:
    """Required SNR for the target BER vs. Gram complexity, sweeping ``|P|``.

    Brute force is simulated alongside on the same draws as the reference.
    """
    p = cfg.params
    system = cfg.scenario.system()
    N, B, U = system.num_active, system.B, system.U
    specs = _ber_specs(system, ["bf"] + list(p["methods"]), p["base_counts"])
    res = simulate_uplink_ber(system, specs, p["snr_db"], p["trials"], seed=cfg.seed,
                              csi=p["csi"], threads=threads,
                              stream_key=(EXPERIMENT_IDS["tradeoff"], 0))
    target = p["target_ber"]
    bf_spec = specs[0]
    bf_pts = res.curves[bf_spec.name]
    bf_req = required_snr(p["snr_db"], [q.ber for q in bf_pts], target, bf_pts[0].bits)
    cols = ["method", "num_base", "complexity_fraction", "required_snr_db", "reachable",
            "bf_required_snr_db", "gap_db", "ber_at_max_snr"]
    table = ResultTable(cols, metadata=_metadata(
        cfg, snr_convention=SNR_CONVENTION, target_ber=target,
        base_point_range="|P| from L to D with D taken as |Omega|",
        required_snr="first crossing of the target, linear in log10(BER) between grid points"))
    for spec in specs:
        pts = res.curves[spec.name]
        P = _spec_count(spec, N)
        req = required_snr(p["snr_db"], [q.ber for q in pts], target, pts[0].bits)
        table.add(method=spec.method.value, num_base=P,
                  complexity_fraction=cost_gram(spec.method, N, P, B, U) / cost_bf(N, B, U),
                  required_snr_db=req, reachable=not math.isnan(req),
                  bf_required_snr_db=bf_req, gap_db=req - bf_req, ber_at_max_snr=pts[-1].ber)
    plots = [PlotSpec("SNR for target BER vs. Gram complexity", "complexity_fraction",
                      ["required_snr_db"], "fraction of brute-force complexity",
                      "required SNR [dB]", series_by=["method"])]
    return table, plots


def front_dominates(table: ResultTable, better="order1", worse="order0",
                    tolerance_db: float = 0.0) -> Tuple[bool, float]:
    """Does ``better`` need no more SNR than ``worse`` at matched complexity?

    ``worse``'s required-SNR curve is linearly interpolated at each of
    ``better``'s complexity fractions inside its range.  Returns the verdict
    and the largest excess of ``better`` over ``worse`` in dB.
    """
    def curve(m):
        rows = sorted(table.where(method=m), key=lambda r: r["complexity_fraction"])
        return (np.array([r["complexity_fraction"] for r in rows]),
                np.array([r["required_snr_db"] for r in rows]))
    xb, yb = curve(better)
    xw, yw = curve(worse)
    worst = -np.inf
    for x, y in zip(xb, yb):
        if x < xw[0] or x > xw[-1]:
            continue
        ref = float(np.interp(x, xw, yw))
        if math.isnan(ref):
            continue  # the worse scheme never reaches the target here
        if math.isnan(y):
            return False, float("inf")
        worst = max(worst, y - ref)
    return bool(worst <= tolerance_db), float(worst)


# --- validate ------------------------------------------------------------------

def _check_exactness(system: SystemConfig, rng, tol):
    P = 2 * system.L - 1
    fd = td_to_fd(gen_td_channel(system, rng), system)
    plan = plan_uniform_base_points(system.active_set, P)
    ref = gram_brute_force(fd).grams
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        ex = gram_exact_interp(fd, plan, system.L, system.W).grams
    err = np.linalg.norm(ex - ref, axis=(-2, -1)) / np.linalg.norm(ref, axis=(-2, -1))
    return float(err.max()), tol, f"|P|={P}, max relative Frobenius error"


def _check_fejer():
    worst = -np.inf
    phi = np.linspace(0, 2 * np.pi, 10_000)
    ok = True
    for L in (2, 16, 144):
        f = fejer(L, phi)
        ok &= bool(np.all((f >= 0) & (f <= 1)))
        g = fejer(L, np.linspace(0, 2 * np.pi / L, 10_000))
        d = np.diff(g)
        worst = max(worst, float(d.max()))
        ok &= bool(np.all(d < 0))
    return ok, worst


def _check_bound(system, counts, delta, sigma):
    worst = -np.inf
    for P in counts:
        plan = plan_uniform_base_points(range(system.W), P)
        for d, s in ((0.0, 0.0), (delta, sigma)):
            mp = MseParams(system.B, system.L, system.W, d, s)
            t = ~plan.is_base
            mx = float(np.max(mse_0th(mp, plan.nearest[t], plan.active[t])))
            worst = max(worst, mx - mse_0th_max_bound(mp, plan.d_max))
    return worst


_EQ_TOL = 1e-14


def _check_dominance(W, L, B, delta, sigma):
    """Violations of mse_1st <= mse_0th over every admissible spacing and target."""
    violations, equalities = 0, 0
    dmax = W // (3 * L)
    for d in range(1, dmax + 1):
        assert dominance_condition(d, W, L)
        for mp in (MseParams(B, L, W, 0.0, 0.0), MseParams(B, L, W, delta, sigma)):
            for w in range(1, d):
                plan = plan_from_base_points(range(d + 1), (0, d))
                m0 = float(mse_0th(mp, plan.nearest[w], w))
                m1 = float(mse_1st(mp, 0, d, w))
                # absolute slack for rounding when both sides vanish
                violations += m1 > m0 + _EQ_TOL
                equalities += abs(m1 - m0) <= _EQ_TOL
    return violations, equalities


def _check_complexity(rng, tuples=20):
    mismatches = 0
    for _ in range(tuples):
        B = int(rng.integers(2, 17))
        U = int(rng.integers(1, B + 1))
        W = 128
        L = int(rng.integers(1, 5))
        N = int(rng.integers(2 * L, 100))
        P = int(rng.integers(max(1, 2 * L - 1), N + 1))
        start = int(rng.integers(0, W - N + 1))
        system = SystemConfig(B, U, W, L, range(start, start + N))
        fd = td_to_fd(gen_td_channel(system, rng), system)
        plan = plan_uniform_base_points(system.active_set, P)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            for m in GramMethod:
                rep = complexity_report(m, fd, None if m is GramMethod.BRUTE_FORCE else plan, L, W)
                mismatches += not rep.matches
    return mismatches


def run_validate(cfg: ExperimentConfig, threads: int = 1) -> Tuple[ResultTable, List[PlotSpec]]:
    """Run the invariant suite at the configured scenario; one row per property."""
    p = cfg.params
    sc = cfg.scenario
    system = sc.system()
    B, U, L, W = system.B, system.U, system.L, system.W
    cols = ["property", "passed", "deviation", "threshold", "detail"]
    table = ResultTable(cols, metadata=_metadata(cfg))

    def row(name, passed, deviation, threshold, detail=""):
        table.add(property=name, passed=bool(passed), deviation=float(deviation),
                  threshold=float(threshold), detail=detail)

    rng = np.random.default_rng(_stream(cfg, 0))
    dev, tol, detail = _check_exactness(system, rng, p["exact_tolerance"])
    row("exact_interpolation_matches_brute_force", dev <= tol, dev, tol, detail)

    ok, worst = _check_fejer()
    row("fejer_range_and_monotone", ok, worst, 0.0, "largest successive difference on [0, 2pi/L]")

    # oracle agreement on a small geometry inside the active band
    start = system.active_set[0]
    pl, pr, tgt = start, start + max(2, W // 20), start + max(1, W // 100)
    sigma = sigma_from_snr(10 ** 2.5, B, U)
    scen = [(0.0, 0.0), (0.1, sigma)]
    res = oracle_sweep(B, L, W, scen, (pl, pr), tgt, trials=p["oracle_trials"],
                       seed=_stream(cfg, 1), threads=threads)
    worst_z = 0.0
    for (delta, s), (r0, r1) in zip(scen, res):
        mp = MseParams(B, L, W, delta, s)
        for r, t in ((r0, mse_0th(mp, pl, tgt)), (r1, mse_1st(mp, pl, pr, tgt))):
            worst_z = max(worst_z, abs(r.mse - float(t)) / r.stderr)
    row("oracle_matches_closed_form", worst_z <= p["oracle_sigmas"], worst_z, p["oracle_sigmas"],
        f"p=({pl},{pr}), target {tgt}; deviation in standard errors")

    worst = _check_bound(system, [c for c in p["bound_base_counts"] if c <= W], 0.1, sigma)
    row("max_mse_within_bound", worst <= 1e-15, worst, 1e-15, "max mse_0th minus bound")

    viol, _ = _check_dominance(W, L, B, 0.1, sigma)
    row("first_order_dominates_when_spacing_small", viol == 0, viol, 0,
        f"d_k <= {W // (3 * L)}, all interior targets")
    viol1, eq1 = _check_dominance(W, 1, B, 0.0, 0.0)
    row("equal_orders_at_unit_delay_spread", viol1 == 0 and eq1 > 0, viol1, 0, "L=1, sigma=0")

    mism = _check_complexity(np.random.default_rng(_stream(cfg, 2)))
    row("counters_match_formulas", mism == 0, mism, 0, "20 random (|Omega|, |P|, B, U) tuples")

    small = SystemConfig(min(B, 16), min(U, 4), W, L, system.active_set[:64])
    plan = plan_uniform_base_points(small.active_set, min(small.num_active, 2 * L - 1))
    specs = [GramSpec(GramMethod.BRUTE_FORCE), GramSpec(GramMethod.ORDER1, plan)]
    a = simulate_uplink_ber(small, specs, [10.0], 4, seed=cfg.seed, csi="estimated",
                            stream_key=(EXPERIMENT_IDS["validate"], 3))
    b = simulate_uplink_ber(small, specs, [10.0], 4, seed=cfg.seed, csi="estimated",
                            threads=2, stream_key=(EXPERIMENT_IDS["validate"], 3))
    same = all(np.array_equal(a.ber(k), b.ber(k)) for k in a.curves)
    row("thread_count_invariance", same, 0.0 if same else 1.0, 0.0, "BER with 1 vs 2 threads")
    return table, []


_RUNNERS = {
    "mse": run_mse_experiment,
    "ber": run_ber_experiment,
    "complexity": run_complexity_report,
    "tradeoff": run_tradeoff_experiment,
    "validate": run_validate,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    return _RUNNERS[cfg.kind](cfg, threads=threads)
