"""Monte Carlo ground truth for the SPEB and GDOP distributions.

Draws are processed in fixed chunks of :data:`CHUNK_SIZE`, each with its own
derived random stream, and reduced in chunk order. Results are therefore
identical for any number of worker threads.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .annulus import CHUNK_SIZE, AnchorSet, AnnulusModel, RngStream, sample_anchor_sets, sample_ranges
from .outage import CcdfCurve, gdop_bound_ccdfs, gdop_ccdf, moment_match, speb_ccdf_approx
from .speb import decompose, gdop, speb_support_min, speb_via_fim

FIM_CHECK_STRIDE = 10_000
FIM_CHECK_RTOL = 1e-10
PILOT_DRAWS = 10_000
PILOT_STREAM = 1
GRID_POINTS = 400


class ConsistencyError(RuntimeError):
    """The product-form SPEB disagreed with the Fisher-information trace."""


@dataclass(frozen=True)
class SimulationReport:
    model: AnnulusModel
    sample_count: int
    seed: int
    empirical_curve: CcdfCurve
    yn_mean: float
    yn_variance: float
    infeasibility_lhs: float
    runtime_ms: int
    degenerate_rate: float = 0.0


@dataclass(frozen=True)
class KsReport:
    """KS distance of every method's curve against the Monte Carlo reference."""

    model: AnnulusModel
    distances: dict = field(default_factory=dict)

    def __getitem__(self, label: str) -> float:
        return self.distances[label]


@dataclass(frozen=True)
class _ChunkStats:
    count: int
    exceed: np.ndarray
    degenerate: int
    mean: float = 0.0
    m2: float = 0.0


def _merge(a: _ChunkStats, b: _ChunkStats) -> _ChunkStats:
    # Chan et al. pairwise update for the running mean and sum of squares.
    n = a.count + b.count
    delta = b.mean - a.mean
    return _ChunkStats(
        count=n,
        exceed=a.exceed + b.exceed,
        degenerate=a.degenerate + b.degenerate,
        mean=a.mean + delta * b.count / n,
        m2=a.m2 + b.m2 + delta * delta * a.count * b.count / n,
    )


def _chunk_sizes(samples: int) -> list[int]:
    full, rest = divmod(int(samples), CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def _exceedances(values: np.ndarray, u: np.ndarray) -> np.ndarray:
    srt = np.sort(values)
    return (srt.size - np.searchsorted(srt, u, side="right")).astype(np.int64)


def _run_chunks(worker, samples: int, threads: int) -> _ChunkStats:
    sizes = _chunk_sizes(samples)
    jobs = list(enumerate(sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: worker(*job), jobs))
    else:
        parts = [worker(*job) for job in jobs]
    total = parts[0]
    for part in parts[1:]:
        total = _merge(total, part)
    return total


def _check_fim(model: AnnulusModel, anchors: AnchorSet, dec, start: int) -> None:
    idx = np.arange((-start) % FIM_CHECK_STRIDE, anchors.ranges.shape[0], FIM_CHECK_STRIDE)
    # Skip nearly collinear draws, where either form loses digits to cancellation.
    idx = idx[dec.y_n[idx] > 1e-4]
    if idx.size == 0:
        return
    ref = speb_via_fim(model, AnchorSet(anchors.ranges[idx], anchors.angles[idx]))
    rel = np.abs(dec.speb[idx] - ref) / ref
    if np.any(rel > FIM_CHECK_RTOL):
        raise ConsistencyError(f"product-form SPEB off by {rel.max():.3g} relative to the FIM trace")


def pilot_u_grid(model: AnnulusModel, seed: int, points: int = GRID_POINTS,
                 pilot: int = PILOT_DRAWS) -> np.ndarray:
    """Log-spaced SPEB thresholds from half the support minimum to a pilot-run 99.9th percentile."""
    anchors = sample_anchor_sets(model, RngStream(seed, PILOT_STREAM), pilot)
    speb = np.sort(decompose(model, anchors).speb)
    finite = speb[np.isfinite(speb)]
    lo = 0.5 * speb_support_min(model)
    q = speb[min(int(np.ceil(0.999 * speb.size)) - 1, speb.size - 1)]
    hi = q if np.isfinite(q) else finite[-1]
    return np.geomspace(lo, max(hi, 4 * lo), points)


def empirical_speb_ccdf(model: AnnulusModel, samples: int, seed: int, u_grid=None,
                        threads: int = 1) -> SimulationReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t0 = time.perf_counter()
    u = pilot_u_grid(model, seed) if u_grid is None else np.asarray(u_grid, dtype=float)
    root = RngStream(seed)

    def worker(k: int, size: int) -> _ChunkStats:
        anchors = sample_anchor_sets(model, root.child(k), size)
        dec = decompose(model, anchors)
        _check_fim(model, anchors, dec, k * CHUNK_SIZE)
        y = dec.y_n
        mean = float(y.mean())
        return _ChunkStats(count=size, exceed=_exceedances(dec.speb, u),
                           degenerate=int(np.count_nonzero(np.isinf(dec.speb))),
                           mean=mean, m2=float(((y - mean) ** 2).sum()))

    stats = _run_chunks(worker, samples, threads)
    var = stats.m2 / stats.count
    n = model.n_anchors
    lhs = stats.mean ** 2 / var - (n * n - n) if var > 0 else np.inf
    curve = CcdfCurve(u, stats.exceed / stats.count, "mc")
    return SimulationReport(model=model, sample_count=int(samples), seed=int(seed),
                            empirical_curve=curve, yn_mean=stats.mean, yn_variance=var,
                            infeasibility_lhs=float(lhs),
                            runtime_ms=int(round(1000 * (time.perf_counter() - t0))),
                            degenerate_rate=stats.degenerate / stats.count)


def empirical_gdop_ccdf(model: AnnulusModel, samples: int, seed: int, u_grid,
                        threads: int = 1) -> CcdfCurve:
    """Empirical ccdf of the equal-range metric: one shared range and N bearings per draw."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    u = np.asarray(u_grid, dtype=float)
    root = RngStream(seed)

    def worker(k: int, size: int) -> _ChunkStats:
        gen = root.child(k).generator()
        radius = sample_ranges(model, gen.random(size))
        angles = gen.random((size, model.n_anchors)) * (2 * np.pi)
        vals = gdop(model, radius, angles)
        return _ChunkStats(count=size, exceed=_exceedances(vals, u),
                           degenerate=int(np.count_nonzero(np.isinf(vals))))

    stats = _run_chunks(worker, samples, threads)
    return CcdfCurve(u, stats.exceed / stats.count, "mc")


def ks_statistic(a: CcdfCurve, b: CcdfCurve) -> float:
    """Largest absolute gap between two ccdfs over their merged abscissae."""
    lo = max(a.abscissae[0], b.abscissae[0])
    hi = min(a.abscissae[-1], b.abscissae[-1])
    if lo > hi:
        raise ValueError("curve supports do not overlap")
    x = np.union1d(a.abscissae, b.abscissae)
    x = x[(x >= lo) & (x <= hi)]
    return float(np.max(np.abs(a(x) - b(x))))


def method_curves(model: AnnulusModel, u_grid) -> dict[str, CcdfCurve]:
    """All semi-analytic curves on a shared grid."""
    lower, upper = gdop_bound_ccdfs(model, u_grid)
    return {"approx": speb_ccdf_approx(model, u_grid), "gdop": gdop_ccdf(model, u_grid),
            "gdop_lower": lower, "gdop_upper": upper}


def ks_report(model: AnnulusModel, samples: int, seed: int, threads: int = 1) -> KsReport:
    sim = empirical_speb_ccdf(model, samples, seed, threads=threads)
    mc = sim.empirical_curve
    distances = {"mc": ks_statistic(mc, mc)}
    for label, curve in method_curves(model, mc.abscissae).items():
        distances[label] = ks_statistic(curve, mc)
    return KsReport(model, distances)


def validation_suite(n_range, dmax_sweep, samples: int, seed: int, d_min: float = 1.0,
                     t_s: float = 1.0, threads: int = 1) -> list[KsReport]:
    """KS reports for every ``(N, d_max)`` pair; configuration ``i`` uses stream ``seed + i``."""
    n_range = [int(n) for n in n_range]
    if any(n < 3 or n > 16 for n in n_range):
        raise ValueError("N must lie in [3, 16]")
    if any(not d > d_min for d in dmax_sweep):
        raise ValueError("every d_max must exceed d_min")
    reports = []
    for i, (n, d_max) in enumerate((n, d) for n in n_range for d in dmax_sweep):
        model = AnnulusModel(d_min, float(d_max), n, t_s)
        reports.append(ks_report(model, samples, seed + i, threads))
    return reports


def property_failures(reports: list[KsReport]) -> list[str]:
    """Violations of the expected ordering between methods, as readable messages.

    Checks that the approximation beats every equal-range curve in each
    configuration, and that at fixed ``N`` its error does not shrink as the
    annulus widens.
    """
    failures = []
    others = ("gdop", "gdop_lower", "gdop_upper")
    for rep in reports:
        best_other = min(rep[k] for k in others)
        if not rep["approx"] < best_other:
            failures.append(f"N={rep.model.n_anchors} d_max={rep.model.d_max:g}: approx KS "
                            f"{rep['approx']:.4f} not below equal-range KS {best_other:.4f}")
    by_n: dict[int, list[KsReport]] = {}
    for rep in reports:
        by_n.setdefault(rep.model.n_anchors, []).append(rep)
    for n, group in by_n.items():
        group = sorted(group, key=lambda r: r.model.d_max)
        for prev, cur in zip(group, group[1:]):
            if cur["approx"] < prev["approx"]:
                failures.append(f"N={n}: approx KS falls from {prev['approx']:.4f} at "
                                f"d_max={prev.model.d_max:g} to {cur['approx']:.4f} at "
                                f"d_max={cur.model.d_max:g}")
    return failures


def yn_moments_table(n_values, d_min: float, d_max: float, samples: int, seed: int,
                     t_s: float = 1.0, threads: int = 1) -> list[dict]:
    """Analytic and empirical second-order statistics of ``Y_N`` per ``N``."""
    rows = []
    for n in n_values:
        model = AnnulusModel(d_min, d_max, int(n), t_s)
        mm = moment_match(model)
        sim = empirical_speb_ccdf(model, samples, seed, u_grid=[speb_support_min(model)],
                                  threads=threads)
        rows.append({"n": int(n), "mean_yn_analytic": mm.mean_yn, "mean_yn_empirical": sim.yn_mean,
                     "var_yn_empirical": sim.yn_variance, "infeasibility_lhs": sim.infeasibility_lhs,
                     "m_opt": mm.m_opt, "v_opt": mm.v_opt})
    return rows
