"""Sampling-quality metrics, method comparison, and the training-cost proxy.

Coverage is judged against density-normalized histograms anchored to the
full data's min-max range, so bin occupancy is comparable across
methods.  The KL direction is D(full || sample): a sample is penalized
for missing regions where the full data has mass.  All divergences are
reported in nats.  Costs are wall-clock seconds plus a proxy term; no
hardware energy counters are involved, and reports label units as
"proxy units".
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import entropy
from .grid import GridDataset, RunConfig
from .samplers import SampleSet, run_pipeline


@dataclass(frozen=True)
class PdfHistogram:
    """Density-normalized histogram: integral over all bins is 1."""

    edges: np.ndarray  # B + 1 ascending bin edges
    densities: np.ndarray  # B nonnegative densities
    count: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def probabilities(self) -> np.ndarray:
        """Per-bin probability mass (density times width)."""
        mass = self.densities * self.widths
        return mass

    @property
    def occupied_fraction(self) -> float:
        return float(np.count_nonzero(self.densities) / self.densities.size)


@dataclass
class CoverageReport:
    """Per-variable coverage metrics plus sampling timing."""

    per_variable: dict[str, dict[str, float]]
    timing: dict[str, float] = field(default_factory=dict)


def histogram_pdf(
    values: np.ndarray, bins: int = 100, value_range: tuple[float, float] | None = None
) -> PdfHistogram:
    """Density-normalized histogram over an explicit or observed range."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    values = np.asarray(values, dtype=np.float64).ravel()
    if value_range is not None:
        lo, hi = value_range
        if hi <= lo:
            raise ValueError(f"histogram range must have hi > lo, got ({lo}, {hi})")
    elif values.size:
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            hi = lo + 1.0  # constant data: one bin holds all mass
    else:
        lo, hi = 0.0, 1.0
    edges = np.linspace(lo, hi, bins + 1)
    if values.size == 0:
        return PdfHistogram(edges=edges, densities=np.zeros(bins), count=0)
    densities, _ = np.histogram(values, bins=edges, density=True)
    return PdfHistogram(edges=edges, densities=densities, count=values.size)


def coverage_report(
    sample: SampleSet, full_values: dict[str, np.ndarray], bins: int = 100
) -> CoverageReport:
    """Quantify how well a sample covers each variable's full distribution.

    For each variable: KL(full || sample) over shared bins, the fraction
    of bins the sample occupies, the ratio of spanned value ranges, and
    the fraction of full-data tail points (beyond the 1st/99th
    percentiles) whose bin the sample occupies.
    """
    if len(sample) == 0:
        raise ValueError("sample is empty")
    per_variable = {}
    for var, full in full_values.items():
        if var not in sample.columns:
            raise ValueError(f"variable {var!r} missing from sample")
        full = np.asarray(full, dtype=np.float64).ravel()
        sampled = sample.var_values(var)
        lo, hi = float(full.min()), float(full.max())
        if hi <= lo:
            hi = lo + 1.0
        h_full = histogram_pdf(full, bins, (lo, hi))
        h_sample = histogram_pdf(sampled, bins, (lo, hi))

        kl = entropy.kl_divergence(h_full.probabilities, h_sample.probabilities)
        occupied = h_sample.occupied_fraction
        full_span = hi - lo
        samp_span = float(sampled.max() - sampled.min())
        span_ratio = min(samp_span / full_span, 1.0)

        q01, q99 = np.percentile(full, [1.0, 99.0])
        tail_points = full[(full < q01) | (full > q99)]
        if tail_points.size:
            tail_bins = np.clip(
                np.searchsorted(h_full.edges, tail_points, side="right") - 1, 0, bins - 1
            )
            occupied_bins = h_sample.densities > 0.0
            tail_capture = float(np.mean(occupied_bins[tail_bins]))
        else:
            tail_capture = 1.0

        per_variable[var] = {
            "kl_full_to_sample": kl,
            "occupied_bin_fraction": occupied,
            "span_ratio": span_ratio,
            "tail_capture": tail_capture,
        }
    timing = {
        "sampling_seconds": float(
            sum(sample.provenance.get("phase_seconds", {}).values())
        ),
        "points_emitted": float(len(sample)),
    }
    return CoverageReport(per_variable=per_variable, timing=timing)


COMPARISON_COLUMNS = [
    "method", "seed", "variable", "kl_nats", "occupied_bin_fraction",
    "span_ratio", "tail_capture", "sampling_seconds", "points",
]


def compare_methods(
    config: RunConfig,
    dataset: GridDataset,
    methods: list[str],
    seeds: list[int],
    bins: int = 100,
) -> list[dict]:
    """Run every (method, seed) cell and tabulate coverage metrics.

    Returns one row per (method, seed, variable) plus per-method mean and
    standard-deviation summary rows (seed column "mean" / "std").
    """
    if not methods:
        raise ValueError("need at least one method")
    if not seeds:
        raise ValueError("need at least one seed")
    timesteps = (
        list(range(dataset.dims.nt))
        if config.timesteps == "all"
        else [int(t) for t in config.timesteps]
    )
    full_values = {
        var: dataset.fields[var][timesteps].ravel() for var in dataset.role_vars()
    }
    rows: list[dict] = []
    from dataclasses import replace

    for method in methods:
        cells: dict[str, list[dict]] = {}
        for seed in seeds:
            run_cfg = replace(config, method=method, seed=int(seed))
            t0 = time.perf_counter()
            sample = run_pipeline(run_cfg, dataset)
            elapsed = time.perf_counter() - t0
            report = coverage_report(sample, full_values, bins)
            for var, m in report.per_variable.items():
                row = {
                    "method": method,
                    "seed": seed,
                    "variable": var,
                    "kl_nats": m["kl_full_to_sample"],
                    "occupied_bin_fraction": m["occupied_bin_fraction"],
                    "span_ratio": m["span_ratio"],
                    "tail_capture": m["tail_capture"],
                    "sampling_seconds": elapsed,
                    "points": len(sample),
                }
                rows.append(row)
                cells.setdefault(var, []).append(row)
        for var, var_rows in cells.items():
            for stat, fn in (("mean", np.mean), ("std", np.std)):
                rows.append(
                    {
                        "method": method,
                        "seed": stat,
                        "variable": var,
                        "kl_nats": float(fn([r["kl_nats"] for r in var_rows])),
                        "occupied_bin_fraction": float(
                            fn([r["occupied_bin_fraction"] for r in var_rows])
                        ),
                        "span_ratio": float(fn([r["span_ratio"] for r in var_rows])),
                        "tail_capture": float(fn([r["tail_capture"] for r in var_rows])),
                        "sampling_seconds": float(
                            fn([r["sampling_seconds"] for r in var_rows])
                        ),
                        "points": float(fn([r["points"] for r in var_rows])),
                    }
                )
    return rows


def comparison_to_csv(rows: list[dict], path, include_timing: bool = True) -> None:
    """Write a comparison table; timing columns can be dropped for
    byte-stable output."""
    columns = list(COMPARISON_COLUMNS)
    if not include_timing:
        columns.remove("sampling_seconds")
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def histogram_comparison_csv(
    full_values: np.ndarray, sample_values: np.ndarray, path, bins: int = 100
) -> None:
    """Per-method histogram CSV: bin_lo, bin_hi, density_full, density_sample."""
    full = np.asarray(full_values, dtype=np.float64).ravel()
    lo, hi = float(full.min()), float(full.max())
    if hi <= lo:
        hi = lo + 1.0
    h_full = histogram_pdf(full, bins, (lo, hi))
    h_sample = histogram_pdf(sample_values, bins, (lo, hi))
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,density_full,density_sample\n")
        for b in range(bins):
            fh.write(
                f"{h_full.edges[b]:.17g},{h_full.edges[b + 1]:.17g},"
                f"{h_full.densities[b]:.17g},{h_sample.densities[b]:.17g}\n"
            )


def cost_estimate(
    m: float, p: float, e: float, c_m: float, kappa: float = 1e-9
) -> dict[str, float]:
    """Training-cost proxy: sampling cost plus kappa * m * p * e.

    ``m`` is the sample count, ``p`` the model parameter count, ``e`` the
    epoch count, and ``c_m`` the measured sampling seconds.  Units are
    arbitrary "proxy units", never joules.
    """
    for name, v in (("m", m), ("p", p), ("e", e), ("c_m", c_m)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative, got {v}")
    proxy = kappa * m * p * e
    return {
        "sampling_cost": float(c_m),
        "training_cost_proxy": float(proxy),
        "total": float(c_m + proxy),
    }
