"""Point- and hypercube-selection strategies and the two-phase pipeline.

Phase 1 picks hypercubes, either uniformly at random or by entropy
(cluster the pooled cluster-variable values globally, histogram each
cube over the shared labels, build the pairwise-KL graph, then draw
cubes without replacement weighted by node strength).  Phase 2 samples
points within each selected cube with one of: full, random, stratified,
lhs, uips, maxent.

Every per-cube random stream is seeded from (run seed, timestep, cube
index), so output is bit-identical regardless of worker count or cube
processing order.
"""
from __future__ import annotations

import hashlib
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import clustering, entropy
from .grid import GridDataset, HypercubeBlock, RunConfig, partition_hypercubes

_PHASE1_TAG = 0x51C1E


@dataclass(frozen=True)
class SampleRecord:
    """One curated point: grid location, normalized coordinates, values."""

    timestep: int
    i: int
    j: int
    k: int
    x: float
    y: float
    z: float
    t: float
    values: dict[str, float]


@dataclass
class SampleSet:
    """Curated output as a columnar table plus provenance.

    ``columns`` is ``["t", "i", "j", "k", "x", "y", "z", <vars...>]`` and
    ``data`` holds one row per record.  Timings and worker counts live in
    provenance but are excluded from content comparisons.
    """

    columns: list[str]
    data: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.data.shape[0]

    def var_values(self, var: str) -> np.ndarray:
        return self.data[:, self.columns.index(var)]

    def record(self, row: int) -> SampleRecord:
        r = self.data[row]
        d = self.provenance.get("grid_dims", {})
        nx = max(d.get("nx", 1) - 1, 1)
        ny = max(d.get("ny", 1) - 1, 1)
        nz = max(d.get("nz", 1) - 1, 1)
        nt = max(d.get("nt", 1) - 1, 1)
        return SampleRecord(
            timestep=int(r[0]), i=int(r[1]), j=int(r[2]), k=int(r[3]),
            x=int(r[1]) / nx, y=int(r[2]) / ny, z=int(r[3]) / nz, t=int(r[0]) / nt,
            values={v: float(r[self.columns.index(v)]) for v in self.columns[7:]},
        )

    def content_digest(self) -> str:
        """Digest of the payload and stable provenance; timings excluded."""
        h = hashlib.sha256()
        h.update(",".join(self.columns).encode())
        h.update(np.ascontiguousarray(self.data).tobytes())
        stable = {
            k: v
            for k, v in self.provenance.items()
            if k not in ("phase_seconds", "workers")
        }
        h.update(json.dumps(stable, sort_keys=True, default=str).encode())
        return h.hexdigest()

    def to_csv(self, path) -> None:
        """Write the payload with byte-stable formatting."""
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                ints = [f"{int(v)}" for v in row[:4]]
                floats = [f"{v:.17g}" for v in row[4:]]
                fh.write(",".join(ints + floats) + "\n")

    def to_binary(self, path) -> None:
        """Headerless little-endian 8-byte reals, one row per record."""
        np.ascontiguousarray(self.data, dtype="<f8").tofile(path)


def rate_to_count(rate: float, volume: int) -> int:
    """Samples-per-cube for a sampling rate, rounded half up
    (0.1 on a 32^3 cube gives 3277)."""
    return int(np.floor(rate * volume + 0.5))


def _rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def cube_rng(seed: int, timestep: int, cube_index: int) -> np.random.Generator:
    """Stable per-cube stream; independent of execution order and workers."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(timestep), int(cube_index)])
    )


# ---------------------------------------------------------------------------
# Phase 1: hypercube selection


def select_hypercubes_random(
    blocks: list[HypercubeBlock], m: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Uniform sample of m block indices without replacement."""
    if m > len(blocks):
        raise ValueError(f"cannot select {m} of {len(blocks)} blocks")
    rng = _rng(seed)
    return rng.choice(len(blocks), size=m, replace=False)


def select_hypercubes_maxent(
    blocks: list[HypercubeBlock],
    cluster_var: str,
    num_clusters: int,
    m: int,
    seed: int | np.random.Generator,
) -> np.ndarray:
    """Entropy-weighted selection of m block indices without replacement.

    Clustering is global: one k-means model on the cluster-variable
    values pooled across all blocks, so every per-cube distribution
    lives on the same label space.
    """
    if m > len(blocks):
        raise ValueError(f"cannot select {m} of {len(blocks)} blocks")
    rng = _rng(seed)
    pooled = np.concatenate([b.flat_values(cluster_var) for b in blocks])
    k = clustering.effective_k(pooled, num_clusters)
    model = clustering.kmeans_fit(
        pooled[:, None], k, seed=int(rng.integers(2**63)), feature_names=(cluster_var,)
    )
    dists = []
    for b in blocks:
        labels = clustering.assign(model, b.flat_values(cluster_var)[:, None])
        dists.append(clustering.cluster_distribution(labels, k))
    graph = entropy.adjacency_matrix(dists)
    return entropy.weighted_sample(graph.strengths, m, seed=rng, with_replacement=False)


# ---------------------------------------------------------------------------
# Phase 2: point sampling within a cube.  Each sampler returns x-fastest
# flat indices into the block; record assembly happens in the pipeline.


def sample_full(block: HypercubeBlock) -> np.ndarray:
    """Every grid point of the block in deterministic x-fastest order."""
    return np.arange(block.volume, dtype=np.int64)


def sample_random(
    block: HypercubeBlock, n: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Uniform sample without replacement over the block's grid points."""
    if n > block.volume:
        raise ValueError(f"cannot sample {n} of {block.volume} points")
    rng = _rng(seed)
    return rng.choice(block.volume, size=n, replace=False).astype(np.int64)


def sample_stratified(
    block: HypercubeBlock,
    n: int,
    strata: tuple[int, int, int],
    seed: int | np.random.Generator,
) -> np.ndarray:
    """Partition the block into spatial strata, allocate n across them by
    largest remainder on stratum volume, sample uniformly within each."""
    gx, gy, gz = strata
    n_strata = gx * gy * gz
    if n < n_strata:
        raise ValueError(f"n={n} below stratum count {n_strata}")
    if n > block.volume:
        raise ValueError(f"cannot sample {n} of {block.volume} points")
    sx, sy, sz = block.extents
    if gx > sx or gy > sy or gz > sz:
        raise ValueError(f"strata {strata} exceed block extents {block.extents}")
    rng = _rng(seed)

    x_splits = np.array_split(np.arange(sx), gx)
    y_splits = np.array_split(np.arange(sy), gy)
    z_splits = np.array_split(np.arange(sz), gz)
    cells = [
        (xs, ys, zs) for zs in z_splits for ys in y_splits for xs in x_splits
    ]
    volumes = np.array([len(xs) * len(ys) * len(zs) for xs, ys, zs in cells])
    counts = entropy.allocate_counts(volumes.astype(float), n, capacities=volumes)

    chosen = []
    for (xs, ys, zs), c in zip(cells, counts):
        if c == 0:
            continue
        # flat indices of the stratum's points, x-fastest
        ii, jj, kk = np.meshgrid(xs, ys, zs, indexing="ij")
        flat = (ii + sx * (jj + sy * kk)).ravel(order="F")
        chosen.append(rng.choice(flat, size=int(c), replace=False))
    return np.sort(np.concatenate(chosen)).astype(np.int64)


def lhs_design(n: int, rng: np.random.Generator, d: int = 3) -> np.ndarray:
    """n-point Latin hypercube in [0, 1)^d: each axis is divided into n
    intervals holding exactly one coordinate, paired by random permutation."""
    coords = np.empty((n, d))
    for axis in range(d):
        perm = rng.permutation(n)
        coords[:, axis] = (perm + rng.uniform(size=n)) / n
    return coords


def sample_lhs(
    block: HypercubeBlock, n: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Latin hypercube sample snapped to unused grid points.

    An n-point LHS design is drawn in normalized [0, 1)^3, then each
    design point is snapped to the nearest grid point, resolving
    collisions to the nearest unused neighbor.
    """
    if n > block.volume:
        raise ValueError(f"cannot sample {n} of {block.volume} points")
    rng = _rng(seed)
    coords = lhs_design(n, rng)

    sx, sy, sz = block.extents
    extents = np.array([sx, sy, sz])
    # nearest grid point to each design coordinate
    snapped = np.rint(coords * (extents - 1)).astype(np.int64)
    taken = np.zeros((sx, sy, sz), dtype=bool)
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        gi, gj, gk = snapped[r]
        if taken[gi, gj, gk]:
            gi, gj, gk = _nearest_free(taken, (gi, gj, gk))
        taken[gi, gj, gk] = True
        out[r] = gi + sx * (gj + sy * gk)
    return out


def _nearest_free(taken: np.ndarray, center: tuple[int, int, int]) -> tuple[int, int, int]:
    sx, sy, sz = taken.shape
    ci, cj, ck = center
    best = None
    best_d2 = None
    for radius in range(1, max(sx, sy, sz)):
        ilo, ihi = max(ci - radius, 0), min(ci + radius, sx - 1)
        jlo, jhi = max(cj - radius, 0), min(cj + radius, sy - 1)
        klo, khi = max(ck - radius, 0), min(ck + radius, sz - 1)
        sub = taken[ilo:ihi + 1, jlo:jhi + 1, klo:khi + 1]
        free = np.argwhere(~sub)
        if free.size:
            pts = free + np.array([ilo, jlo, klo])
            d2 = np.sum((pts - np.array(center)) ** 2, axis=1)
            order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], d2))
            cand = pts[order[0]]
            cand_d2 = d2[order[0]]
            if best is None or cand_d2 < best_d2:
                best, best_d2 = cand, cand_d2
            # anything outside the scanned cube is at least radius+1 away
            if best_d2 <= (radius + 1) ** 2:
                break
    if best is None:
        raise ValueError("no free grid point left")
    return int(best[0]), int(best[1]), int(best[2])


def sample_uips(
    block: HypercubeBlock,
    n: int,
    bins_per_dim: int,
    feature_vars: list[str],
    seed: int | np.random.Generator,
) -> np.ndarray:
    """Uniform-in-phase-space sampling via binned density estimation.

    Each point is accepted with probability min(1, c / density), where
    density comes from a per-bin histogram of the feature space and c is
    bisected so the expected accepted count equals n.  The accepted set
    is then adjusted (uniform down-sample or top-up from the rejected
    pool) to exactly n points.
    """
    if n > block.volume:
        raise ValueError(f"cannot sample {n} of {block.volume} points")
    if not 1 <= len(feature_vars) <= 4:
        raise ValueError("uips supports 1 to 4 feature variables")
    rng = _rng(seed)
    feats = np.stack([block.flat_values(v) for v in feature_vars], axis=1)
    lo = feats.min(axis=0)
    hi = feats.max(axis=0)
    if np.any(hi <= lo):
        degenerate = [v for v, l, h in zip(feature_vars, lo, hi) if h <= l]
        warnings.warn(
            f"degenerate feature range for {degenerate}; falling back to random sampling",
            stacklevel=2,
        )
        return sample_random(block, n, rng)

    edges = [np.linspace(lo[d], hi[d], bins_per_dim + 1) for d in range(feats.shape[1])]
    hist, _ = np.histogramdd(feats, bins=edges)
    bin_idx = np.stack(
        [
            np.clip(np.searchsorted(edges[d], feats[:, d], side="right") - 1, 0, bins_per_dim - 1)
            for d in range(feats.shape[1])
        ],
        axis=1,
    )
    bin_volume = np.prod((hi - lo) / bins_per_dim)
    density = hist[tuple(bin_idx.T)] / (feats.shape[0] * bin_volume)

    # bisect the acceptance constant so that E[accepted] = n
    c_lo, c_hi = 0.0, float(density.max())
    for _ in range(30):
        c = 0.5 * (c_lo + c_hi)
        expected = float(np.sum(np.minimum(1.0, c / density)))
        if abs(expected - n) <= 0.01 * n:
            break
        if expected < n:
            c_lo = c
        else:
            c_hi = c
    accept_p = np.minimum(1.0, c / density)
    u = rng.uniform(size=feats.shape[0])
    accepted = np.flatnonzero(u < accept_p)

    if accepted.size > n:
        accepted = rng.choice(accepted, size=n, replace=False)
    elif accepted.size < n:
        rejected = np.setdiff1d(np.arange(feats.shape[0]), accepted, assume_unique=False)
        topup = rng.choice(rejected, size=n - accepted.size, replace=False)
        accepted = np.concatenate([accepted, topup])
    return np.sort(accepted).astype(np.int64)


def sample_maxent_points(
    block: HypercubeBlock,
    cluster_var: str,
    num_clusters: int,
    n: int,
    seed: int | np.random.Generator,
    num_bins: int = 100,
) -> np.ndarray:
    """Entropy-allocated point selection within one cube.

    Cluster the cube's cluster-variable values, histogram each cluster's
    members over shared value bins, build the pairwise-KL graph over the
    cluster histograms, allocate the sample budget across clusters by
    node strength (capped at cluster size), then sample uniformly
    without replacement inside each cluster.
    """
    if n > block.volume:
        raise ValueError(f"cannot sample {n} of {block.volume} points")
    rng = _rng(seed)
    values = block.flat_values(cluster_var)
    k = clustering.effective_k(values, num_clusters)
    model = clustering.kmeans_fit(
        values[:, None], k, seed=int(rng.integers(2**63)), feature_names=(cluster_var,)
    )
    labels = clustering.assign(model, values[:, None])

    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        hi = lo + 1.0  # constant field; all mass lands in one bin
    edges = np.linspace(lo, hi, num_bins + 1)
    dists = []
    sizes = np.empty(k, dtype=np.int64)
    for c in range(k):
        members = values[labels == c]
        sizes[c] = members.size
        counts, _ = np.histogram(members, bins=edges)
        dists.append(counts / counts.sum() if counts.sum() else np.zeros(num_bins))
    graph = entropy.adjacency_matrix(dists)

    strengths = graph.strengths
    if strengths.sum() == 0.0:
        warnings.warn(
            "all node strengths zero; allocating samples uniformly", stacklevel=2
        )
    counts = entropy.allocate_counts(strengths, n, capacities=sizes)
    chosen = []
    for c in range(k):
        if counts[c] == 0:
            continue
        members = np.flatnonzero(labels == c)
        chosen.append(rng.choice(members, size=int(counts[c]), replace=False))
    return np.sort(np.concatenate(chosen)).astype(np.int64)


# ---------------------------------------------------------------------------
# Temporal selection


def temporal_select(
    snapshot_pdfs: np.ndarray, budget: int, epsilon: float = entropy.DEFAULT_EPSILON
) -> list[int]:
    """Greedy novelty-first selection of snapshot indices.

    Starts from the snapshot of maximal self-entropy, then repeatedly
    adds the snapshot with the largest KL divergence against the mixture
    (mean) of the already-selected histograms.  Ties break to the lowest
    index.
    """
    pdfs = np.asarray(snapshot_pdfs, dtype=np.float64)
    T = pdfs.shape[0]
    if budget > T:
        raise ValueError(f"budget {budget} exceeds snapshot count {T}")
    entropies = np.array([entropy.shannon_entropy(p, epsilon) for p in pdfs])
    selected = [int(np.argmax(entropies))]
    while len(selected) < budget:
        mixture = pdfs[selected].mean(axis=0)
        gains = np.full(T, -np.inf)
        for t in range(T):
            if t not in selected:
                gains[t] = entropy.kl_divergence(pdfs[t], mixture, epsilon)
        selected.append(int(np.argmax(gains)))
    return selected


# ---------------------------------------------------------------------------
# Pipeline


def _dispatch_sampler(
    config: RunConfig, block: HypercubeBlock, rng: np.random.Generator
) -> np.ndarray:
    method = config.method
    if method == "full":
        return sample_full(block)
    n = config.num_samples
    if n is None:
        raise ValueError(f"num_samples is required for method {method!r}")
    if method == "random":
        return sample_random(block, n, rng)
    if method == "stratified":
        return sample_stratified(block, n, tuple(config.strata), rng)
    if method == "lhs":
        return sample_lhs(block, n, rng)
    if method == "uips":
        return sample_uips(
            block, n, config.uips_bins, list(config.input_vars)[:4], rng
        )
    if method == "maxent":
        return sample_maxent_points(
            block, config.cluster_var, config.num_clusters, n, rng
        )
    raise ValueError(f"unknown method {method!r}")


def _cube_rows(
    block: HypercubeBlock, flat_idx: np.ndarray, dataset: GridDataset, role_vars: list[str]
) -> np.ndarray:
    d = dataset.dims
    gidx = block.local_to_global(flat_idx)
    rows = np.empty((flat_idx.size, 7 + len(role_vars)))
    rows[:, 0] = block.timestep
    rows[:, 1:4] = gidx
    rows[:, 4] = gidx[:, 0] / max(d.nx - 1, 1)
    rows[:, 5] = gidx[:, 1] / max(d.ny - 1, 1)
    rows[:, 6] = gidx[:, 2] / max(d.nz - 1, 1)
    for col, var in enumerate(role_vars):
        rows[:, 7 + col] = block.flat_values(var)[flat_idx]
    return rows


def resolve_seed(seed: int | str) -> int:
    """Config seed to integer; "unseeded" draws fresh OS entropy."""
    if isinstance(seed, str):
        if seed == "unseeded":
            return int(np.random.SeedSequence().entropy % (2**63))
        return int(seed)
    return int(seed)


def config_digest(config: RunConfig) -> str:
    from dataclasses import asdict

    return hashlib.sha256(
        json.dumps(asdict(config), sort_keys=True, default=str).encode()
    ).hexdigest()


def run_pipeline(
    config: RunConfig, dataset: GridDataset, workers: int | None = None
) -> SampleSet:
    """Partition, Phase-1 cube selection, Phase-2 point sampling, merge.

    Output is invariant to worker count and cube processing order; the
    merge is an ordered concatenation by (timestep, cube index).
    """
    from .bench import parallel_map

    workers = config.workers if workers is None else workers
    seed = resolve_seed(config.seed)
    role_vars = dataset.role_vars()
    timesteps = (
        list(range(dataset.dims.nt))
        if config.timesteps == "all"
        else [int(t) for t in config.timesteps]
    )

    phase1_seconds = 0.0
    phase2_seconds = 0.0
    pieces: list[np.ndarray] = []
    cube_ranges: list[list[int]] = []
    emitted = 0
    for ts in timesteps:
        t0 = time.perf_counter()
        blocks = partition_hypercubes(dataset, config.cube_extents, ts)
        m = config.num_hypercubes
        if m > len(blocks):
            raise ValueError(
                f"num_hypercubes={m} exceeds available blocks ({len(blocks)})"
            )
        phase1_rng = cube_rng(seed, ts, _PHASE1_TAG)
        if config.hypercubes == "maxent":
            selected = select_hypercubes_maxent(
                blocks, config.cluster_var, config.num_clusters, m, phase1_rng
            )
        else:
            selected = select_hypercubes_random(blocks, m, phase1_rng)
        selected = np.sort(selected)
        phase1_seconds += time.perf_counter() - t0

        t0 = time.perf_counter()

        def one_cube(cube_index: int, _ts=ts, _blocks=blocks) -> np.ndarray:
            block = _blocks[cube_index]
            rng = cube_rng(seed, _ts, cube_index)
            flat_idx = _dispatch_sampler(config, block, rng)
            return _cube_rows(block, flat_idx, dataset, role_vars)

        results = parallel_map(one_cube, [int(c) for c in selected], workers)
        for cube_index, rows in zip(selected, results):
            cube_ranges.append([int(ts), int(cube_index), emitted, emitted + rows.shape[0]])
            emitted += rows.shape[0]
            pieces.append(rows)
        phase2_seconds += time.perf_counter() - t0

    data = np.concatenate(pieces, axis=0) if pieces else np.empty((0, 7 + len(role_vars)))
    columns = ["t", "i", "j", "k", "x", "y", "z", *role_vars]
    provenance = {
        "method": config.method,
        "hypercube_method": config.hypercubes,
        "seed": seed,
        "config_sha256": config_digest(config),
        "grid_dims": {
            "nx": dataset.dims.nx, "ny": dataset.dims.ny,
            "nz": dataset.dims.nz, "nt": dataset.dims.nt,
        },
        "cube_ranges": cube_ranges,
        "phase_seconds": {"phase1": phase1_seconds, "phase2": phase2_seconds},
        "workers": workers,
    }
    return SampleSet(columns=columns, data=data, provenance=provenance)
