"""Simulation-based calibration of the combined minimum p-value.

Running several goodness-of-fit tests on the same data and rejecting when
any of them rejects produces a minimum p-value that is far from uniform.
This module simulates the joint null distribution of all enabled
statistics (a parametric bootstrap, re-fitting parameters per replicate),
turns the simulated minima into an interpolated empirical CDF, and maps
the observed minimum p-value through it.  The mapped value, reported as
"RC", is uniform under the null by construction.

Simulation is deterministic given a seed: rows are generated in fixed-size
blocks, each block seeded from its own spawn of the master seed sequence,
so results do not depend on how blocks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import EstimationError, GofError, NullModel
from .stats import compute_stat_matrix, compute_stat_vector, resolve_methods

# Rows are simulated in blocks: large enough to amortize numpy dispatch,
# small enough to keep (block, n) matrices cheap.
_BLOCK_ROWS = 256

# Abort the table simulation when estimation fails in more than this
# fraction of rows.
_MAX_FAILURE_FRACTION = 0.01

CURVE_POINTS = 250


@dataclass(frozen=True)
class Histogram:
    """Pre-binned sample: k+1 edges and k nonnegative counts."""

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=float))
        if self.edges.ndim != 1 or self.counts.ndim != 1:
            raise GofError("histogram: edges and counts must be 1-d")
        if self.edges.size != self.counts.size + 1:
            raise GofError("histogram: need len(edges) == len(counts) + 1")
        if np.any(np.diff(self.edges) <= 0):
            raise GofError("histogram: edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise GofError("histogram: negative count")

    @property
    def n(self) -> int:
        return int(round(float(self.counts.sum())))


def spread_out(hist: Histogram, model: NullModel) -> np.ndarray:
    """Reconstruct pointwise data from a histogram, deterministically.

    Each bin's c observations are placed at the c interior fractions
    (j - 0.5)/c of the bin: in CDF mass when the model has a quantile
    function, else linearly in x.
    """
    if hist.n == 0:
        raise GofError("histogram: zero total count")
    pieces = []
    use_quantile = model.has_quantile
    for a, b, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
        c = int(round(float(c)))
        if c == 0:
            continue
        frac = (np.arange(c) + 0.5) / c
        if use_quantile:
            fa, fb = model.cdf(np.array([a, b]))
            pieces.append(model.quantile(fa + (fb - fa) * frac))
        else:
            pieces.append(a + (b - a) * frac)
    return np.sort(np.concatenate(pieces))


@dataclass(frozen=True, eq=False)
class NullTable:
    """B x M matrix of simulated null statistic values, one column per method."""

    values: np.ndarray
    methods: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[1] != len(self.methods):
            raise GofError("null table: shape does not match method list")
        if v.shape[0] < 100:
            raise GofError("null table: need at least 100 simulation rows")
        if not np.all(np.isfinite(v)):
            raise GofError("null table: non-finite statistic values")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class AdjustmentCurve:
    """Interpolated ECDF of simulated minimum p-values on a fixed grid.

    Evaluation clamps to the endpoint values outside [0, 1].
    """

    grid: np.ndarray
    cdf_values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        c = np.asarray(self.cdf_values, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "cdf_values", c)
        if g.shape != c.shape or g.ndim != 1:
            raise GofError("adjustment curve: grid/value shape mismatch")
        if np.any(np.diff(c) < 0):
            raise GofError("adjustment curve: values must be nondecreasing")

    def __call__(self, p):
        out = np.interp(p, self.grid, self.cdf_values)
        return float(out) if np.isscalar(p) else out


@dataclass(frozen=True)
class TestReport:
    """Outcome of one combined test, with everything needed to reproduce it."""

    __test__ = False  # not a pytest class, despite the name

    rc_pvalue: float
    per_method_pvalues: dict[str, float]
    B: int
    seed: int
    n: int
    poisson_lambda: Optional[float]
    model: dict
    methods: tuple[str, ...]
    nbins: Optional[int] = None
    fresh_minp_batch: bool = False

    def to_dict(self) -> dict:
        return {
            "rc": self.rc_pvalue,
            "pvalues": dict(self.per_method_pvalues),
            "B": self.B,
            "seed": self.seed,
            "n": self.n,
            "lambda": self.poisson_lambda,
            "model": dict(self.model),
            "methods": list(self.methods),
            "nbins": self.nbins,
            "fresh_minp_batch": self.fresh_minp_batch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        return cls(
            rc_pvalue=float(d["rc"]),
            per_method_pvalues={k: float(v) for k, v in d["pvalues"].items()},
            B=int(d["B"]),
            seed=int(d["seed"]),
            n=int(d["n"]),
            poisson_lambda=None if d.get("lambda") is None else float(d["lambda"]),
            model=dict(d["model"]),
            methods=tuple(d["methods"]),
            nbins=None if d.get("nbins") is None else int(d["nbins"]),
            fresh_minp_batch=bool(d.get("fresh_minp_batch", False)),
        )


# --------------------------------------------------------------------------
# Null-table simulation
# --------------------------------------------------------------------------


def _rowwise_with_retry(x, model, methods, nbins, rng, n):
    """Per-row fallback when a block hits an estimation failure."""
    vals = np.empty((x.shape[0], len(methods)))
    failures = 0
    for r in range(x.shape[0]):
        row = x[r]
        for _ in range(100):
            try:
                vals[r] = compute_stat_matrix(row.reshape(1, -1), model,
                                              methods, nbins=nbins)[0]
                break
            except (EstimationError, GofError):
                failures += 1
                row = np.sort(model.sample(n, rng))
        else:
            raise EstimationError("persistent estimation failure while simulating")
    return vals, failures


def draw_poisson_sizes(rng, lam: float, count: int) -> np.ndarray:
    """Per-row sample sizes ~ Poisson(lam), redrawn below the minimum of 3.

    The redraw only matters for tiny rates; at the rates the harness uses
    (hundreds and up) it never triggers.
    """
    sizes = rng.poisson(lam, count)
    while np.any(sizes < 3):
        bad = sizes < 3
        sizes[bad] = rng.poisson(lam, int(bad.sum()))
    return sizes


def _simulate_block(args):
    model, methods, block_size, n, lam, child_seed, nbins = args
    rng = np.random.default_rng(child_seed)
    failures = 0
    if lam is None:
        x = np.sort(model.sample((block_size, n), rng), axis=1)
        try:
            vals = compute_stat_matrix(x, model, methods, nbins=nbins)
        except (EstimationError, GofError):
            vals, failures = _rowwise_with_retry(x, model, methods, nbins, rng, n)
        return vals, failures
    # Poisson sample sizes: draw all sizes, then sample row by row (keeps
    # the stream order independent of the size-grouping below).
    sizes = draw_poisson_sizes(rng, lam, block_size)
    rows = [np.sort(model.sample(int(sz), rng)) for sz in sizes]
    vals = np.empty((block_size, len(methods)))
    for sz in np.unique(sizes):
        idx = np.nonzero(sizes == sz)[0]
        x = np.vstack([rows[i] for i in idx])
        try:
            vals[idx] = compute_stat_matrix(x, model, methods, nbins=nbins)
        except (EstimationError, GofError):
            v, f = _rowwise_with_retry(x, model, methods, nbins, rng, int(sz))
            vals[idx] = v
            failures += f
    return vals, failures


def simulate_null_table(model: NullModel, methods=None, B: int = 1000,
                        n: int | None = None, poisson_lambda: float | None = None,
                        seed=None, workers: int = 1, nbins=None) -> NullTable:
    """Simulate the joint null distribution of all enabled statistics.

    Each of the B rows is a fresh sample from the model (size n, or Poisson
    with the given rate, redrawn on sizes below 3), with parameters
    re-fitted per row when the model estimates.  Aborts if estimation fails
    in more than 1% of rows.
    """
    if B < 100:
        raise GofError("need B >= 100 simulation rows")
    if poisson_lambda is None and (n is None or n < 3):
        raise GofError("need n >= 3 or a Poisson rate")
    if poisson_lambda is not None and poisson_lambda <= 0:
        raise GofError("Poisson rate must be > 0")
    methods = resolve_methods(model, methods, n)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    nblocks = math.ceil(B / _BLOCK_ROWS)
    sizes = [min(_BLOCK_ROWS, B - i * _BLOCK_ROWS) for i in range(nblocks)]
    tasks = [
        (model, methods, bs, n, poisson_lambda, child, nbins)
        for bs, child in zip(sizes, ss.spawn(nblocks))
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_block, tasks))
    else:
        results = [_simulate_block(t) for t in tasks]
    failures = sum(f for _, f in results)
    if failures > max(1, int(_MAX_FAILURE_FRACTION * B)):
        raise EstimationError(
            f"estimation failed {failures} times while simulating {B} rows; "
            "the null model is likely degenerate for this sample size"
        )
    return NullTable(np.vstack([v for v, _ in results]), methods)


# --------------------------------------------------------------------------
# p-values and the adjustment curve
# --------------------------------------------------------------------------


def per_method_pvalues(stat_vector, table: NullTable) -> dict[str, float]:
    """Simulated p-values: share of table rows strictly above the observed value."""
    b = table.n_rows
    obs = np.array([stat_vector[m] for m in table.methods], dtype=float)
    out = {}
    for j, m in enumerate(table.methods):
        col = np.sort(table.values[:, j])
        out[m] = float(b - np.searchsorted(col, obs[j], side="right")) / b
    return out


def _min_pvalues_self_sweep(values: np.ndarray) -> np.ndarray:
    """Minimum p-value of every table row against the rest of the table.

    Deterministic full sweep; each row's own value is excluded from its
    comparison count, hence the B-1 denominator.
    """
    b = values.shape[0]
    pmin = np.full(b, np.inf)
    for j in range(values.shape[1]):
        col = values[:, j]
        cnt = b - np.searchsorted(np.sort(col), col, side="right")
        np.minimum(pmin, cnt / (b - 1), out=pmin)
    return pmin


def _min_pvalues_against(values: np.ndarray, table: NullTable) -> np.ndarray:
    b = table.n_rows
    pmin = np.full(values.shape[0], np.inf)
    for j in range(values.shape[1]):
        col = np.sort(table.values[:, j])
        cnt = b - np.searchsorted(col, values[:, j], side="right")
        np.minimum(pmin, cnt / b, out=pmin)
    return pmin


def curve_from_minima(minima) -> AdjustmentCurve:
    """Interpolated ECDF of a sample of minimum p-values on a 250-point grid."""
    minima = np.asarray(minima, dtype=float)
    grid = np.linspace(0.0, 1.0, CURVE_POINTS)
    cdf = np.searchsorted(np.sort(minima), grid, side="right") / minima.size
    return AdjustmentCurve(grid, cdf)


def build_adjustment_curve(table: NullTable,
                           fresh: NullTable | None = None) -> AdjustmentCurve:
    """Empirical CDF of simulated minimum p-values, linearly interpolated.

    By default every table row is swept against the rest of the table
    (self-excluded), which targets the same distribution as resampling rows
    but without resampling noise.  Passing a second, independent table
    computes the minima from its rows against the first table instead.
    """
    if fresh is None:
        minima = _min_pvalues_self_sweep(table.values)
    else:
        if fresh.methods != table.methods:
            raise GofError("fresh table has a different method set")
        minima = _min_pvalues_against(fresh.values, table)
    return curve_from_minima(minima)


# --------------------------------------------------------------------------
# The combined test
# --------------------------------------------------------------------------


def run_test(sample, model: NullModel, methods=None, B: int = 1000,
             poisson_lambda: float | None = None, seed=None, workers: int = 1,
             nbins=None, fresh_minp_batch: bool = False) -> TestReport:
    """Run every enabled test plus the adjusted combination on one sample.

    Steps: un-bin histogram input, fit parameters (when estimating),
    simulate the null table from the fitted model, build the min-p
    adjustment curve, compute the data's per-method p-values, and map their
    minimum through the curve.  The result's ``rc_pvalue`` is uniform under
    the null regardless of how many methods are enabled.

    ``fresh_minp_batch=True`` spends a second batch of B simulations on the
    min-p sample instead of reusing the table.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    seed_value = ss.entropy

    if isinstance(sample, Histogram):
        data = spread_out(sample, model)
    else:
        data = np.asarray(sample, dtype=float)
    data = np.sort(data.ravel())
    n = data.size
    if n < 3:
        raise GofError("input: need at least 3 observations")
    methods = resolve_methods(model, methods, n)

    if model.estimate_params:
        try:
            sim_model = model.with_params(model.estimate(data))
        except EstimationError as e:
            raise EstimationError(f"estimate: {e}") from e
    else:
        sim_model = model

    table_ss, fresh_ss = ss.spawn(2)
    try:
        table = simulate_null_table(sim_model, methods, B, n=n,
                                    poisson_lambda=poisson_lambda,
                                    seed=table_ss, workers=workers, nbins=nbins)
        fresh = None
        if fresh_minp_batch:
            fresh = simulate_null_table(sim_model, methods, B, n=n,
                                        poisson_lambda=poisson_lambda,
                                        seed=fresh_ss, workers=workers,
                                        nbins=nbins)
    except GofError as e:
        raise type(e)(f"simulate: {e}") from e

    curve = build_adjustment_curve(table, fresh)
    data_stats = compute_stat_vector(data, sim_model, methods, nbins=nbins)
    pvals = per_method_pvalues(data_stats, table)
    rc = curve(min(pvals.values()))
    return TestReport(
        rc_pvalue=float(rc),
        per_method_pvalues=pvals,
        B=B,
        seed=int(seed_value),
        n=n,
        poisson_lambda=poisson_lambda,
        model=sim_model.describe(),
        methods=methods,
        nbins=nbins,
        fresh_minp_batch=fresh_minp_batch,
    )
