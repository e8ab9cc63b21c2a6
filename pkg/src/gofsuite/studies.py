"""Performance harness: type-I-error grids, power sweeps, rankings, demo.

Every cell is driven by full, independent runs of the combined test, so
the reported rejection rates are honest Monte Carlo estimates of the
procedure as a user would run it.  Desk-scale defaults (B=1000, 1000
replications) keep a study in the minutes range; publication-scale values
are a config change.

Replications are independent work items: the seed of replication r of
grid point g of case c is derived as SeedSequence(master, spawn_key=
(c, g, r)), so results are identical no matter how the pool schedules
them.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adjust import Histogram, curve_from_minima, run_test
from .models import AlternativeSpec, GofError, NullModel, sample_alternative
from .stats import resolve_methods

# Method set used by the comparative studies: the seven EDF statistics,
# the blended-bin chi-square, and the quantile-correlation statistic.
# Family-specific extras (JB, SW, smooth variants) can be added per case.
DEFAULT_STUDY_METHODS = ("KS", "AD", "CdM", "W", "ZK", "ZA", "ZC", "RGd", "ppcc")

RC = "RC"


# --------------------------------------------------------------------------
# Specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Type1Case:
    """One cell of the type-I-error grid."""

    family: str
    params: tuple[float, ...]
    estimate: bool
    n: int

    def model(self) -> NullModel:
        return NullModel(self.family, self.params, self.estimate)


@dataclass(frozen=True)
class PowerCase:
    """One alternative sweep: a null model versus a parameterized family.

    ``alt_params`` carries None in the slot swept by ``grid``.  ``binned``
    reduces each dataset to an equal-width histogram with that many bins
    before testing; ``poisson_lambda`` draws the per-dataset sample size
    from a Poisson with that rate (and passes it to the bootstrap).
    """

    name: str
    null_family: str
    null_params: tuple[float, ...]
    estimate: bool
    alt_family: str
    alt_params: tuple
    grid: tuple[float, ...]
    n: int = 1000
    binned: Optional[int] = None
    poisson_lambda: Optional[float] = None

    def __post_init__(self):
        if len(self.grid) == 0:
            raise GofError(f"{self.name}: empty parameter grid")
        if sum(1 for p in self.alt_params if p is None) != 1:
            raise GofError(f"{self.name}: exactly one alternative parameter "
                           "must be None (the swept slot)")

    def model(self) -> NullModel:
        return NullModel(self.null_family, self.null_params, self.estimate)

    def alternative(self, value: float) -> AlternativeSpec:
        params = tuple(value if p is None else p for p in self.alt_params)
        return AlternativeSpec(self.alt_family, params)


@dataclass(frozen=True)
class StudySpec:
    """Shared knobs for a batch of power cases."""

    cases: tuple[PowerCase, ...]
    B: int = 1000
    reps: int = 1000
    alphas: tuple[float, ...] = (0.05,)
    methods: tuple[str, ...] = DEFAULT_STUDY_METHODS
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.cases:
            raise GofError("study: no cases")
        for a in self.alphas:
            if not 0 < a < 1:
                raise GofError(f"alpha {a} outside (0, 1)")


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------


@dataclass
class Type1Result:
    cases: list[Type1Case]
    alphas: tuple[float, ...]
    rates: np.ndarray            # (n_cases, n_alphas)
    B: int
    reps: int
    seed: int
    methods: tuple[str, ...]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["distribution", "parameters", "sample_size"]
                       + [f"alpha_{a:g}" for a in self.alphas])
            for case, row in zip(self.cases, self.rates):
                w.writerow([case.family,
                            "Estimated" if case.estimate else "Fixed",
                            case.n] + [f"{r:.6g}" for r in row])


def read_type1_csv(path):
    """Re-parse a type-I-error CSV into (header alphas, row dicts)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    alphas = tuple(float(h.split("_", 1)[1]) for h in rows[0][3:])
    out = []
    for row in rows[1:]:
        out.append({
            "distribution": row[0],
            "parameters": row[1],
            "sample_size": int(row[2]),
            "rates": tuple(float(v) for v in row[3:]),
        })
    return alphas, out


@dataclass
class CasePowerResult:
    case: PowerCase
    methods: tuple[str, ...]          # includes RC, first
    power: np.ndarray                 # (n_grid, n_methods, n_alphas)

    def mean_power(self, alpha_idx: int = 0) -> dict[str, float]:
        return {m: float(v) for m, v in
                zip(self.methods, self.power[:, :, alpha_idx].mean(axis=0))}


@dataclass
class PowerStudyResult:
    spec: StudySpec
    cases: list[CasePowerResult]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "method", "param", "alpha", "power"])
            for cr in self.cases:
                for gi, g in enumerate(cr.case.grid):
                    for mi, m in enumerate(cr.methods):
                        for ai, a in enumerate(self.spec.alphas):
                            w.writerow([cr.case.name, m, f"{g:g}", f"{a:g}",
                                        f"{cr.power[gi, mi, ai]:.6g}"])


def read_power_csv(path):
    """Re-parse a power CSV into {case: {(method, param, alpha): power}}."""
    out: dict[str, dict] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["method"], float(row["param"]), float(row["alpha"]))
            out.setdefault(row["case"], {})[key] = float(row["power"])
    return out


@dataclass
class StudySummary:
    methods: tuple[str, ...]
    mean_power: dict[str, float]               # across all cases and grid points
    ranks: dict[str, dict[str, int]]           # case -> method -> rank (1 best)
    gap_points: dict[str, Optional[float]]     # case -> grid value (or None)
    gap_powers: dict[str, dict[str, float]]    # case -> method -> power at gap
    alpha: float

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "method", "mean_power", "rank",
                        "gap_param", "power_at_gap", "gap_to_best"])
            overall_rank = rank_by_power(self.mean_power)
            for m in self.methods:
                w.writerow(["__overall__", m, f"{self.mean_power[m]:.6g}",
                            overall_rank[m], "", "", ""])
            for case, ranks in self.ranks.items():
                point = self.gap_points[case]
                powers = self.gap_powers.get(case, {})
                best = max(powers.values()) if powers else None
                for m in self.methods:
                    w.writerow([
                        case, m, "", ranks[m],
                        "" if point is None else f"{point:g}",
                        "" if m not in powers else f"{powers[m]:.6g}",
                        "" if m not in powers else f"{best - powers[m]:.6g}",
                    ])


def read_summary_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------
# Replication engine
# --------------------------------------------------------------------------


def _rep_seed(master: int, case_idx: int, grid_idx: int, rep_idx: int):
    return np.random.SeedSequence(master, spawn_key=(case_idx, grid_idx, rep_idx))


def _null_rc_rep(args):
    case, methods, B, master, case_idx, rep_idx = args
    ss = _rep_seed(master, case_idx, 0, rep_idx)
    data_ss, test_ss = ss.spawn(2)
    model = case.model()
    x = model.sample(case.n, np.random.default_rng(data_ss))
    return run_test(x, model, methods=methods, B=B, seed=test_ss).rc_pvalue


def _power_rep(args):
    case, value, methods, B, alphas, master, case_idx, grid_idx, rep_idx = args
    ss = _rep_seed(master, case_idx, grid_idx, rep_idx)
    data_ss, test_ss = ss.spawn(2)
    rng = np.random.default_rng(data_ss)
    model = case.model()
    n = case.n
    if case.poisson_lambda is not None:
        from .adjust import draw_poisson_sizes

        n = int(draw_poisson_sizes(rng, case.poisson_lambda, 1)[0])
    x = sample_alternative(case.alternative(value), n, rng)
    sample = x
    if case.binned is not None:
        counts, edges = np.histogram(x, bins=case.binned)
        sample = Histogram(edges, counts)
    rep = run_test(sample, model, methods=methods, B=B,
                   poisson_lambda=case.poisson_lambda, seed=test_ss)
    # One rejection row per alpha: RC first, then each individual method by
    # its own unadjusted simulated p-value.
    out = np.empty((len(alphas), 1 + len(rep.methods)), dtype=bool)
    for ai, a in enumerate(alphas):
        out[ai, 0] = rep.rc_pvalue <= a
        out[ai, 1:] = [rep.per_method_pvalues[m] <= a for m in rep.methods]
    return out


def _run_pool(fn, tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks, chunksize=4))
    return [fn(t) for t in tasks]


def null_rc_sample(case: Type1Case, B: int = 1000, reps: int = 1000,
                   methods=DEFAULT_STUDY_METHODS, seed: int = 0,
                   workers: int = 1, case_index: int = 0) -> np.ndarray:
    """Adjusted p-values from ``reps`` full test runs on true-null data.

    The raw sample behind a type-I-error cell; under a correct procedure
    these values are uniform on [0, 1].
    """
    methods_c = resolve_methods(case.model(), methods, case.n)
    tasks = [(case, methods_c, B, seed, case_index, r) for r in range(reps)]
    return np.array(_run_pool(_null_rc_rep, tasks, workers))


def type1_study(cases, B: int = 1000, reps: int = 1000,
                alphas=(0.01, 0.05, 0.10), methods=DEFAULT_STUDY_METHODS,
                seed: int = 0, workers: int = 1) -> Type1Result:
    """Rejection rate of the combined test under true null models.

    One row per (model, n) cell; data are drawn from the null itself, so
    every rate should sit near its nominal alpha.
    """
    cases = [c if isinstance(c, Type1Case) else Type1Case(*c) for c in cases]
    alphas = tuple(alphas)
    rates = np.empty((len(cases), len(alphas)))
    for ci, case in enumerate(cases):
        rcs = null_rc_sample(case, B=B, reps=reps, methods=methods, seed=seed,
                             workers=workers, case_index=ci)
        rates[ci] = [(rcs <= a).mean() for a in alphas]
    return Type1Result(cases, alphas, rates, B, reps, seed, tuple(methods))


def power_study(spec: StudySpec) -> PowerStudyResult:
    """Rejection proportions over every case's alternative grid.

    The combined test rejects via its adjusted p-value; each individual
    method rejects via its own simulated (unadjusted) p-value, mirroring
    per-method power curves.
    """
    out = []
    for ci, case in enumerate(spec.cases):
        methods_c = resolve_methods(case.model(), spec.methods, case.n)
        power = np.empty((len(case.grid), 1 + len(methods_c), len(spec.alphas)))
        for gi, value in enumerate(case.grid):
            tasks = [(case, value, methods_c, spec.B, spec.alphas, spec.seed,
                      ci, gi, r) for r in range(spec.reps)]
            hits = np.array(_run_pool(_power_rep, tasks, spec.workers))
            power[gi] = hits.mean(axis=0).T
        out.append(CasePowerResult(case, (RC,) + methods_c, power))
    return PowerStudyResult(spec, out)


def rank_by_power(mean_power: dict[str, float]) -> dict[str, int]:
    """Rank 1 for the highest mean power; ties broken by method name."""
    ordered = sorted(mean_power, key=lambda m: (-mean_power[m], m))
    return {m: i + 1 for i, m in enumerate(ordered)}


def summarize(result: PowerStudyResult, alpha: float | None = None,
              gap_threshold: float = 0.9) -> StudySummary:
    """Mean power, per-case rankings, and the gap-to-best table.

    The gap table looks at each case's first grid point where any method's
    power exceeds the threshold and records every method's power there;
    cases that never cross are marked absent.
    """
    if len(result.cases) < 2:
        raise GofError("summarize needs at least 2 cases")
    alphas = result.spec.alphas
    ai = 0 if alpha is None else alphas.index(alpha)
    methods = result.cases[0].methods
    for cr in result.cases:
        if cr.methods != methods:
            raise GofError("summarize needs a common method set across cases")

    totals = np.zeros(len(methods))
    count = 0
    ranks = {}
    gap_points = {}
    gap_powers = {}
    for cr in result.cases:
        p = cr.power[:, :, ai]
        totals += p.sum(axis=0)
        count += p.shape[0]
        ranks[cr.case.name] = rank_by_power(cr.mean_power(ai))
        crossing = np.nonzero(p.max(axis=1) > gap_threshold)[0]
        if crossing.size:
            gi = int(crossing[0])
            gap_points[cr.case.name] = float(cr.case.grid[gi])
            gap_powers[cr.case.name] = {m: float(v) for m, v in
                                        zip(methods, p[gi])}
        else:
            gap_points[cr.case.name] = None
            gap_powers[cr.case.name] = {}
    mean_power = {m: float(v / count) for m, v in zip(methods, totals)}
    return StudySummary(methods, mean_power, ranks, gap_points, gap_powers,
                        alphas[ai])


# --------------------------------------------------------------------------
# Pairwise-comparison demonstration
# --------------------------------------------------------------------------


@dataclass
class DemoResult:
    raw_minima: np.ndarray
    adjusted: np.ndarray
    curve: "object"
    n_pairs: int
    n_obs: int
    n_groups: int
    seed: int

    def overlays(self):
        """y = x and the independent-test curve 1-(1-p)^k on the grid."""
        g = self.curve.grid
        return g, 1.0 - (1.0 - g) ** self.n_pairs

    def write_csv(self, minima_path, curve_path):
        with open(minima_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "min_pvalue", "adjusted_pvalue"])
            for i, (r, a) in enumerate(zip(self.raw_minima, self.adjusted)):
                w.writerow([i, f"{r:.6g}", f"{a:.6g}"])
        indep = self.overlays()[1]
        with open(curve_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "ecdf", "identity", "independent"])
            for p, e, ind in zip(self.curve.grid, self.curve.cdf_values, indep):
                w.writerow([f"{p:.6g}", f"{e:.6g}", f"{p:.6g}", f"{ind:.6g}"])


def read_demo_minima_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["min_pvalue"]) for r in rows]),
            np.array([float(r["adjusted_pvalue"]) for r in rows]))


def read_demo_curve_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows])
            for k in ("p", "ecdf", "identity", "independent")}


def _welch_pvalue(a, b):
    from scipy import stats as ss

    return float(ss.ttest_ind(a, b, equal_var=False).pvalue)


def anova_demo(n_obs: int = 100, n_groups: int = 5, reps: int = 1000,
               seed: int = 0) -> DemoResult:
    """Min-p adjustment outside goodness-of-fit: all-pairs mean comparisons.

    Each replication assigns standard-normal draws to groups uniformly at
    random (re-assigning if any group ends up with fewer than 2 members),
    runs every pairwise Welch t-test, and keeps the smallest p-value.  The
    interpolated ECDF of those minima maps them back to uniformity.
    """
    if n_groups < 2:
        raise GofError("demo needs at least 2 groups")
    n_pairs = n_groups * (n_groups - 1) // 2
    minima = np.empty(reps)
    for r in range(reps):
        rng = np.random.default_rng(_rep_seed(seed, 0, 0, r))
        z = rng.normal(size=n_obs)
        while True:
            groups = rng.integers(0, n_groups, n_obs)
            if np.all(np.bincount(groups, minlength=n_groups) >= 2):
                break
        best = 1.0
        for i in range(n_groups):
            for j in range(i + 1, n_groups):
                best = min(best, _welch_pvalue(z[groups == i], z[groups == j]))
        minima[r] = best
    curve = curve_from_minima(minima)
    return DemoResult(minima, curve(minima), curve, n_pairs, n_obs, n_groups,
                      seed)


# --------------------------------------------------------------------------
# Plots
# --------------------------------------------------------------------------


def plot_power_curves(result: PowerStudyResult, out_dir, alpha: float | None = None):
    """One SVG per case: power versus the swept parameter.

    The combined test is drawn with connected dots; individual methods as
    dots only.
    """
    import pathlib

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ai = 0 if alpha is None else result.spec.alphas.index(alpha)
    paths = []
    for cr in result.cases:
        fig, ax = plt.subplots(figsize=(7, 5))
        order = np.argsort(-cr.power[:, :, ai].mean(axis=0))
        for mi in order:
            m = cr.methods[mi]
            if m == RC:
                ax.plot(cr.case.grid, cr.power[:, mi, ai], "o-", lw=2,
                        label=m, zorder=5)
            else:
                ax.plot(cr.case.grid, cr.power[:, mi, ai], "o", ms=4, label=m)
        ax.set_xlabel("alternative parameter")
        ax.set_ylabel(f"power at alpha={result.spec.alphas[ai]:g}")
        ax.set_title(cr.case.name)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=8, ncol=2)
        path = out_dir / f"power_{cr.case.name}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths
