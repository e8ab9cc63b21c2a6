"""Chi-square statistic over blended quantile/equal-width bins.

The binning scheme mixes equal-probability edges (null quantiles) with an
equal-width grid over the data range, edge by edge, with a weight kappa:
kappa = 0 gives pure equal-probability bins, kappa = 1 pure equal-width,
and the default "RGd" variant uses kappa = 0.5 with k = 5 + m bins, m
being the number of estimated parameters.  Bins whose expected count under
the null drops to 5 or below are merged into their smaller neighbor before
the statistic is formed.
"""

from __future__ import annotations

import numpy as np

from .models import GofError, NullModel

VARIANT_KAPPA = {"RGd": 0.5, "EqualProb": 0.0, "EqualSize": 1.0}

# Bin count for the user-chosen variants when no nbins override is given;
# RGd always derives k from the model.
DEFAULT_NBINS = 10

# Bins must keep an expected count strictly above this for the chi-square
# approximation-style merging rule.
MIN_EXPECTED = 5.0


def variant_spec(model: NullModel, variant: str, nbins=None) -> tuple[int, float]:
    """Bin count and blend weight for a binning variant."""
    if variant not in VARIANT_KAPPA:
        raise GofError(f"unknown chi-square variant {variant!r}")
    kappa = VARIANT_KAPPA[variant]
    if variant == "RGd":
        k = 5 + model.n_estimated
    else:
        k = DEFAULT_NBINS if nbins is None else int(nbins)
    if k < 2:
        raise GofError("need at least 2 bins")
    return k, kappa


def merge_small_bins(model: NullModel, edges, n: int, params=None) -> np.ndarray:
    """Merge bins until every expected count exceeds 5.

    The bin with the smallest expected count is merged into its
    smaller-expected neighbor (edge bins merge inward).  Expected counts
    are recomputed from the surviving edges each round.
    """
    edges = np.asarray(edges, dtype=float).copy()
    if edges.size < 3:
        raise GofError("merge needs at least 2 bins")
    while True:
        e = n * np.diff(model.cdf(edges, params))
        if np.all(e > MIN_EXPECTED):
            return edges
        if e.size == 1:
            raise GofError("total expected count <= 5; sample too small to bin")
        j = int(np.argmin(e))
        if j == 0:
            edges = np.delete(edges, 1)
        elif j == e.size - 1:
            edges = np.delete(edges, edges.size - 2)
        elif e[j - 1] < e[j + 1]:
            edges = np.delete(edges, j)
        else:
            edges = np.delete(edges, j + 1)


def build_bins(model: NullModel, data_sorted, k: int, kappa: float,
               params=None) -> np.ndarray:
    """Blended bin edges over the data range, merged for small counts.

    The quantile-based edges run from min(data) through the k-1 interior
    null quantiles to max(data); the equal-width grid spans the same range,
    except that an infinite endpoint is pulled in to the 5/n (or 1 - 5/n)
    quantile before gridding and restored as an infinite edge afterwards.
    """
    if not model.has_quantile:
        raise GofError(f"{model.family}: chi-square binning needs a quantile")
    x = np.asarray(data_sorted, dtype=float)
    n = x.size
    if n == 0:
        raise GofError("empty sample")
    lo, hi = float(x[0]), float(x[-1])
    q_int = np.atleast_1d(model.quantile(np.arange(1, k) / k, params))
    bins0 = np.concatenate([[lo], q_int, [hi]])
    if k == 2:
        bins1 = np.array([lo, float(model.quantile(0.5, params)), hi])
    elif np.isfinite(lo) and np.isfinite(hi):
        bins1 = np.linspace(lo, hi, k + 1)
    elif np.isfinite(lo):
        hi_q = float(model.quantile(1.0 - 5.0 / n, params))
        bins1 = np.concatenate([np.linspace(lo, hi_q, k), [np.inf]])
    elif np.isfinite(hi):
        lo_q = float(model.quantile(5.0 / n, params))
        bins1 = np.concatenate([[-np.inf], np.linspace(lo_q, hi, k)])
    else:
        lo_q = float(model.quantile(5.0 / n, params))
        hi_q = float(model.quantile(1.0 - 5.0 / n, params))
        bins1 = np.concatenate([[-np.inf], np.linspace(lo_q, hi_q, k - 1), [np.inf]])
    with np.errstate(invalid="ignore"):
        edges = (1.0 - kappa) * bins0 + kappa * bins1
    # 0 * inf from the blend marks an endpoint that must stay infinite.
    if np.isnan(edges[0]):
        edges[0] = -np.inf
    if np.isnan(edges[-1]):
        edges[-1] = np.inf
    if np.any(np.diff(edges) <= 0):
        raise GofError("bin edges not strictly increasing")
    return merge_small_bins(model, edges, n, params)


def _counts_tail_bins(x_sorted, interior) -> np.ndarray:
    # Observed counts over (-inf, e1], (e1, e2], ..., (e_{k-1}, inf).
    idx = np.searchsorted(interior, x_sorted, side="left")
    return np.bincount(idx, minlength=len(interior) + 1)


def chisq_stat(data, model: NullModel, variant: str = "RGd", nbins=None,
               params=None) -> float:
    """Pearson chi-square of the sample against the null over blended bins.

    Parameters are re-fitted from this sample when the model estimates and
    no explicit ``params`` are supplied.  Counting extends the outermost
    bins to the whole real line so every observation lands somewhere.
    """
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    if params is None:
        params = model.estimate(x) if model.estimate_params else model.params
    k, kappa = variant_spec(model, variant, nbins)
    edges = build_bins(model, x, k, kappa, params)
    interior = edges[1:-1]
    obs = _counts_tail_bins(x, interior)
    cdf_int = np.atleast_1d(model.cdf(interior, params))
    exp = n * np.diff(np.concatenate([[0.0], cdf_int, [1.0]]))
    if np.any(exp <= 0):
        raise GofError("zero expected count after merging")
    return float(np.sum((obs - exp) ** 2 / exp))


def chisq_stat_rows(x_rows, model: NullModel, variant: str, nbins=None,
                    params=None) -> np.ndarray:
    """Row-wise chi-square for a stack of sorted samples.

    Vectorizes the common case (finite range, no merging needed); rows
    that would trigger merging fall back to the scalar path.
    """
    x = np.asarray(x_rows, dtype=float)
    nrows, n = x.shape
    if params is None:
        params = model.estimate_rows(x) if model.estimate_params else model.params
    k, kappa = variant_spec(model, variant, nbins)
    lo = x[:, :1]
    hi = x[:, -1:]
    q_int = np.asarray(model.quantile(np.arange(1, k) / k, params), dtype=float)
    if q_int.ndim == 1:
        q_int = np.broadcast_to(q_int, (nrows, k - 1))
    bins0 = np.hstack([lo, q_int, hi])
    if k == 2:
        med = np.asarray(model.quantile(np.array([0.5]), params), dtype=float)
        bins1 = np.hstack([lo, np.broadcast_to(med.reshape(-1, 1), (nrows, 1)), hi])
    else:
        bins1 = np.linspace(lo.ravel(), hi.ravel(), k + 1, axis=1)
    edges = (1.0 - kappa) * bins0 + kappa * bins1
    exp_inner = n * np.diff(model.cdf(edges, params), axis=1)
    ok = (exp_inner > MIN_EXPECTED).all(axis=1) & (np.diff(edges, axis=1) > 0).all(axis=1)

    interior = edges[:, 1:-1]
    cum = np.empty((nrows, k + 1))
    cum[:, 0] = 0.0
    for j in range(k - 1):
        cum[:, j + 1] = (x <= interior[:, j:j + 1]).sum(axis=1)
    cum[:, k] = n
    obs = np.diff(cum, axis=1)
    cdf_int = model.cdf(interior, params)
    full = np.concatenate(
        [np.zeros((nrows, 1)), cdf_int, np.ones((nrows, 1))], axis=1
    )
    exp = n * np.diff(full, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum((obs - exp) ** 2 / exp, axis=1)

    if not np.all(ok):
        scalar_params = params
        for r in np.nonzero(~ok)[0]:
            if model.estimate_params:
                scalar_params = tuple(float(np.asarray(p).reshape(-1)[r])
                                      for p in params)
            out[r] = chisq_stat(x[r], model, variant, nbins=nbins,
                                params=scalar_params)
    return out
