"""Test statistics computed for one sample against one null model.

Every statistic follows the convention that large values argue against the
null hypothesis.  The EDF statistics operate on the probability integral
transform y_i = F(x_(i); theta_hat), where theta_hat is re-fitted from the
sample at hand whenever the model estimates parameters; that per-sample
re-fit is what makes the parametric bootstrap in ``adjust`` valid.

All formula statistics accept either a single sorted sample (1-d) or a
stack of sorted samples (2-d, one per row).  The 2-d form is the hot path
used by the null-table simulation; the 1-d form is the reference contract
and is what the unit-test oracles check.
"""

from __future__ import annotations

import warnings

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import stats as _scipy_stats

from .models import GofError, NullModel

# Canonical method order; these exact strings appear in config files and
# report output.
METHOD_ORDER = (
    "KS", "AD", "CdM", "W", "ZK", "ZA", "ZC",
    "RGd", "EqualSize", "EqualProb",
    "ppcc", "JB", "SW", "sNor", "sUnif", "sExp",
)

EDF_METHODS = ("KS", "AD", "CdM", "W", "ZK", "ZA", "ZC")
CHISQ_METHODS = ("RGd", "EqualSize", "EqualProb")

# PIT values are clamped away from {0, 1} before taking logs; estimated
# parameters can push extreme order statistics onto the boundary.
CLAMP_EPS = 1e-12

SMOOTH_MAX_ORDER = 10

# Family gates for the distribution-specific methods.
_FAMILY_ONLY = {"SW": "normal", "sNor": "normal", "sUnif": "uniform",
                "sExp": "exponential"}


def _as_rows(y):
    y = np.asarray(y, dtype=float)
    return (y.reshape(1, -1), True) if y.ndim == 1 else (y, False)


def _ret(v, squeeze):
    return float(v[0]) if squeeze else v


def _clamped(y):
    return np.clip(y, CLAMP_EPS, 1.0 - CLAMP_EPS)


def ks(y):
    """Kolmogorov-Smirnov: max of both one-sided EDF deviations."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    i = np.arange(1, n + 1)
    d = np.maximum(i / n - y, y - (i - 1) / n)
    return _ret(d.max(axis=1), sq)


def ad(y):
    """Anderson-Darling statistic on PIT values."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    yc = _clamped(y)
    w = 2.0 * np.arange(1, n + 1) - 1.0
    s = np.mean(w * (np.log(yc) + np.log(1.0 - yc[:, ::-1])), axis=1)
    return _ret(-n - s, sq)


def cdm(y):
    """Cramer-von Mises statistic."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    i = np.arange(1, n + 1)
    s = np.sum(((2.0 * i - 1.0) / (2.0 * n) - y) ** 2, axis=1)
    return _ret(1.0 / (12.0 * n) + s, sq)


def watson(y):
    """Watson's rotation-invariant variant of Cramer-von Mises."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    i = np.arange(1, n + 1)
    s = np.sum(((2.0 * i - 1.0) / (2.0 * n) - y) ** 2, axis=1)
    cm = 1.0 / (12.0 * n) + s
    return _ret(cm - n * (y.mean(axis=1) - 0.5) ** 2, sq)


def zk(y):
    """Zhang's supremum likelihood-ratio statistic."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    yc = _clamped(y)
    m = np.arange(1, n + 1) - 0.5
    t = m * np.log(m / (n * yc)) + (n - m) * np.log((n - m) / (n * (1.0 - yc)))
    return _ret(t.max(axis=1), sq)


def za(y):
    """Zhang's sum statistic with harmonic-style weights."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    yc = _clamped(y)
    m = np.arange(1, n + 1) - 0.5
    s = np.sum(np.log(yc) / (n - m) + np.log(1.0 - yc) / m, axis=1)
    return _ret(-s, sq)


def zc(y):
    """Zhang's squared-log-odds statistic (reference-code division form)."""
    y, sq = _as_rows(y)
    n = y.shape[1]
    yc = _clamped(y)
    i = np.arange(1, n + 1)
    denom = (n - 0.5) / (i - 0.75) - 1.0
    s = np.sum(np.log((1.0 / yc - 1.0) / denom) ** 2, axis=1)
    return _ret(s, sq)


def ppoints(n: int) -> np.ndarray:
    """Plotting positions (i - a) / (n + 1 - 2a); a = 3/8 for n <= 10, else 1/2."""
    a = 0.375 if n <= 10 else 0.5
    i = np.arange(1, n + 1)
    return (i - a) / (n + 1 - 2 * a)


def _pearson_rows(x, q):
    xc = x - x.mean(axis=1, keepdims=True)
    qc = q - q.mean(axis=1, keepdims=True)
    denom = np.sqrt((xc * xc).sum(axis=1) * (qc * qc).sum(axis=1))
    return (xc * qc).sum(axis=1) / denom


def ppcc(x, model: NullModel, params=None):
    """1 - correlation between sorted data and model quantiles at ppoints."""
    x, sq = _as_rows(x)
    n = x.shape[1]
    if n < 3:
        raise GofError("ppcc: need n >= 3")
    q = np.asarray(model.quantile(ppoints(n), params), dtype=float)
    if q.ndim == 1:
        q = np.broadcast_to(q, x.shape)
    return _ret(1.0 - _pearson_rows(x, q), sq)


def jb(x):
    """Jarque-Bera moment statistic (skewness and excess kurtosis)."""
    x, sq = _as_rows(x)
    n = x.shape[1]
    d = x - x.mean(axis=1, keepdims=True)
    m2 = np.mean(d ** 2, axis=1)
    if np.any(m2 <= 0):
        raise GofError("jb: zero-variance sample")
    s = np.mean(d ** 3, axis=1) / m2 ** 1.5
    k = np.mean(d ** 4, axis=1) / m2 ** 2
    return _ret(n / 6.0 * (s ** 2 + (k - 3.0) ** 2 / 4.0), sq)


def sw(x):
    """1 - W, the complemented Shapiro-Wilk statistic.

    Delegates to scipy's AS R94 implementation, the same approximation the
    usual R routine uses.  Meaningful for 3 <= n <= 5000; method selection
    gates on that range.
    """
    x, sq = _as_rows(x)
    out = np.empty(x.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(x.shape[0]):
            out[r] = 1.0 - _scipy_stats.shapiro(x[r]).statistic
    return _ret(out, sq)


def legendre_basis(u, max_order: int) -> np.ndarray:
    """Orthonormal Legendre polynomials on [0, 1], evaluated columnwise.

    Column j holds phi_j(u) = sqrt(2j+1) P_j(2u - 1), j = 0..max_order,
    which satisfy integral_0^1 phi_j phi_k du = delta_jk.
    """
    v = npleg.legvander(2.0 * np.asarray(u, dtype=float) - 1.0, max_order)
    return v * np.sqrt(2.0 * np.arange(max_order + 1) + 1.0)


def smooth(y, max_order: int = SMOOTH_MAX_ORDER):
    """Data-driven smooth statistic on PIT values.

    Components b_j = n^{-1/2} sum_i phi_j(y_i) are accumulated into partial
    sums T_k = sum_{j<=k} b_j^2; the reported statistic is T at the smallest
    k maximizing the Schwarz criterion T_k - k log n.  The null distribution
    is simulated downstream, so only the selection rule matters here.
    """
    y, sq = _as_rows(y)
    n = y.shape[1]
    basis = legendre_basis(y, max_order)
    b = basis[:, :, 1:].sum(axis=1) / np.sqrt(n)
    t = np.cumsum(b * b, axis=1)
    crit = t - np.arange(1, max_order + 1) * np.log(n)
    k_star = np.argmax(crit, axis=1)
    return _ret(t[np.arange(t.shape[0]), k_star], sq)


def available_methods(model: NullModel, n: int | None = None) -> tuple[str, ...]:
    """All methods applicable to this model (and sample size, if known)."""
    out = list(EDF_METHODS)
    if model.has_quantile:
        out += list(CHISQ_METHODS)
        out.append("ppcc")
    out.append("JB")
    if model.family == "normal" and (n is None or 3 <= n <= 5000):
        out.append("SW")
    for m, fam in _FAMILY_ONLY.items():
        if m != "SW" and model.family == fam:
            out.append(m)
    return tuple(m for m in METHOD_ORDER if m in out)


def resolve_methods(model: NullModel, methods, n: int | None = None) -> tuple[str, ...]:
    """Validate a requested method list against the model; None means all."""
    if methods is None:
        return available_methods(model, n)
    avail = set(available_methods(model, n))
    out = []
    for m in methods:
        if m not in METHOD_ORDER:
            raise GofError(f"unknown method {m!r}")
        if m not in avail:
            raise GofError(f"method {m} not applicable to a {model.family} null")
        out.append(m)
    if len(set(out)) != len(out):
        raise GofError("duplicate method in list")
    return tuple(m for m in METHOD_ORDER if m in out)


def compute_stat_vector(sample, model: NullModel, methods=None, nbins=None):
    """Full named statistic vector for one sample.

    ``sample`` is a 1-d array of raw observations or a ``Histogram``
    (un-binned first).  Parameters are re-fitted here when the model asks
    for estimation.  Returns a dict keyed by method name, in canonical
    order.
    """
    from .adjust import Histogram, spread_out

    if isinstance(sample, Histogram):
        sample = spread_out(sample, model)
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise GofError("empty sample")
    methods = resolve_methods(model, methods, n=x.size)
    stats = compute_stat_matrix(x.reshape(1, -1), model, methods, nbins=nbins)
    return {m: float(v) for m, v in zip(methods, stats[0])}


def compute_stat_matrix(x_rows, model: NullModel, methods, nbins=None):
    """Statistic matrix for a stack of row-wise *sorted* samples.

    Rows of ``x_rows`` are independent samples of common length n; the
    result is (n_rows, n_methods) in the order given by ``methods``.  This
    is the vectorized engine behind the bootstrap table.
    """
    from . import chisquare

    x = np.asarray(x_rows, dtype=float)
    n = x.shape[1]
    if model.estimate_params:
        params = model.estimate_rows(x) if x.shape[0] > 1 else model.estimate(x[0])
    else:
        params = model.params
    y = model.cdf(x, params)

    out = np.empty((x.shape[0], len(methods)))
    for j, m in enumerate(methods):
        if m == "KS":
            out[:, j] = ks(y)
        elif m == "AD":
            out[:, j] = ad(y)
        elif m == "CdM":
            out[:, j] = cdm(y)
        elif m == "W":
            out[:, j] = watson(y)
        elif m == "ZK":
            out[:, j] = zk(y)
        elif m == "ZA":
            out[:, j] = za(y)
        elif m == "ZC":
            out[:, j] = zc(y)
        elif m in CHISQ_METHODS:
            out[:, j] = chisquare.chisq_stat_rows(x, model, m, nbins=nbins,
                                                  params=params)
        elif m == "ppcc":
            out[:, j] = ppcc(x, model, params)
        elif m == "JB":
            out[:, j] = jb(x)
        elif m == "SW":
            out[:, j] = sw(x)
        elif m in ("sNor", "sUnif", "sExp"):
            out[:, j] = smooth(y)
        else:
            raise GofError(f"unknown method {m!r}")
    return out
