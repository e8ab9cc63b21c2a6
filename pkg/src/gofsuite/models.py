"""Distribution families for the null and alternative side of the tests.

A ``NullModel`` bundles everything the testing engine needs from the
hypothesized distribution: CDF, sampler, optional quantile function and
optional parameter estimator.  Models are plain frozen dataclasses that
dispatch to a module-level family registry, so they are cheap to copy,
safe to share across workers and picklable.

All sampling goes through an explicit ``numpy.random.Generator``; there is
no global RNG anywhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special


class GofError(Exception):
    """Base error for invalid configuration or degenerate inputs."""


class EstimationError(GofError):
    """Parameter estimation failed (degenerate or out-of-support data)."""


# --------------------------------------------------------------------------
# Family implementations.  Parameter arguments broadcast: scalar params give
# the usual scalar model, column vectors give one parameter set per row of a
# (B, n) data matrix.  That broadcasting is what the batch simulation path
# in ``adjust`` relies on.
# --------------------------------------------------------------------------


def _normal_cdf(x, mu, sigma):
    return special.ndtr((x - mu) / sigma)


def _normal_quantile(p, mu, sigma):
    return mu + sigma * special.ndtri(p)


def _normal_sample(shape, rng, mu, sigma):
    return rng.normal(mu, sigma, shape)


def _normal_estimate(x, axis=None):
    # MLE: mean and sd with 1/n variance.
    _reject_constant(x, axis, "normal")
    mu = np.mean(x, axis=axis)
    sigma = np.std(x, axis=axis)
    if np.any(sigma <= 0):
        raise EstimationError("normal: zero-variance data")
    return mu, sigma


def _uniform_cdf(x, a, b):
    return np.clip((x - a) / (b - a), 0.0, 1.0)


def _uniform_quantile(p, a, b):
    return a + (b - a) * np.asarray(p)


def _uniform_sample(shape, rng, a, b):
    return rng.uniform(a, b, shape)


def _exp_cdf(x, rate):
    return -np.expm1(-rate * np.maximum(x, 0.0))


def _exp_quantile(p, rate):
    return -np.log1p(-np.asarray(p)) / rate


def _exp_sample(shape, rng, rate):
    return rng.exponential(1.0 / rate, shape)


def _exp_estimate(x, axis=None):
    m = np.mean(x, axis=axis)
    if np.any(m <= 0):
        raise EstimationError("exponential: nonpositive sample mean")
    _reject_constant(x, axis, "exponential")
    return (1.0 / m,)


def _truncexp_cdf(x, rate, lo, hi):
    denom = np.exp(-rate * lo) - np.exp(-rate * hi)
    num = np.exp(-rate * lo) - np.exp(-rate * np.clip(x, lo, hi))
    return num / denom


def _truncexp_quantile(p, rate, lo, hi):
    elo = np.exp(-rate * lo)
    ehi = np.exp(-rate * hi)
    return -np.log(elo - np.asarray(p) * (elo - ehi)) / rate


def _truncexp_sample(shape, rng, rate, lo, hi):
    return _truncexp_quantile(rng.random(shape), rate, lo, hi)


def _truncexp_loglik(rate, sx, n, lo, hi):
    return n * math.log(rate) - rate * sx - n * math.log(
        math.exp(-rate * lo) - math.exp(-rate * hi)
    )


def _truncexp_estimate_one(x, lo, hi):
    n = len(x)
    sx = float(np.sum(x))
    res = optimize.minimize_scalar(
        lambda r: -_truncexp_loglik(r, sx, n, lo, hi),
        bounds=(1e-6, 1e3),
        method="bounded",
        options={"xatol": 1e-9},
    )
    return float(res.x)


def _beta_cdf(x, a, b):
    return special.betainc(a, b, np.clip(x, 0.0, 1.0))


def _beta_quantile(p, a, b):
    return special.betaincinv(a, b, p)


def _beta_sample(shape, rng, a, b):
    return rng.beta(a, b, shape)


def _beta1_estimate(x, axis=None):
    # Beta(1, b) MLE with the first shape fixed at 1:  b = -n / sum(log(1-x)).
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise EstimationError("beta: data outside (0, 1)")
    _reject_constant(x, axis, "beta")
    n = x.shape[-1] if axis is not None else x.size
    b = -n / np.sum(np.log1p(-x), axis=axis)
    a = np.ones_like(np.asarray(b, dtype=float))
    return a, b


def _gamma_cdf(x, shape_, rate):
    return special.gammainc(shape_, rate * np.maximum(x, 0.0))


def _gamma_quantile(p, shape_, rate):
    return special.gammaincinv(shape_, p) / rate


def _gamma_sample(shape, rng, shape_, rate):
    return rng.gamma(shape_, 1.0 / rate, shape)


def _erlang_estimate(x, axis=None):
    # Method of moments; shape rounded to the nearest positive integer and
    # the rate re-solved from the mean.
    _reject_constant(x, axis, "erlang")
    m = np.mean(x, axis=axis)
    v = np.var(x, axis=axis)
    if np.any(v <= 0) or np.any(m <= 0):
        raise EstimationError("erlang: degenerate data")
    shape_ = np.maximum(1.0, np.round(m * m / v))
    return shape_, shape_ / m


def _reject_constant(x, axis, name):
    if np.any(np.ptp(x, axis=axis) == 0):
        raise EstimationError(f"{name}: constant data")


@dataclass(frozen=True)
class _Family:
    name: str
    n_params: int
    cdf: Callable
    sample: Callable
    quantile: Optional[Callable] = None
    estimate: Optional[Callable] = None          # data -> full params tuple
    estimate_rows: Optional[Callable] = None     # (B, n) data -> per-row params
    n_free: int = 0                              # params fitted when estimating
    check: Optional[Callable] = None


def _check_normal(p):
    if p[1] <= 0:
        raise GofError("normal: sigma must be > 0")


def _check_uniform(p):
    if p[0] >= p[1]:
        raise GofError("uniform: need a < b")


def _check_rate(p):
    if p[0] <= 0:
        raise GofError("rate must be > 0")


def _check_truncexp(p):
    if p[0] <= 0 or p[1] < 0 or p[1] >= p[2]:
        raise GofError("truncexp: need rate > 0 and 0 <= L < R")


def _check_beta(p):
    if p[0] <= 0 or p[1] <= 0:
        raise GofError("beta: shapes must be > 0")


def _check_gamma(p):
    if p[0] <= 0 or p[1] <= 0:
        raise GofError("gamma: shape and rate must be > 0")


def _check_erlang(p):
    _check_gamma(p)
    if p[0] != int(p[0]):
        raise GofError("erlang: shape must be a positive integer")


def _normal_estimate_scalar(x):
    mu, sigma = _normal_estimate(np.asarray(x, dtype=float))
    return float(mu), float(sigma)


def _normal_estimate_rows(x):
    mu, sigma = _normal_estimate(x, axis=1)
    return mu, sigma


def _exp_estimate_scalar(x):
    (rate,) = _exp_estimate(np.asarray(x, dtype=float))
    return (float(rate),)


def _exp_estimate_rows(x):
    return _exp_estimate(x, axis=1)


def _beta_estimate_scalar(x):
    a, b = _beta1_estimate(np.asarray(x, dtype=float))
    return float(a), float(b)


def _beta_estimate_rows(x):
    return _beta1_estimate(x, axis=1)


def _erlang_estimate_scalar(x):
    s, r = _erlang_estimate(np.asarray(x, dtype=float))
    return float(s), float(r)


def _erlang_estimate_rows(x):
    return _erlang_estimate(x, axis=1)


def _truncexp_estimate_factory(lo, hi):
    def est(x):
        x = np.asarray(x, dtype=float)
        _reject_constant(x, None, "truncexp")
        return (_truncexp_estimate_one(x, lo, hi), lo, hi)

    return est


_FAMILIES: dict[str, _Family] = {
    "normal": _Family(
        "normal", 2, _normal_cdf, _normal_sample, _normal_quantile,
        _normal_estimate_scalar, _normal_estimate_rows, n_free=2,
        check=_check_normal,
    ),
    "uniform": _Family(
        "uniform", 2, _uniform_cdf, _uniform_sample, _uniform_quantile,
        check=_check_uniform,
    ),
    "exponential": _Family(
        "exponential", 1, _exp_cdf, _exp_sample, _exp_quantile,
        _exp_estimate_scalar, _exp_estimate_rows, n_free=1,
        check=_check_rate,
    ),
    "truncexp": _Family(
        "truncexp", 3, _truncexp_cdf, _truncexp_sample, _truncexp_quantile,
        n_free=1, check=_check_truncexp,
    ),
    "beta": _Family(
        "beta", 2, _beta_cdf, _beta_sample, _beta_quantile,
        _beta_estimate_scalar, _beta_estimate_rows, n_free=1,
        check=_check_beta,
    ),
    "gamma": _Family(
        "gamma", 2, _gamma_cdf, _gamma_sample, _gamma_quantile,
        check=_check_gamma,
    ),
    "erlang": _Family(
        "erlang", 2, _gamma_cdf, _gamma_sample, _gamma_quantile,
        _erlang_estimate_scalar, _erlang_estimate_rows, n_free=2,
        check=_check_erlang,
    ),
}


@dataclass(frozen=True)
class NullModel:
    """Hypothesized distribution: family id, parameter vector, estimation flag.

    ``params`` are the current parameters; when ``estimate_params`` is set,
    the engine re-fits them from every sample it touches (the original data
    and every bootstrap replicate) and uses the fitted values in the CDF.
    """

    family: str
    params: tuple[float, ...]
    estimate_params: bool = False

    def __post_init__(self):
        fam = _FAMILIES.get(self.family)
        if fam is None:
            raise GofError(f"unknown family {self.family!r}")
        if len(self.params) != fam.n_params:
            raise GofError(
                f"{self.family}: expected {fam.n_params} parameters, "
                f"got {len(self.params)}"
            )
        if fam.check is not None:
            fam.check(self.params)
        if self.estimate_params and not self._supports_estimation(fam):
            raise GofError(f"{self.family}: no estimator for these parameters")

    def _supports_estimation(self, fam):
        if self.family == "truncexp":
            return True
        if self.family == "beta":
            return fam.estimate is not None and self.params[0] == 1.0
        return fam.estimate is not None

    @property
    def _fam(self) -> _Family:
        return _FAMILIES[self.family]

    @property
    def has_quantile(self) -> bool:
        return self._fam.quantile is not None

    @property
    def n_estimated(self) -> int:
        """Number of parameters fitted from data (m in the k = 5 + m rule)."""
        return self._fam.n_free if self.estimate_params else 0

    def with_params(self, params) -> "NullModel":
        return replace(self, params=tuple(float(v) for v in params))

    def cdf(self, x, params=None):
        p = self.params if params is None else params
        return self._fam.cdf(np.asarray(x, dtype=float), *p)

    def quantile(self, q, params=None):
        if not self.has_quantile:
            raise GofError(f"{self.family}: no quantile function")
        p = self.params if params is None else params
        return self._fam.quantile(np.asarray(q, dtype=float), *p)

    def sample(self, n, rng, params=None):
        """Draw ``n`` observations; ``n`` may be a shape tuple such as (B, n)."""
        p = self.params if params is None else params
        return self._fam.sample(n, rng, *p)

    def estimate(self, data) -> tuple[float, ...]:
        """Fit parameters to ``data``; returns the full parameter tuple."""
        data = np.asarray(data, dtype=float)
        if data.size < 2:
            raise EstimationError("need at least 2 observations to estimate")
        if self.family == "truncexp":
            return _truncexp_estimate_factory(self.params[1], self.params[2])(data)
        est = self._fam.estimate
        if est is None:
            raise GofError(f"{self.family}: no estimator")
        return est(data)

    def estimate_rows(self, data):
        """Row-wise estimation for a (B, n) matrix; returns column arrays.

        Used by the batch simulation path.  Families without a vectorized
        estimator fall back to a per-row loop.
        """
        data = np.asarray(data, dtype=float)
        if data.shape[1] < 2:
            raise EstimationError("need at least 2 observations to estimate")
        est_rows = self._fam.estimate_rows
        if est_rows is not None:
            cols = est_rows(data)
            return tuple(np.asarray(c, dtype=float).reshape(-1, 1) for c in cols)
        out = np.array([self.estimate(row) for row in data], dtype=float)
        return tuple(out[:, j].reshape(-1, 1) for j in range(out.shape[1]))

    def describe(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "estimate": self.estimate_params,
        }


def make_null_model(family: str, params, estimate: bool = False) -> NullModel:
    """Factory over the supported null families.

    Families and parameter order: normal(mu, sigma), uniform(a, b),
    exponential(rate), truncexp(rate, L, R), beta(a, b), gamma(shape, rate),
    erlang(shape, rate).
    """
    return NullModel(family, tuple(float(v) for v in params), bool(estimate))


# --------------------------------------------------------------------------
# Alternatives for the power studies.
# --------------------------------------------------------------------------

# Default mixing weight of the bump component in the exponential-plus-bump
# alternative; overridable via a second parameter.
BUMP_WEIGHT = 0.1


def _check_alt(family, p):
    if family == "t":
        if len(p) != 1 or p[0] <= 0:
            raise GofError("t: need df > 0")
    elif family == "beta":
        _check_beta(p)
    elif family == "ncbeta":
        if len(p) != 3 or p[0] <= 0 or p[1] <= 0 or p[2] < 0:
            raise GofError("ncbeta: need a, b > 0 and ncp >= 0")
    elif family == "gamma":
        _check_gamma(p)
    elif family == "linear":
        if len(p) != 1 or abs(p[0]) > 1:
            raise GofError("linear: slope must satisfy |s| <= 1")
    elif family == "quadratic":
        if len(p) != 1 or not (-2.0 <= p[0] <= 4.0):
            raise GofError("quadratic: curvature must be in [-2, 4]")
    elif family == "expbump":
        if len(p) not in (1, 2) or p[0] <= 0:
            raise GofError("expbump: need sigma > 0")
        if len(p) == 2 and not (0.0 <= p[1] <= 1.0):
            raise GofError("expbump: bump weight must be in [0, 1]")
    elif family == "invpower":
        if len(p) != 1 or p[0] <= 0:
            raise GofError("invpower: need a > 0")
    elif family == "truncexp":
        _check_truncexp(p)
    else:
        raise GofError(f"unknown alternative family {family!r}")


@dataclass(frozen=True)
class AlternativeSpec:
    """True data-generating distribution for a power study.

    Families: t(df), beta(a, b), ncbeta(a, b, ncp), gamma(shape, rate),
    linear(s), quadratic(a), expbump(sigma[, weight]), invpower(a),
    truncexp(rate, L, R).
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        _check_alt(self.family, self.params)


def _linear_sample(n, rng, s):
    # F(x) = s x^2 + (1-s) x on [0, 1]; invert the quadratic directly.
    u = rng.random(n)
    if s == 0:
        return u
    disc = (1.0 - s) ** 2 + 4.0 * s * u
    return (np.sqrt(disc) - (1.0 - s)) / (2.0 * s)


def _quadratic_sample(n, rng, a):
    # Accept-reject under a flat envelope; the density is bounded by
    # max(1 + a/2, 1 - a/4) on [0, 1].
    bound = max(1.0 + a / 2.0, 1.0 - a / 4.0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 64)
        x = rng.random(2 * m)
        u = rng.random(2 * m)
        dens = 3.0 * a * (x - 0.5) ** 2 + 1.0 - a / 4.0
        acc = x[u * bound <= dens]
        take = min(len(acc), n - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def _expbump_sample(n, rng, sigma, weight):
    # Exponential(1) contaminated with a normal bump at 1.5 truncated to x > 0.
    out = rng.exponential(1.0, n)
    bump = rng.random(n) < weight
    k = int(bump.sum())
    if k:
        lo = special.ndtr(-1.5 / sigma)
        u = lo + (1.0 - lo) * rng.random(k)
        out[bump] = 1.5 + sigma * special.ndtri(u)
    return out


def sample_alternative(spec: AlternativeSpec, n: int, rng) -> np.ndarray:
    """Draw n iid observations from the alternative distribution."""
    fam, p = spec.family, spec.params
    if fam == "t":
        return rng.standard_t(p[0], n)
    if fam == "beta":
        return rng.beta(p[0], p[1], n)
    if fam == "ncbeta":
        # X/(X+Y) with X ~ noncentral chi2(2a, ncp), Y ~ chi2(2b).
        x = rng.noncentral_chisquare(2.0 * p[0], p[2], n)
        y = rng.chisquare(2.0 * p[1], n)
        return x / (x + y)
    if fam == "gamma":
        return rng.gamma(p[0], 1.0 / p[1], n)
    if fam == "linear":
        return _linear_sample(n, rng, p[0])
    if fam == "quadratic":
        return _quadratic_sample(n, rng, p[0])
    if fam == "expbump":
        weight = p[1] if len(p) == 2 else BUMP_WEIGHT
        return _expbump_sample(n, rng, p[0], weight)
    if fam == "invpower":
        # Normalized density a / (1+x)^(a+1) on x > 0.
        return (1.0 - rng.random(n)) ** (-1.0 / p[0]) - 1.0
    if fam == "truncexp":
        return _truncexp_sample(n, rng, *p)
    raise GofError(f"unknown alternative family {fam!r}")
