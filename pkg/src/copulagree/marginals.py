"""Marginal distribution families: cdf, density/mass, quantile, starting values.

Supported families (selected by tag): ``categorical``, ``gaussian``,
``laplace``, ``t``, ``gamma``, ``beta``, ``kumaraswamy``, ``empirical``.
The Student t is the two-parameter location form (df ``nu``, location ``mu``,
unit scale); the gamma uses a rate parameter ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateDataError

# Probability floor for categorical cells during optimization.
DELTA_P = 1e-4
# Lower bound for strictly positive shape/scale parameters.
POS_MIN = 1e-6

CONTINUOUS_FAMILIES = ("gaussian", "laplace", "t", "gamma", "beta", "kumaraswamy")
DISCRETE_FAMILIES = ("categorical",)
FAMILIES = DISCRETE_FAMILIES + CONTINUOUS_FAMILIES + ("empirical",)


@dataclass(frozen=True)
class Categorical:
    """Categorical distribution on {1,...,K} with P(Y=k) = p[k-1]."""

    p: np.ndarray
    tag = "categorical"
    discrete = True

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "_cum", np.concatenate(([0.0], np.cumsum(self.p))))

    @property
    def k(self) -> int:
        return len(self.p)

    def cdf(self, y):
        idx = np.clip(np.floor(np.asarray(y, dtype=float)).astype(int), 0, self.k)
        return self._cum[idx]

    def dt_cdf(self, y):
        """Midpoint {F(y-1) + F(y)}/2 of the jump at y."""
        return 0.5 * (self.cdf(np.asarray(y) - 1) + self.cdf(y))

    def logpdf(self, y):
        idx = np.asarray(y, dtype=float).astype(int) - 1
        with np.errstate(divide="ignore"):
            return np.log(self.p[idx])

    def quantile(self, u):
        k = np.searchsorted(self._cum[1:], np.asarray(u, dtype=float), side="left") + 1
        return np.clip(k, 1, self.k).astype(float)


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float
    tag = "gaussian"
    discrete = False

    def cdf(self, y):
        return stats.norm.cdf(y, loc=self.mu, scale=self.sigma)

    def logpdf(self, y):
        return stats.norm.logpdf(y, loc=self.mu, scale=self.sigma)

    def quantile(self, u):
        return stats.norm.ppf(u, loc=self.mu, scale=self.sigma)


@dataclass(frozen=True)
class Laplace:
    mu: float
    sigma: float
    tag = "laplace"
    discrete = False

    def cdf(self, y):
        return stats.laplace.cdf(y, loc=self.mu, scale=self.sigma)

    def logpdf(self, y):
        return stats.laplace.logpdf(y, loc=self.mu, scale=self.sigma)

    def quantile(self, u):
        return stats.laplace.ppf(u, loc=self.mu, scale=self.sigma)


@dataclass(frozen=True)
class StudentT:
    nu: float
    mu: float
    tag = "t"
    discrete = False

    def cdf(self, y):
        return stats.t.cdf(y, df=self.nu, loc=self.mu)

    def logpdf(self, y):
        return stats.t.logpdf(y, df=self.nu, loc=self.mu)

    def quantile(self, u):
        return stats.t.ppf(u, df=self.nu, loc=self.mu)


@dataclass(frozen=True)
class Gamma:
    alpha: float
    beta: float  # rate

    tag = "gamma"
    discrete = False

    def cdf(self, y):
        return stats.gamma.cdf(y, a=self.alpha, scale=1.0 / self.beta)

    def logpdf(self, y):
        return stats.gamma.logpdf(y, a=self.alpha, scale=1.0 / self.beta)

    def quantile(self, u):
        return stats.gamma.ppf(u, a=self.alpha, scale=1.0 / self.beta)


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float
    tag = "beta"
    discrete = False

    def cdf(self, y):
        return stats.beta.cdf(y, a=self.alpha, b=self.beta)

    def logpdf(self, y):
        return stats.beta.logpdf(y, a=self.alpha, b=self.beta)

    def quantile(self, u):
        return stats.beta.ppf(u, a=self.alpha, b=self.beta)


@dataclass(frozen=True)
class Kumaraswamy:
    a: float
    b: float
    tag = "kumaraswamy"
    discrete = False

    def cdf(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
        return 1.0 - (1.0 - y**self.a) ** self.b

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                np.log(self.a)
                + np.log(self.b)
                + (self.a - 1.0) * np.log(y)
                + (self.b - 1.0) * np.log1p(-(y**self.a))
            )
        return np.where((y > 0.0) & (y < 1.0), out, -np.inf)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return (1.0 - (1.0 - u) ** (1.0 / self.b)) ** (1.0 / self.a)


@dataclass(frozen=True)
class Empirical:
    """ECDF-backed family; ``plain`` clamps into [1/(n+1), n/(n+1)], ``winsorized``
    into [eps, 1-eps] so the probit transform stays finite."""

    sample: np.ndarray
    variant: str = "plain"
    eps: float = 0.0
    tag = "empirical"
    discrete = False

    def __post_init__(self):
        object.__setattr__(self, "sample", np.sort(np.asarray(self.sample, dtype=float)))
        if self.variant not in ("plain", "winsorized"):
            raise ValueError(f"unknown empirical variant {self.variant!r}")
        if self.variant == "winsorized" and not 0.0 < self.eps < 0.5:
            raise ValueError("winsorized truncation must lie in (0, 1/2)")

    @property
    def n(self) -> int:
        return len(self.sample)

    def cdf(self, y):
        f = np.searchsorted(self.sample, np.asarray(y, dtype=float), side="right") / self.n
        if self.variant == "plain":
            return np.clip(f, 1.0 / (self.n + 1), self.n / (self.n + 1.0))
        return np.clip(f, self.eps, 1.0 - self.eps)

    def logpdf(self, y):
        raise TypeError("empirical families have no density")

    def quantile(self, u):
        return median_unbiased_quantile(self.sample, u)


def winsor_eps(n: int) -> float:
    """Default ECDF truncation 1/(4 n^(1/4) sqrt(pi log n))."""
    if n < 2:
        return 0.25
    return 1.0 / (4.0 * n**0.25 * np.sqrt(np.pi * np.log(n)))


def empirical_cdf(sample, variant: str = "plain", eps: float | None = None) -> Empirical:
    """Build the plain or Winsorized ECDF family from a sample."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise ValueError("sample must be nonempty")
    if variant == "winsorized" and eps is None:
        eps = winsor_eps(sample.size)
    return Empirical(sample, variant, 0.0 if eps is None else eps)


def median_unbiased_quantile(sample, prob):
    """Median-unbiased (Hyndman-Fan type 8) sample quantile."""
    return np.quantile(np.asarray(sample, dtype=float), prob, method="median_unbiased")


def max_binary_correlation(p1: float, p2: float) -> float:
    """Upper bound on the correlation of two binary variables with means p1, p2."""
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0):
        raise ValueError("success probabilities must lie in (0, 1)")
    r = np.sqrt(p1 * (1.0 - p2) / (p2 * (1.0 - p1)))
    return float(min(r, 1.0 / r))


_PSI_NAMES = {
    "gaussian": ("mu", "sigma"),
    "laplace": ("mu", "sigma"),
    "t": ("nu", "mu"),
    "gamma": ("alpha", "beta"),
    "beta": ("alpha", "beta"),
    "kumaraswamy": ("a", "b"),
}


def family_param_names(family: str, n_categories: int | None = None) -> tuple[str, ...]:
    """Reported parameter names (full probability vector for categorical)."""
    if family == "categorical":
        if n_categories is None:
            raise ValueError("categorical needs n_categories")
        return tuple(f"p{k}" for k in range(1, n_categories + 1))
    if family == "empirical":
        return ()
    return _PSI_NAMES[family]


def psi_dim(family: str, n_categories: int | None = None) -> int:
    """Number of free marginal parameters (K-1 for categorical, p_K derived)."""
    if family == "categorical":
        return n_categories - 1
    if family == "empirical":
        return 0
    return 2


def psi_bounds(family: str, n_categories: int | None = None) -> list[tuple[float | None, float | None]]:
    if family == "categorical":
        return [(DELTA_P, 1.0 - DELTA_P)] * (n_categories - 1)
    if family == "empirical":
        return []
    names = _PSI_NAMES[family]
    return [(None, None) if nm == "mu" else (POS_MIN, None) for nm in names]


def make_family(family: str, psi, n_categories: int | None = None):
    """Instantiate a family from its free parameters; None if psi is infeasible.

    Infeasibility (derived p_K below the probability floor, non-positive
    shape/scale) is an in-band result so objectives can map it to -inf.
    """
    psi = np.asarray(psi, dtype=float)
    if not np.isfinite(psi).all():
        return None
    if family == "categorical":
        p = np.append(psi, 1.0 - psi.sum())
        if (p < DELTA_P).any() or (p > 1.0 - DELTA_P).any():
            return None
        return Categorical(p)
    if family == "gaussian":
        return Gaussian(psi[0], psi[1]) if psi[1] > 0 else None
    if family == "laplace":
        return Laplace(psi[0], psi[1]) if psi[1] > 0 else None
    if family == "t":
        return StudentT(psi[0], psi[1]) if psi[0] > 0 else None
    if family == "gamma":
        return Gamma(psi[0], psi[1]) if min(psi) > 0 else None
    if family == "beta":
        return Beta(psi[0], psi[1]) if min(psi) > 0 else None
    if family == "kumaraswamy":
        return Kumaraswamy(psi[0], psi[1]) if min(psi) > 0 else None
    raise ValueError(f"unknown family {family!r}")


def initial_params(data, family: str, n_categories: int | None = None) -> np.ndarray:
    """Data-driven starting values.

    Gaussian/Laplace use (mean, sd); the t uses (mad, median) for (nu, mu);
    gamma and beta use moment formulas; Kumaraswamy starts at (1, 1); a
    categorical family starts at the empirical probabilities (full vector).
    """
    y = np.asarray(data, dtype=float)
    if y.size < 2:
        raise ValueError("need at least 2 observed values for starting values")

    if family == "categorical":
        yi = y.astype(int)
        k = n_categories if n_categories is not None else int(yi.max())
        p = np.bincount(yi, minlength=k + 1)[1:].astype(float) / yi.size
        # floor at 2*DELTA_P so renormalization cannot push an unobserved
        # category below the optimizer's probability floor
        p = np.clip(p, 2.0 * DELTA_P, 1.0 - DELTA_P)
        return p / p.sum()
    if family in ("gaussian", "laplace"):
        return np.array([y.mean(), max(y.std(ddof=1), POS_MIN)])
    if family == "t":
        med = np.median(y)
        mad = 1.4826 * np.median(np.abs(y - med))
        return np.array([max(mad, POS_MIN), med])
    if family == "gamma":
        s2 = y.var(ddof=1)
        if s2 <= 0.0:
            raise DegenerateDataError("zero sample variance: gamma starting values undefined")
        ybar = y.mean()
        return np.array([max(ybar**2 / s2, POS_MIN), max(ybar / s2, POS_MIN)])
    if family == "beta":
        s2 = y.var(ddof=1)
        if s2 <= 0.0:
            raise DegenerateDataError("zero sample variance: beta starting values undefined")
        ybar = y.mean()
        f = ybar * (1.0 - ybar) / s2 - 1.0
        return np.array([max(ybar * f, POS_MIN), max((1.0 - ybar) * f, POS_MIN)])
    if family == "kumaraswamy":
        return np.array([1.0, 1.0])
    if family == "empirical":
        return np.array([])
    raise ValueError(f"unknown family {family!r}")


def dt_cdf(family, y):
    """Distributional-transform cdf {F(y-1) + F(y)}/2 for integer-support families."""
    if not getattr(family, "discrete", False):
        raise TypeError("dt_cdf applies to discrete families only")
    return family.dt_cdf(y)
