"""Log-objectives for copula agreement models: ML, DT, CML, and the
two-stage semiparametric form, plus the numerical derivatives they need.

All objectives are pure functions of a packed parameter vector
theta = (omega, psi) and return -inf (never raise) when theta leaves the
positive-definite region or makes a marginal infeasible, so optimizers can
penalize and recover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from . import marginals
from .errors import NumericalError
from .structure import (
    OMEGA_MAX,
    AgreementStructure,
    block_logdet_quadform,
    pair_list,
)

# Probit arguments are clamped before inversion: DT midpoints can hit 0/1
# when a categorical cell collapses during optimization.
_PROBIT_CLIP = 1e-12

_CBRT_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _probit(p):
    return ndtri(np.clip(p, _PROBIT_CLIP, 1.0 - _PROBIT_CLIP))


def _bvnu_small_r(h, k, r):
    # P(X>h, Y>k) for |r| < 0.925 via Gauss-Legendre on the Drezner identity.
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = np.arcsin(r)
    sn = np.sin(0.5 * asr[:, None] * (1.0 + _GL_X[None, :]))
    integrand = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
    bvn = (integrand @ _GL_W) * asr / (4.0 * np.pi)
    return bvn + ndtr(-h) * ndtr(-k)


def _bvnu_large_r(h, k, r):
    # |r| >= 0.925 tail expansion (Genz), vectorized.
    twopi = 2.0 * np.pi
    k = np.where(r < 0.0, -k, k)
    hk = h * k
    asq = (1.0 - r) * (1.0 + r)
    a = np.sqrt(asq)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr = -(bs / asq + hk) / 2.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        bvn = np.where(
            asr > -100.0,
            a * np.exp(asr) * (1.0 - c * (bs - asq) * (1.0 - d * bs / 5.0) / 3.0
                               + c * d * asq * asq / 5.0),
            0.0,
        )
        sp = np.sqrt(twopi) * ndtr(-np.sqrt(bs) / a)
        bvn = np.where(
            hk > -100.0,
            bvn - np.exp(-hk / 2.0) * sp * np.sqrt(bs)
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
            bvn,
        )
        a2 = a / 2.0
        xs = (a2[:, None] * (1.0 + _GL_X[None, :])) ** 2
        rs = np.sqrt(1.0 - xs)
        asr1 = -(bs[:, None] / xs + hk[:, None]) / 2.0
        sp1 = 1.0 + c[:, None] * xs * (1.0 + d[:, None] * xs)
        ep = np.exp(-hk[:, None] * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
        terms = np.where(asr1 > -100.0, np.exp(asr1) * (ep - sp1), 0.0)
        bvn = bvn + a2 * (terms @ _GL_W)
    bvn = -bvn / twopi
    bvn = np.where(
        r > 0.0,
        bvn + ndtr(-np.maximum(h, k)),
        -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k)),
    )
    return np.clip(bvn, 0.0, 1.0)


def bivariate_normal_cdf(z1, z2, rho):
    """Standard bivariate normal P(Z1 <= z1, Z2 <= z2) with correlation rho.

    Vectorized; +-inf arguments are allowed; |rho| must be < 1.  Absolute
    accuracy is well below 1e-7 (Gauss-Legendre / tail expansion).
    """
    z1, z2, rho = np.broadcast_arrays(
        np.asarray(z1, dtype=float), np.asarray(z2, dtype=float), np.asarray(rho, dtype=float)
    )
    scalar = z1.ndim == 0
    z1, z2, rho = np.atleast_1d(z1), np.atleast_1d(z2), np.atleast_1d(rho)
    if (np.abs(rho) >= 1.0).any():
        raise ValueError("correlation must lie in (-1, 1)")

    # orientation: P(X > h, Y > k) with h = -z1, k = -z2
    h, k = -z1, -z2
    out = np.empty(h.shape, dtype=float)
    neg_inf = (h == np.inf) | (k == np.inf)      # some z at -inf
    h_inf = np.isneginf(h) & ~neg_inf            # z1 at +inf
    k_inf = np.isneginf(k) & ~neg_inf
    out[neg_inf] = 0.0
    out[h_inf & k_inf] = 1.0
    only_h = h_inf & ~k_inf
    only_k = k_inf & ~h_inf
    out[only_h] = ndtr(-k[only_h])
    out[only_k] = ndtr(-h[only_k])

    core = ~(neg_inf | h_inf | k_inf)
    if core.any():
        hc, kc, rc = h[core], k[core], rho[core]
        res = np.empty(hc.shape, dtype=float)
        small = np.abs(rc) < 0.925
        if small.any():
            res[small] = _bvnu_small_r(hc[small], kc[small], rc[small])
        if (~small).any():
            res[~small] = _bvnu_large_r(hc[~small], kc[~small], rc[~small])
        out[core] = res
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(z1.shape)


@dataclass(eq=False)
class CopulaModel:
    """Packing of an agreement model: structure, marginal family, flat scores.

    For the semiparametric kind the ``y`` slot holds the standardized scores
    z-hat instead of raw data and the family tag is ``empirical`` (no free
    marginal parameters).
    """

    structure: AgreementStructure
    family: str
    y: np.ndarray
    n_categories: int | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (self.structure.n,):
            raise ValueError(
                f"expected {self.structure.n} flat scores, got {self.y.shape}"
            )

    @property
    def n_omega(self) -> int:
        return self.structure.n_params

    @property
    def psi_dim(self) -> int:
        return marginals.psi_dim(self.family, self.n_categories)

    @property
    def theta_dim(self) -> int:
        return self.n_omega + self.psi_dim

    def bounds(self) -> list[tuple[float | None, float | None]]:
        return [(0.0, OMEGA_MAX)] * self.n_omega + marginals.psi_bounds(
            self.family, self.n_categories
        )

    def unpack(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        return theta[: self.n_omega], theta[self.n_omega:]

    def family_of(self, theta):
        """Marginal instance at theta, or None when psi is infeasible."""
        _, psi = self.unpack(theta)
        return marginals.make_family(self.family, psi, self.n_categories)

    def initial_theta(self) -> np.ndarray:
        omega0 = np.full(self.n_omega, 0.5)
        if self.family == "empirical":
            return omega0
        psi0 = marginals.initial_params(self.y, self.family, self.n_categories)
        if self.family == "categorical":
            psi0 = psi0[:-1]
        return np.concatenate([omega0, psi0])

    def param_names(self) -> tuple[str, ...]:
        """Reported names: agreement parameters, then the full marginal vector."""
        if self.family == "empirical":
            return self.structure.param_names
        return self.structure.param_names + marginals.family_param_names(
            self.family, self.n_categories
        )

    def expand(self, theta) -> np.ndarray:
        """Reported estimates; appends the derived p_K for categorical."""
        theta = np.asarray(theta, dtype=float)
        if self.family == "categorical":
            _, psi = self.unpack(theta)
            return np.concatenate([theta, [1.0 - psi.sum()]])
        return theta.copy()

    def expand_matrix(self) -> np.ndarray:
        """Jacobian of the reported vector in the packed theta (delta method)."""
        a = np.eye(self.theta_dim)
        if self.family == "categorical":
            row = np.zeros(self.theta_dim)
            row[self.n_omega:] = -1.0
            a = np.vstack([a, row])
        return a

    def face_constraint(self) -> tuple[int, float] | None:
        """Linear feasibility face of the derived p_K, for the optimizer."""
        if self.family == "categorical":
            return self.n_omega, 1.0 - marginals.DELTA_P
        return None


@dataclass(eq=False)
class Objective:
    """A log-objective of packed theta; kind in {ml, dt, cml, smp}."""

    kind: str
    model: CopulaModel
    _pairs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        fam = self.model.family
        if self.kind == "ml" and fam not in marginals.CONTINUOUS_FAMILIES:
            raise ValueError("ml objective requires a continuous marginal family")
        if self.kind in ("dt", "cml") and fam != "categorical":
            raise ValueError(f"{self.kind} objective requires a categorical marginal")
        if self.kind == "smp" and fam != "empirical":
            raise ValueError("smp objective requires empirically standardized scores")
        if self.kind not in ("ml", "dt", "cml", "smp"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == "cml":
            self._pairs = pair_list(self.model.structure)

    def __call__(self, theta) -> float:
        if self.kind == "ml":
            return loglik_ml(theta, self.model)
        if self.kind == "dt":
            return loglik_dt(theta, self.model)
        if self.kind == "cml":
            return loglik_cml(theta, self.model, self._pairs)
        omega, _ = self.model.unpack(theta)
        return loglik_smp(omega, self.model.structure, self.model.y)


def _gaussian_core(structure, omega, z) -> float:
    """-log|Omega|/2 - z'(Omega^{-1} - I)z/2, or -inf off the PD region."""
    ld = block_logdet_quadform(structure, omega, z)
    if ld is None:
        return -np.inf
    logdet, quad = ld
    return -0.5 * logdet - 0.5 * (quad - math.fsum(z * z))


def loglik_ml(theta, model: CopulaModel) -> float:
    """Exact log-likelihood for a continuous marginal."""
    omega, _ = model.unpack(theta)
    fam = model.family_of(theta)
    if fam is None:
        return -np.inf
    logf = math.fsum(np.atleast_1d(fam.logpdf(model.y)))
    if not np.isfinite(logf):
        return -np.inf
    z = _probit(fam.cdf(model.y))
    core = _gaussian_core(model.structure, omega, z)
    return core + logf


def loglik_dt(theta, model: CopulaModel) -> float:
    """Distributional-transform approximation: probits of jump midpoints."""
    omega, _ = model.unpack(theta)
    fam = model.family_of(theta)
    if fam is None:
        return -np.inf
    logf = math.fsum(np.atleast_1d(fam.logpdf(model.y)))
    if not np.isfinite(logf):
        return -np.inf
    z = _probit(fam.dt_cdf(model.y))
    core = _gaussian_core(model.structure, omega, z)
    return core + logf


def loglik_cml(theta, model: CopulaModel, pairs: np.ndarray | None = None) -> float:
    """Pairwise composite log-likelihood over all nonzero-correlation pairs."""
    omega, _ = model.unpack(theta)
    fam = model.family_of(theta)
    if fam is None:
        return -np.inf
    if pairs is None:
        pairs = pair_list(model.structure)
    if not np.isfinite(omega).all() or (np.abs(omega) >= 1.0).any():
        return -np.inf
    z0 = _probit(fam.cdf(model.y))
    z1 = _probit(fam.cdf(model.y - 1))
    i, j, k = pairs[:, 0], pairs[:, 1], pairs[:, 2]
    rho = omega[k]
    rect = (
        bivariate_normal_cdf(z0[i], z0[j], rho)
        - bivariate_normal_cdf(z0[i], z1[j], rho)
        - bivariate_normal_cdf(z1[i], z0[j], rho)
        + bivariate_normal_cdf(z1[i], z1[j], rho)
    )
    if (rect <= 0.0).any():
        return -np.inf
    return math.fsum(np.log(rect))


def loglik_smp(omega, structure: AgreementStructure, zhat) -> float:
    """Copula-only objective for pre-standardized scores (no -I correction)."""
    zhat = np.asarray(zhat, dtype=float)
    ld = block_logdet_quadform(structure, omega, zhat)
    if ld is None:
        return -np.inf
    logdet, quad = ld
    return -0.5 * logdet - 0.5 * quad


def fd_step(theta) -> np.ndarray:
    return _CBRT_EPS * np.maximum(1.0, np.abs(np.asarray(theta, dtype=float)))


def gradient(fn, theta) -> np.ndarray:
    """Central finite-difference gradient with step cbrt(eps) * max(1, |theta_j|)."""
    theta = np.asarray(theta, dtype=float)
    h = fd_step(theta)
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h[j]
        fp, fm = fn(theta + e), fn(theta - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(
                f"objective not finite within the gradient stencil at coordinate {j}"
            )
        g[j] = (fp - fm) / (2.0 * h[j])
    return g


def hessian(fn, theta) -> np.ndarray:
    """Central finite-difference Hessian (same step rule as the gradient)."""
    theta = np.asarray(theta, dtype=float)
    q = theta.size
    h = fd_step(theta)
    f0 = fn(theta)
    if not np.isfinite(f0):
        raise NumericalError("objective not finite at the expansion point")
    hess = np.empty((q, q))
    for i in range(q):
        ei = np.zeros(q)
        ei[i] = h[i]
        fpp, fmm = fn(theta + ei), fn(theta - ei)
        if not (np.isfinite(fpp) and np.isfinite(fmm)):
            raise NumericalError(
                f"objective not finite within the Hessian stencil at coordinate {i}"
            )
        hess[i, i] = (fpp - 2.0 * f0 + fmm) / (h[i] * h[i])
        for j in range(i + 1, q):
            ej = np.zeros(q)
            ej[j] = h[j]
            vals = [fn(theta + ei + ej), fn(theta + ei - ej),
                    fn(theta - ei + ej), fn(theta - ei - ej)]
            if not np.all(np.isfinite(vals)):
                raise NumericalError(
                    f"objective not finite within the Hessian stencil at ({i}, {j})"
                )
            hess[i, j] = hess[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (
                4.0 * h[i] * h[j]
            )
    return hess


def model_with_scores(model: CopulaModel, y: np.ndarray) -> CopulaModel:
    """Same structure/family, new flat scores (used by simulation-based refits)."""
    return replace(model, y=np.asarray(y, dtype=float))
