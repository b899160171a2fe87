"""Influence statistics, model-based simulation, information criteria,
model probabilities, and the Krippendorff's-alpha baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import marginals
from .errors import ConfigError, DataError
from .fit import (
    _TAG_ALPHA,
    FitResult,
    Objective,
    optimize_objective,
    parallel_map,
    replicate_rng,
    resolve_seed,
    simulate_flat,
)
from .objectives import CopulaModel, _probit
from .scores import ScoreMatrix, embed_original, prepare
from .structure import build_structure


def simulate_scores(fit: FitResult, seed=None) -> ScoreMatrix:
    """Simulate one dataset from a fitted model, preserving the missingness
    pattern of the retained data (drawn blockwise through the copula)."""
    rng = np.random.default_rng(seed)
    omega, _ = fit.model.unpack(fit.theta)
    flat = simulate_flat(fit.model.structure, omega, fit.family_obj, rng)
    return fit.data.with_scores_flat(flat)


def aic_bic(loglik: float, q: int, n: int) -> tuple[float, float]:
    """AIC = 2q - 2l, BIC = q log(n) - 2l with n the observed-score count."""
    return 2.0 * q - 2.0 * loglik, q * np.log(n) - 2.0 * loglik


def information_criteria(fit: FitResult) -> tuple[float, float]:
    """AIC and BIC of a maximum-likelihood fit.

    Refused for DT/CML/SMP fits: their objectives are not proper likelihoods,
    so the criteria are undefined.
    """
    if fit.method != "ml":
        raise ConfigError(
            f"information criteria require a proper likelihood; the {fit.method} "
            "objective is misspecified"
        )
    return aic_bic(fit.objective, len(fit.theta), fit.n_scores)


def model_probability(criteria) -> float:
    """Relative likelihood exp((min - max)/2) of the worst model in a set of
    information-criterion values."""
    criteria = np.asarray(criteria, dtype=float)
    if criteria.size < 2:
        raise ValueError("need at least two criterion values to compare")
    return float(np.exp((criteria.min() - criteria.max()) / 2.0))


@dataclass(eq=False)
class InfluenceReport:
    """DFBETA rows theta_full - theta_without_entity over the reported parameters."""

    param_names: tuple[str, ...]
    unit_indices: tuple[int, ...]
    dfbeta_units: np.ndarray
    coder_indices: tuple[int, ...]
    dfbeta_coders: np.ndarray
    failed_units: tuple[int, ...] = ()
    failed_coders: tuple[int, ...] = ()


def _refit_without(fit: FitResult, drop_unit: int | None = None,
                   drop_coder: int | None = None) -> np.ndarray:
    values, observed = embed_original(fit.data)
    grid = np.where(observed, values, np.nan)
    labels = list(fit.data.labels)
    if drop_unit is not None:
        keep = [r for r in range(grid.shape[0]) if r != drop_unit - 1]
        grid = grid[keep]
    if drop_coder is not None:
        cols = [
            j for j, lab in enumerate(labels)
            if not (lab.kind == "coder" and lab.coder == drop_coder)
        ]
        if not cols:
            raise DataError(f"dropping coder {drop_coder} removes every column")
        grid = grid[:, cols]
        labels = [labels[j] for j in cols]
    data = prepare(grid, labels, fit.data.level, fit.data.n_categories)
    structure = build_structure(data.labels, data.observed)
    if fit.method == "smp":
        y = data.scores_flat()
        fam = marginals.empirical_cdf(y, fit.smp_variant or "plain", fit.smp_eps)
        model = CopulaModel(structure, "empirical", _probit(fam.cdf(y)))
    else:
        model = CopulaModel(structure, fit.family, data.scores_flat(), data.n_categories)
    opt = optimize_objective(
        Objective(fit.method, model), model.initial_theta(),
        model.bounds(), model.face_constraint(),
    )
    if not opt.converged:
        raise DataError("refit did not converge")
    return model.expand(opt.theta)


def influence(fit: FitResult, units=(), coders=()) -> InfluenceReport:
    """Refit the model without each requested unit (1-based original row
    number) or coder (coder index), reporting DFBETA = theta_full - theta_drop.

    A failed refit flags its entity and leaves NaN in its row; the other
    entities are still returned.
    """
    base = fit.estimates
    names = fit.param_names
    du = np.full((len(units), len(names)), np.nan)
    failed_units = []
    for i, u in enumerate(units):
        try:
            du[i] = base - _refit_without(fit, drop_unit=int(u))
        except (DataError, ValueError):
            failed_units.append(int(u))
    dc = np.full((len(coders), len(names)), np.nan)
    failed_coders = []
    for i, c in enumerate(coders):
        try:
            dc[i] = base - _refit_without(fit, drop_coder=int(c))
        except (DataError, ValueError):
            failed_coders.append(int(c))
    return InfluenceReport(
        names, tuple(int(u) for u in units), du,
        tuple(int(c) for c in coders), dc,
        tuple(failed_units), tuple(failed_coders),
    )


def _alpha_value(unit_values: list[np.ndarray]) -> float:
    """Krippendorff's alpha with the discrete metric from per-unit score lists.

    Observed disagreement averages ordered within-unit pairs weighted by
    1/(m_u - 1); expected disagreement uses the with-replacement margins
    (sampling pairs from the pooled values), the convention that reproduces
    the reference results for this baseline.
    """
    n_total = sum(len(v) for v in unit_values)
    if n_total == 0:
        return 1.0
    do_sum = 0.0
    counts: dict[float, int] = {}
    for vals in unit_values:
        m = len(vals)
        if m >= 2:
            _, cnt = np.unique(vals, return_counts=True)
            disagree = m * (m - 1) - np.sum(cnt * (cnt - 1))
            do_sum += disagree / (m - 1)
        for v in vals:
            counts[v] = counts.get(v, 0) + 1
    d_o = do_sum / n_total
    nk = np.array(list(counts.values()), dtype=float)
    d_e = (n_total**2 - np.sum(nk**2)) / float(n_total**2)
    if d_e <= 0.0:
        return 1.0
    return 1.0 - d_o / d_e


@dataclass(eq=False)
class AlphaResult:
    alpha: float
    n_boot: int
    draws: np.ndarray
    gaussian: tuple[float, float]
    quantile: tuple[float, float]
    mcse: float


def _alpha_worker(payload, j):
    unit_values, seed = payload
    rng = replicate_rng(seed, _TAG_ALPHA, j)
    pick = rng.integers(0, len(unit_values), size=len(unit_values))
    return _alpha_value([unit_values[i] for i in pick])


def krippendorff_alpha(data: ScoreMatrix, n_b: int = 1000, seed=None,
                       threads: int = 1, conf_level: float = 0.95) -> AlphaResult:
    """Krippendorff's alpha under the discrete metric d(x, y) = 1{x != y},
    with a nonparametric bootstrap over units for the confidence interval."""
    if data.level != "nominal":
        raise ConfigError("the discrete-metric alpha baseline applies to nominal data")
    if data.n_units < 2:
        raise DataError("alpha is undefined for fewer than two units")
    seed = resolve_seed(seed)
    unit_values = [data.values[i][data.observed[i]] for i in range(data.n_units)]
    alpha = _alpha_value(unit_values)
    draws = np.asarray(parallel_map(_alpha_worker, (unit_values, seed), n_b, threads))
    from scipy.stats import norm

    z = norm.ppf(0.5 + conf_level / 2.0)
    sd = draws.std(ddof=1)
    lo_q, hi_q = marginals.median_unbiased_quantile(
        draws, [0.5 - conf_level / 2.0, 0.5 + conf_level / 2.0]
    )
    return AlphaResult(
        alpha=float(alpha),
        n_boot=n_b,
        draws=draws,
        gaussian=(float(alpha - z * sd), float(alpha + z * sd)),
        quantile=(float(lo_q), float(hi_q)),
        mcse=float(sd / np.sqrt(n_b)),
    )
