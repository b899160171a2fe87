import numpy as np
import pytest
from scipy import integrate

from copulagree import (
    DegenerateDataError,
    dt_cdf,
    empirical_cdf,
    initial_params,
    make_family,
    max_binary_correlation,
    median_unbiased_quantile,
)
from copulagree.marginals import (
    Beta,
    Categorical,
    Gamma,
    Gaussian,
    Kumaraswamy,
    Laplace,
    StudentT,
    winsor_eps,
)

from conftest import nominal_matrix


def test_cdf_basic_values():
    assert Categorical([0.5, 0.5]).cdf(1) == pytest.approx(0.5)
    assert Gaussian(0.0, 1.0).cdf(0.0) == pytest.approx(0.5)
    assert Categorical([0.25] * 4).cdf(3) == pytest.approx(0.75)
    assert Categorical([0.3, 0.7]).cdf(0) == 0.0


def test_dt_cdf_midpoints():
    assert dt_cdf(Categorical([0.5, 0.5]), 1) == pytest.approx(0.25)
    assert dt_cdf(Categorical([0.5, 0.5]), 2) == pytest.approx(0.75)
    assert dt_cdf(Categorical([0.2, 0.3, 0.5]), 2) == pytest.approx(0.35)


def test_dt_cdf_rejects_continuous_families():
    with pytest.raises(TypeError):
        dt_cdf(Gaussian(0.0, 1.0), 1)


def test_initial_params_gamma_moment_formula():
    psi0 = initial_params([1.0, 2.0, 3.0], "gamma")
    assert psi0 == pytest.approx([4.0, 2.0])


def test_initial_params_kumaraswamy_is_unit():
    assert initial_params([0.1, 0.5, 0.9], "kumaraswamy") == pytest.approx([1.0, 1.0])


def test_initial_params_beta_moment_formula():
    # ybar = 0.4, s2 = 0.04, f = 0.4*0.6/0.04 - 1 = 5 -> (2, 3)
    psi0 = initial_params([0.2, 0.4, 0.6], "beta")
    assert psi0 == pytest.approx([2.0, 3.0])


def test_initial_params_location_scale_families():
    y = np.array([1.0, 3.0, 5.0, 11.0])
    for fam in ("gaussian", "laplace"):
        psi0 = initial_params(y, fam)
        assert psi0 == pytest.approx([y.mean(), y.std(ddof=1)])
    nu0, mu0 = initial_params(y, "t")
    assert mu0 == pytest.approx(np.median(y))
    assert nu0 == pytest.approx(1.4826 * np.median(np.abs(y - np.median(y))))


def test_initial_params_categorical_empirical_probabilities():
    sm = nominal_matrix()
    # all 41 observed scores, including the later-dropped single-score row
    all41 = np.concatenate([sm.scores_flat(), [3.0]])
    p41 = initial_params(all41, "categorical", 5)
    assert p41 == pytest.approx(np.array([9, 13, 11, 5, 3]) / 41.0)
    assert np.round(p41, 2) == pytest.approx([0.22, 0.32, 0.27, 0.12, 0.07])
    # on retained rows only (the values the fit actually starts from); the
    # drop of the single-score row moves each cell by at most 0.02
    p40 = initial_params(sm.scores_flat(), "categorical", 5)
    assert p40 == pytest.approx([0.225, 0.325, 0.25, 0.125, 0.075])
    assert np.max(np.abs(p40 - p41)) <= 0.02


def test_initial_params_degenerate_variance():
    with pytest.raises(DegenerateDataError):
        initial_params([2.0, 2.0, 2.0], "gamma")
    with pytest.raises(DegenerateDataError):
        initial_params([0.4, 0.4], "beta")


def test_empirical_cdf_plain_clamps():
    fam = empirical_cdf([1.0, 2.0, 3.0, 4.0])
    assert fam.cdf(2.0) == pytest.approx(0.5)
    assert fam.cdf(0.0) == pytest.approx(1.0 / 5.0)
    fam2 = empirical_cdf([1.0, 2.0])
    assert fam2.cdf(2.0) == pytest.approx(2.0 / 3.0)


def test_empirical_cdf_winsorized_clamps():
    fam = empirical_cdf(np.arange(1.0, 11.0), variant="winsorized", eps=0.05)
    assert fam.cdf(10.0) == pytest.approx(0.95)
    assert fam.cdf(0.0) == pytest.approx(0.05)
    assert fam.cdf(5.0) == pytest.approx(0.5)


def test_winsor_eps_default_in_range():
    for n in (2, 10, 100, 10_000):
        assert 0.0 < winsor_eps(n) < 0.5


def test_median_unbiased_quantile_type8():
    assert median_unbiased_quantile([1.0, 2.0, 3.0, 4.0], 0.5) == pytest.approx(2.5)
    assert median_unbiased_quantile([7.0], 0.3) == pytest.approx(7.0)
    assert median_unbiased_quantile([0.0, 10.0], 0.5) == pytest.approx(5.0)


def test_max_binary_correlation():
    assert max_binary_correlation(0.5, 0.5) == pytest.approx(1.0)
    assert max_binary_correlation(0.2, 0.2) == pytest.approx(1.0)
    assert max_binary_correlation(0.2, 0.8) == pytest.approx(0.25)
    assert max_binary_correlation(0.8, 0.2) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        max_binary_correlation(0.0, 0.5)


def _random_families(rng):
    return [
        Gaussian(rng.normal(), 0.2 + rng.random()),
        Laplace(rng.normal(), 0.2 + rng.random()),
        StudentT(2.0 + 5.0 * rng.random(), rng.normal()),
        Gamma(0.5 + 2.0 * rng.random(), 0.5 + rng.random()),
        Beta(0.5 + 2.0 * rng.random(), 0.5 + 2.0 * rng.random()),
        Kumaraswamy(0.5 + 2.0 * rng.random(), 0.5 + 2.0 * rng.random()),
    ]


def _support_grid(fam):
    if fam.tag in ("beta", "kumaraswamy"):
        return np.linspace(1e-4, 1 - 1e-4, 41)
    if fam.tag == "gamma":
        return np.linspace(1e-4, 30.0, 41)
    return np.linspace(-20.0, 20.0, 41)


def test_cdf_monotone_with_unit_range():
    rng = np.random.default_rng(11)
    for fam in _random_families(rng):
        grid = _support_grid(fam)
        values = np.asarray(fam.cdf(grid))
        assert (np.diff(values) >= -1e-14).all()
        assert values.min() >= 0.0 and values.max() <= 1.0
    cat = Categorical([0.2, 0.3, 0.5])
    values = cat.cdf(np.arange(0, 5))
    assert (np.diff(values) >= 0).all()
    assert values[0] == 0.0 and values[-1] == 1.0


def test_quantile_inverts_cdf_for_continuous_families():
    rng = np.random.default_rng(3)
    for fam in _random_families(rng):
        grid = np.asarray(fam.quantile(np.linspace(0.02, 0.98, 33)))
        back = np.asarray(fam.quantile(fam.cdf(grid)))
        assert np.max(np.abs(back - grid)) < 1e-10


def test_dt_cdf_between_adjacent_cdf_values():
    p = np.array([0.1, 0.4, 0.2, 0.3])
    fam = Categorical(p)
    for y in range(1, 5):
        lo, hi = fam.cdf(y - 1), fam.cdf(y)
        mid = dt_cdf(fam, y)
        assert lo < mid < hi


def test_density_integrates_to_one():
    rng = np.random.default_rng(29)
    for _ in range(5):
        for fam in _random_families(rng):
            if fam.tag in ("beta", "kumaraswamy"):
                lo, hi = 0.0, 1.0
            elif fam.tag == "gamma":
                lo, hi = 0.0, np.inf
            else:
                lo, hi = -np.inf, np.inf
            total, _err = integrate.quad(
                lambda y: np.exp(fam.logpdf(y)), lo, hi, limit=200
            )
            assert total == pytest.approx(1.0, abs=1e-6)


def test_categorical_quantile_inverts_cdf():
    fam = Categorical([0.2, 0.3, 0.5])
    assert fam.quantile(0.1) == 1
    assert fam.quantile(0.2) == 1
    assert fam.quantile(0.21) == 2
    assert fam.quantile(0.9999) == 3
    assert fam.quantile(1.0) == 3


def test_make_family_feasibility():
    assert make_family("categorical", [0.3, 0.3]) is not None
    assert make_family("categorical", [0.6, 0.4]) is None  # derived p3 below floor
    assert make_family("gaussian", [0.0, -1.0]) is None
    assert make_family("t", [np.nan, 0.0]) is None
    fam = make_family("gamma", [2.0, 0.5])
    assert fam.cdf(1.0) == pytest.approx(
        integrate.quad(lambda y: np.exp(fam.logpdf(y)), 0, 1.0)[0], abs=1e-9
    )


def test_empirical_quantile_is_median_unbiased():
    sample = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    fam = empirical_cdf(sample)
    u = np.array([0.1, 0.5, 0.9])
    assert np.asarray(fam.quantile(u)) == pytest.approx(
        median_unbiased_quantile(sample, u)
    )
