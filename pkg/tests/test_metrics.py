import numpy as np
import pytest

from ttreg import metrics as mt


@pytest.fixture
def random_pair():
    rng = np.random.default_rng(0)
    y = rng.normal(size=40)
    y_hat = y + 0.3 * rng.normal(size=40)
    return y, y_hat


def test_mse_examples(random_pair):
    y, y_hat = random_pair
    assert mt.mse(y, y) == 0.0
    assert mt.mse([0.0, 0.0], [1.0, 1.0]) == 1.0
    loop = sum((a - b) ** 2 for a, b in zip(y, y_hat)) / len(y)
    assert mt.mse(y, y_hat) == pytest.approx(loop)
    with pytest.raises(ValueError):
        mt.mse([], [])


def test_explained_variance_examples(random_pair):
    y, _ = random_pair
    assert mt.explained_variance(y, y) == pytest.approx(1.0)
    assert mt.explained_variance(y, y + 5.0) == pytest.approx(1.0)
    assert mt.explained_variance(y, np.full_like(y, y.mean())) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        mt.explained_variance(np.ones(5), np.arange(5.0))


def test_spcc_examples(random_pair):
    y, y_hat = random_pair
    assert mt.spcc(y, 2.0 * y + 3.0) == pytest.approx(1.0)
    assert mt.spcc(y, -y) == pytest.approx(-1.0)
    cov = np.cov(y, y_hat, ddof=1)
    want = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])
    assert mt.spcc(y, y_hat) == pytest.approx(want)


def test_r_squared_examples(random_pair):
    y, _ = random_pair
    assert mt.r_squared(y, y) == pytest.approx(1.0)
    assert mt.r_squared(y, np.full_like(y, y.mean())) == pytest.approx(0.0)
    # a biased predictor separates the two metrics
    biased = y + 1.0
    assert mt.r_squared(y, biased) < 1.0
    assert mt.explained_variance(y, biased) == pytest.approx(1.0)


def test_fit_line_examples(random_pair):
    y, y_hat = random_pair
    assert mt.fit_line(y, y) == pytest.approx((1.0, 0.0))
    m, b = mt.fit_line(y, np.full_like(y, 4.2))
    assert (m, b) == pytest.approx((0.0, 4.2))
    m, b = mt.fit_line(y, y_hat)
    slope, intercept = np.polyfit(y, y_hat, 1)
    assert (m, b) == pytest.approx((slope, intercept))


def test_explained_variance_equals_r_squared_when_unbiased(random_pair):
    y, y_hat = random_pair
    unbiased = y_hat - (y_hat - y).mean()
    assert mt.explained_variance(y, unbiased) == pytest.approx(
        mt.r_squared(y, unbiased), abs=1e-10
    )


def test_spcc_squared_is_r_squared_of_best_affine_fit(random_pair):
    y, y_hat = random_pair
    slope, intercept = np.polyfit(y_hat, y, 1)
    rescaled = slope * y_hat + intercept
    assert mt.spcc(y, y_hat) ** 2 == pytest.approx(mt.r_squared(y, rescaled), abs=1e-10)


def test_metrics_permutation_invariance(random_pair):
    y, y_hat = random_pair
    perm = np.random.default_rng(1).permutation(len(y))
    rep = mt.compute_report(y, y_hat)
    rep_p = mt.compute_report(y[perm], y_hat[perm])
    for key, val in rep.as_dict().items():
        assert rep_p.as_dict()[key] == pytest.approx(val, abs=1e-12), key
