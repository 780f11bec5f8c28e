import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from rcbound.concentration import (
    BERRY_ESSEEN_C,
    DiscreteLaw,
    VectorLaw,
    exact_orthant_tail,
    exact_tail,
    scalar_tail_bound,
    tail_constant,
    vector_tail_bound,
)
from rcbound.errors import (
    EsseenConstantNonpositiveError,
    InvalidLawError,
    NotCenteredError,
    SingularCovarianceError,
    SupportExplosionError,
    ThresholdOutOfRangeError,
    ZeroVarianceError,
)


def test_atoms_merge_within_tolerance() -> None:
    law = DiscreteLaw([1.0, 0.0, 1e-13], [0.5, 0.25, 0.25])
    np.testing.assert_array_equal(law.atoms, [0.0, 1.0])
    np.testing.assert_allclose(law.probs, [0.5, 0.5])
    assert law.size == 2  # noqa: PLR2004


@pytest.mark.parametrize(
    ("atoms", "probs", "p_neg_inf"),
    [
        ([0.0, 1.0], [0.5, 0.4], 0.0),
        ([0.0, 1.0], [0.5, 0.5], 0.1),
        ([0.0, math.inf], [0.5, 0.5], 0.0),
        ([0.0, 1.0], [1.5, -0.5], 0.0),
        ([0.0], [0.5, 0.5], 0.0),
    ],
)
def test_invalid_laws(atoms: list, probs: list, p_neg_inf: float) -> None:
    with pytest.raises(InvalidLawError):
        DiscreteLaw(atoms, probs, p_neg_inf)


def test_moments_and_cgf() -> None:
    law = DiscreteLaw([-1.0, 2.0], [2 / 3, 1 / 3])
    assert law.mean == pytest.approx(0.0, abs=1e-15)
    assert law.variance == pytest.approx(2.0)
    assert law.third_absolute_moment() == pytest.approx(2 / 3 + 8 / 3)
    assert law.cgf(0.0) == 0.0
    lam = 0.3
    assert law.cgf(lam) == pytest.approx(math.log(2 / 3 * math.exp(-lam) + 1 / 3 * math.exp(2 * lam)))
    value, d1, d2 = law.cgf_derivatives(lam)
    h = 1e-5
    assert d1 == pytest.approx((law.cgf(lam + h) - law.cgf(lam - h)) / (2 * h), rel=1e-8)
    assert d2 == pytest.approx((law.cgf(lam + h) - 2 * value + law.cgf(lam - h)) / h**2, rel=1e-4)


def test_negative_infinity_mass() -> None:
    law = DiscreteLaw([0.0, 1.0], [0.25, 0.25], p_neg_inf=0.5)
    assert law.mean == -math.inf
    assert law.cgf(-1.0) == math.inf
    assert law.cgf(1.0) == pytest.approx(math.log(0.25 + 0.25 * math.e))
    # conditioning onto the finite atoms
    assert law.tilt(0.0).mean == pytest.approx(0.5)

    twice = law.convolve(law)
    assert twice.p_neg_inf == pytest.approx(0.75)
    assert twice.probs.sum() + twice.p_neg_inf == pytest.approx(1.0)
    assert exact_tail(law, 2, 0.5) == pytest.approx(3 / 16)


def test_exact_tail_of_a_fair_coin() -> None:
    coin = DiscreteLaw([0.0, 1.0], [0.5, 0.5])
    assert exact_tail(coin, 4, 0.5) == pytest.approx(11 / 16)
    assert exact_tail(coin, 4, 1.0) == pytest.approx(1 / 16)
    # ties within the tolerance count as exceedances
    assert exact_tail(coin, 4, 0.75 + 1e-11) == pytest.approx(5 / 16)


def test_convolution_cap() -> None:
    law = DiscreteLaw([0.0, 1.0, math.sqrt(2.0), math.pi], [0.25] * 4)
    with pytest.raises(SupportExplosionError):
        law.power(5, cap=100)


def test_tail_constant() -> None:
    m3, var, eta = 2.0, 1.5, 0.4
    expected = 2 * BERRY_ESSEEN_C * m3 / var**1.5 + 1 / (eta * math.sqrt(2 * math.pi * var))
    assert tail_constant(m3, var, eta) == pytest.approx(expected)
    assert tail_constant(m3, var, eta, berry_esseen_c=0.0) == pytest.approx(1 / (eta * math.sqrt(2 * math.pi * var)))


def test_scalar_tail_bound_tilt() -> None:
    law = DiscreteLaw([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2])
    q = 0.8
    bound = scalar_tail_bound(law, q)
    assert law.tilt(bound.eta).mean == pytest.approx(q, abs=1e-12)
    assert bound.rate == pytest.approx(q * bound.eta - law.cgf(bound.eta))
    assert bound.rate > 0
    assert bound.var == pytest.approx(law.tilt(bound.eta).variance)
    n = np.arange(1, 6)
    np.testing.assert_allclose(bound(n), np.exp(-n * bound.rate) / np.sqrt(n) * bound.constant)


def test_scalar_tail_bound_errors() -> None:
    law = DiscreteLaw([0.0, 1.0], [0.5, 0.5])
    with pytest.raises(ThresholdOutOfRangeError):
        scalar_tail_bound(law, 1.0)
    with pytest.raises(ThresholdOutOfRangeError):
        scalar_tail_bound(law, 0.4)
    with pytest.raises(ZeroVarianceError):
        scalar_tail_bound(DiscreteLaw.point_mass(1.0), 0.5)
    with pytest.raises(ZeroVarianceError):
        scalar_tail_bound(DiscreteLaw([1.0], [0.5], p_neg_inf=0.5), 0.5)


def _random_lattice_law(rng: np.random.Generator) -> DiscreteLaw:
    size = int(rng.integers(2, 6))
    atoms = rng.choice(np.arange(-3, 4), size=size, replace=False).astype(float)
    probs = rng.dirichlet(np.ones(size))
    p_neg_inf = 0.0
    if rng.random() < 0.25:  # noqa: PLR2004
        p_neg_inf = float(rng.uniform(0.05, 0.3))
        probs = probs * (1.0 - p_neg_inf)
    return DiscreteLaw(atoms, probs, p_neg_inf)


def test_scalar_tail_bound_dominates_exact_tail() -> None:
    rng = np.random.default_rng(2024)
    violations = []
    for case in range(200):
        law = _random_lattice_law(rng)
        lowest = law.tilt(0.0).mean
        q = lowest + rng.uniform(0.05, 0.95) * (law.max_atom - lowest)
        bound = scalar_tail_bound(law, q)
        partial = law
        for n in range(1, 51):
            if n > 1:
                partial = partial.convolve(law)
            exact = partial.tail(n * q)
            if exact > bound(n) * (1 + 1e-12):
                violations.append((case, n, exact, float(bound(n))))
    assert not violations


def test_vector_law_geometry() -> None:
    law = VectorLaw([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25] * 4)
    np.testing.assert_allclose(law.mean, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(law.covariance, 0.5 * np.eye(2))
    assert law.diameter == pytest.approx(2.0)
    np.testing.assert_allclose(law.marginal(0).atoms, [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(law.shift([1.0, 2.0]).mean, [1.0, 2.0])
    assert law.orthant_tail([0.0, 0.0]) == pytest.approx(0.5)


def test_vector_tail_bound() -> None:
    law = VectorLaw([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25] * 4)
    bound = vector_tail_bound(law, [0.5, 2.0], c=1.5)
    assert bound.lambda_min == pytest.approx(0.5)
    assert bound.k == pytest.approx(2.0)
    expected = 1.5 / (2 * 0.5 * 10) * (4.0 + 2 / 0.25 + 2 / 4.0)
    assert bound(10) == pytest.approx(expected)


def test_vector_tail_bound_errors() -> None:
    centered = VectorLaw([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25] * 4)
    with pytest.raises(EsseenConstantNonpositiveError):
        vector_tail_bound(centered, [1.0, 1.0], c=0.0)
    with pytest.raises(NotCenteredError):
        vector_tail_bound(centered.shift([0.1, 0.0]), [1.0, 1.0])
    collinear = VectorLaw([[1.0, 1.0], [-1.0, -1.0]], [0.5, 0.5])
    with pytest.raises(SingularCovarianceError):
        vector_tail_bound(collinear, [1.0, 1.0])
    with pytest.raises(ValueError):
        vector_tail_bound(centered, [1.0, -1.0])


def test_exact_orthant_tail() -> None:
    law = VectorLaw([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    # two steps land on (2,0), (1,1) or (0,2)
    assert exact_orthant_tail(law, 2, [0.5, 0.5]) == pytest.approx(0.5)
    assert exact_orthant_tail(law, 2, [0.0, 0.0]) == pytest.approx(1.0)
    assert exact_orthant_tail(law, 2, [1.0, 0.0]) == pytest.approx(0.25)


@pytest.mark.parametrize(
    "law",
    [
        DiscreteLaw([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2]),
        DiscreteLaw([-2.0, -1.0, 1.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.25, 0.15]),
        DiscreteLaw([0.0, 1.0, 3.0], [0.2, 0.3, 0.3], p_neg_inf=0.2),
    ],
)
def test_exact_tail_matches_enumeration(law: DiscreteLaw) -> None:
    atoms = [*law.atoms, -math.inf]
    probs = [*law.probs, law.p_neg_inf]
    q = 0.37
    for n in range(1, 5):
        enumerated = 0.0
        for outcome in itertools.product(range(len(atoms)), repeat=n):
            if sum(atoms[i] for i in outcome) >= n * q:
                enumerated += math.prod(probs[i] for i in outcome)
        assert exact_tail(law, n, q) == pytest.approx(enumerated, rel=1e-12, abs=1e-15)


def test_tail_rate_is_the_cramer_transform() -> None:
    rng = np.random.default_rng(31)
    for _ in range(20):
        law = _random_lattice_law(rng)
        lowest = law.tilt(0.0).mean
        q = lowest + rng.uniform(0.1, 0.9) * (law.max_atom - lowest)
        bound = scalar_tail_bound(law, q)
        lams = np.concatenate((np.linspace(0.0, 3.0 * bound.eta, 3001), np.linspace(0.99 * bound.eta, 1.01 * bound.eta, 20001)))
        cgf = logsumexp(np.outer(lams, law.atoms), b=law.probs, axis=1)
        supremum = float(np.max(q * lams - cgf))
        assert supremum <= bound.rate + 1e-12
        assert bound.rate == pytest.approx(supremum, abs=1e-9)


def test_tilted_moments_are_cgf_derivatives() -> None:
    rng = np.random.default_rng(37)
    for _ in range(20):
        law = _random_lattice_law(rng)
        lowest = law.tilt(0.0).mean
        q = lowest + rng.uniform(0.1, 0.9) * (law.max_atom - lowest)
        bound = scalar_tail_bound(law, q)
        weights = law.probs * np.exp(bound.eta * law.atoms)
        first = np.dot(weights, law.atoms) / weights.sum()
        second = np.dot(weights, law.atoms**2) / weights.sum() - first**2
        tilted = law.tilt(bound.eta)
        assert tilted.mean == pytest.approx(first, abs=1e-10)
        assert tilted.mean == pytest.approx(q, abs=1e-10)
        assert tilted.variance == pytest.approx(second, abs=1e-10)
        assert bound.var == pytest.approx(second, abs=1e-10)
