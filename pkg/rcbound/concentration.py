"""Finite-support laws, exact convolution tails and the tilted Berry-Esseen / Esseen tail bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import pdist
from scipy.special import logsumexp, softmax

from rcbound.errors import (
    EsseenConstantNonpositiveError,
    InvalidLawError,
    NotCenteredError,
    SingularCovarianceError,
    SupportExplosionError,
    ThresholdOutOfRangeError,
    ZeroVarianceError,
)

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

_log = logging.getLogger(__name__)

MERGE_TOLERANCE = 1e-12
# sums within this distance below a threshold count as reaching it
TIE_TOLERANCE = 1e-9
SUM_TOLERANCE = 1e-12
DEFAULT_SUPPORT_CAP = 10**7
BERRY_ESSEEN_C = 0.5
# placeholder: the Esseen constant of the 2D concentration inequality is not known numerically
ESSEEN_C = 1.0
CENTERING_TOLERANCE = 1e-10


def _snap(values: NDArray) -> tuple[NDArray, NDArray]:
    """Groups values whose sorted neighbours are within the merge tolerance.

    Returns:
        The group index of every value and the representative (smallest) value of every group.
    """
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    starts = np.concatenate(([True], np.diff(ordered) > MERGE_TOLERANCE))
    groups = np.cumsum(starts) - 1
    ids = np.empty_like(groups)
    ids[order] = groups
    return ids, ordered[starts]


def _check_cap(size: int, cap: int) -> None:
    if size > cap:
        msg = f"Convolution would produce {size} atoms, above the configured cap of {cap}."
        raise SupportExplosionError(msg)


class DiscreteLaw:
    """A finite-support law on the extended reals, with an optional atom at -infinity.

    Atoms are merged within an absolute tolerance of 1e-12 and kept sorted.

    Args:
        atoms: Finite atom positions.
        probs: Probabilities of the atoms.
        p_neg_inf: Probability of the -infinity atom. Defaults to 0.
    """

    def __init__(self, atoms: ArrayLike, probs: ArrayLike, p_neg_inf: float = 0.0):
        atoms = np.asarray(atoms, dtype=np.float64).ravel()
        probs = np.asarray(probs, dtype=np.float64).ravel()
        if atoms.shape != probs.shape:
            msg = f"Got {atoms.size} atoms but {probs.size} probabilities."
            raise InvalidLawError(msg)
        if not np.all(np.isfinite(atoms)):
            msg = "Atoms must be finite; put -infinity mass in p_neg_inf."
            raise InvalidLawError(msg)
        if np.any(probs < 0) or p_neg_inf < 0:
            msg = "Probabilities must be nonnegative."
            raise InvalidLawError(msg)
        total = probs.sum() + p_neg_inf
        if abs(total - 1.0) > SUM_TOLERANCE:
            msg = f"Probabilities sum to {total}, not 1."
            raise InvalidLawError(msg)
        self._set(atoms, probs, float(p_neg_inf))

    @classmethod
    def _unchecked(cls, atoms: NDArray, probs: NDArray, p_neg_inf: float) -> DiscreteLaw:
        law = cls.__new__(cls)
        law._set(atoms, probs, p_neg_inf)  # noqa: SLF001
        return law

    @classmethod
    def point_mass(cls, atom: float) -> DiscreteLaw:
        return cls([atom], [1.0])

    def _set(self, atoms: NDArray, probs: NDArray, p_neg_inf: float) -> None:
        keep = probs > 0
        atoms, probs = atoms[keep], probs[keep]
        if atoms.size:
            ids, atoms = _snap(atoms)
            probs = np.bincount(ids, weights=probs, minlength=atoms.size)
        self._atoms = atoms
        self._probs = probs
        self._p_neg_inf = p_neg_inf

    @property
    def atoms(self) -> NDArray:
        return self._atoms

    @property
    def probs(self) -> NDArray:
        return self._probs

    @property
    def p_neg_inf(self) -> float:
        return self._p_neg_inf

    @property
    def size(self) -> int:
        return self._atoms.size

    @property
    def max_atom(self) -> float:
        return float(self._atoms[-1]) if self.size else -math.inf

    @property
    def mean(self) -> float:
        if self._p_neg_inf > 0 or self.size == 0:
            return -math.inf
        return float(np.dot(self._probs, self._atoms))

    @property
    def variance(self) -> float:
        if self._p_neg_inf > 0:
            return math.inf
        return float(np.dot(self._probs, (self._atoms - self.mean) ** 2))

    def third_absolute_moment(self) -> float:
        """E|Z - E Z|^3 of a law without -infinity mass."""
        return float(np.dot(self._probs, np.abs(self._atoms - self.mean) ** 3))

    def cgf(self, lam: float) -> float:
        """Lambda(lam) = log E exp(lam Z); -infinity atoms contribute nothing for lam > 0."""
        if lam == 0:
            return 0.0
        if lam < 0 and self._p_neg_inf > 0:
            return math.inf
        return float(logsumexp(lam * self._atoms, b=self._probs))

    def tilt(self, lam: float) -> DiscreteLaw:
        """The exponentially tilted law with density exp(lam z - Lambda(lam)).

        At lam = 0 a law with -infinity mass is conditioned onto its finite atoms, the limit lam -> 0+.
        """
        weights = softmax(np.log(self._probs) + lam * self._atoms)
        return DiscreteLaw._unchecked(self._atoms.copy(), weights, 0.0)

    def cgf_derivatives(self, lam: float) -> tuple[float, float, float]:
        """Returns Lambda, Lambda' and Lambda'' at lam."""
        tilted = self.tilt(lam)
        return self.cgf(lam), tilted.mean, tilted.variance

    def tail(self, threshold: float) -> float:
        """Pr{Z >= threshold}, sums within the tie tolerance below the threshold included."""
        return float(self._probs[self._atoms >= threshold - TIE_TOLERANCE].sum())

    def convolve(self, other: DiscreteLaw, cap: int = DEFAULT_SUPPORT_CAP) -> DiscreteLaw:
        """Law of the sum of independent draws; -infinity is absorbing."""
        _check_cap(self.size * other.size, cap)
        atoms = np.add.outer(self._atoms, other.atoms).ravel()
        probs = np.multiply.outer(self._probs, other.probs).ravel()
        p_neg_inf = self._p_neg_inf + other.p_neg_inf - self._p_neg_inf * other.p_neg_inf
        return DiscreteLaw._unchecked(atoms, probs, p_neg_inf)

    def power(self, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> DiscreteLaw:
        """Law of the sum of n independent copies, built by successive convolution."""
        if n < 1:
            msg = f"Cannot take a convolution power of order {n}."
            raise ValueError(msg)
        result = self
        for _ in range(n - 1):
            result = result.convolve(self, cap)
        return result

    def is_close(self, other: DiscreteLaw) -> bool:
        return (
            self.size == other.size
            and bool(np.allclose(self._atoms, other.atoms, rtol=0.0, atol=MERGE_TOLERANCE))
            and bool(np.allclose(self._probs, other.probs, rtol=0.0, atol=SUM_TOLERANCE))
            and abs(self._p_neg_inf - other.p_neg_inf) <= SUM_TOLERANCE
        )

    def __repr__(self) -> str:
        return f"DiscreteLaw({self.size} atoms, p_neg_inf={self._p_neg_inf:.3g})"


class VectorLaw:
    """A finite-support law on R^2, atoms merged coordinate-wise within 1e-12."""

    def __init__(self, atoms: ArrayLike, probs: ArrayLike):
        atoms = np.asarray(atoms, dtype=np.float64).reshape(-1, 2)
        probs = np.asarray(probs, dtype=np.float64).ravel()
        if atoms.shape[0] != probs.size:
            msg = f"Got {atoms.shape[0]} atoms but {probs.size} probabilities."
            raise InvalidLawError(msg)
        if not np.all(np.isfinite(atoms)):
            msg = "Atoms of a vector law must be finite."
            raise InvalidLawError(msg)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > SUM_TOLERANCE:
            msg = f"Probabilities must be nonnegative and sum to 1, got sum {probs.sum()}."
            raise InvalidLawError(msg)
        self._set(atoms, probs)

    @classmethod
    def _unchecked(cls, atoms: NDArray, probs: NDArray) -> VectorLaw:
        law = cls.__new__(cls)
        law._set(atoms, probs)  # noqa: SLF001
        return law

    def _set(self, atoms: NDArray, probs: NDArray) -> None:
        keep = probs > 0
        atoms, probs = atoms[keep], probs[keep]
        snapped = np.empty_like(atoms)
        for j in range(2):
            ids, reps = _snap(atoms[:, j])
            snapped[:, j] = reps[ids]
        unique, inverse = np.unique(snapped, axis=0, return_inverse=True)
        self._atoms = unique
        self._probs = np.bincount(inverse.ravel(), weights=probs, minlength=unique.shape[0])

    @property
    def atoms(self) -> NDArray:
        return self._atoms

    @property
    def probs(self) -> NDArray:
        return self._probs

    @property
    def size(self) -> int:
        return self._atoms.shape[0]

    @property
    def mean(self) -> NDArray:
        return self._probs @ self._atoms

    @property
    def covariance(self) -> NDArray:
        centered = self._atoms - self.mean
        return (centered * self._probs[:, None]).T @ centered

    @property
    def diameter(self) -> float:
        """Largest Euclidean distance between two atoms, a support bound of the symmetrized law."""
        if self.size < 2:  # noqa: PLR2004
            return 0.0
        return float(pdist(self._atoms).max())

    def cgf(self, v: ArrayLike) -> float:
        return float(logsumexp(self._atoms @ np.asarray(v, dtype=np.float64), b=self._probs))

    def tilt(self, v: ArrayLike) -> VectorLaw:
        weights = softmax(np.log(self._probs) + self._atoms @ np.asarray(v, dtype=np.float64))
        return VectorLaw._unchecked(self._atoms.copy(), weights)

    def gradient(self, v: ArrayLike) -> NDArray:
        return self.tilt(v).mean

    def shift(self, offset: ArrayLike) -> VectorLaw:
        return VectorLaw._unchecked(self._atoms + np.asarray(offset, dtype=np.float64), self._probs.copy())

    def marginal(self, coordinate: int) -> DiscreteLaw:
        return DiscreteLaw._unchecked(self._atoms[:, coordinate].copy(), self._probs.copy(), 0.0)

    def orthant_tail(self, b: ArrayLike) -> float:
        """Pr{Z_1 >= b_1, Z_2 >= b_2} with the tie tolerance on both coordinates."""
        b = np.asarray(b, dtype=np.float64)
        inside = np.all(self._atoms >= b - TIE_TOLERANCE, axis=1)
        return float(self._probs[inside].sum())

    def convolve(self, other: VectorLaw, cap: int = DEFAULT_SUPPORT_CAP) -> VectorLaw:
        _check_cap(self.size * other.size, cap)
        atoms = (self._atoms[:, None, :] + other.atoms[None, :, :]).reshape(-1, 2)
        probs = np.multiply.outer(self._probs, other.probs).ravel()
        return VectorLaw._unchecked(atoms, probs)

    def power(self, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> VectorLaw:
        if n < 1:
            msg = f"Cannot take a convolution power of order {n}."
            raise ValueError(msg)
        result = self
        for _ in range(n - 1):
            result = result.convolve(self, cap)
        return result

    def __repr__(self) -> str:
        return f"VectorLaw({self.size} atoms)"


def tail_constant(m3: float, var: float, eta: float, berry_esseen_c: float = BERRY_ESSEEN_C) -> float:
    """Brace constant of the tilted Berry-Esseen tail bound.

    Twice the Berry-Esseen term plus the Gaussian density term, 2c m3/var^1.5 + 1/(eta sqrt(2 pi var)).
    """
    return 2.0 * berry_esseen_c * m3 / var**1.5 + 1.0 / (eta * math.sqrt(2.0 * math.pi * var))


@dataclass(frozen=True, kw_only=True)
class ScalarTailBound:
    """Tilted Berry-Esseen bound on Pr{(1/N) sum Z_i >= q}.

    Attributes:
        eta: Tilt solving Lambda'(eta) = q.
        rate: Cramer transform Lambda*(q) = q eta - Lambda(eta).
        m3: Third absolute central moment under the tilted law.
        var: Lambda''(eta).
        berry_esseen_c: Berry-Esseen constant.
    """

    eta: float
    rate: float
    m3: float
    var: float
    berry_esseen_c: float = BERRY_ESSEEN_C

    def __post_init__(self):
        if self.eta <= 0 or self.var <= 0:
            msg = "A scalar tail bound needs a positive tilt and a positive variance."
            raise ValueError(msg)

    @property
    def constant(self) -> float:
        return tail_constant(self.m3, self.var, self.eta, self.berry_esseen_c)

    def bound(self, n: int | NDArray) -> float | NDArray:
        n = np.asarray(n, dtype=np.float64)
        return np.exp(-n * self.rate) / np.sqrt(n) * self.constant

    __call__ = bound


def scalar_tail_bound(law: DiscreteLaw, q: float, berry_esseen_c: float = BERRY_ESSEEN_C) -> ScalarTailBound:
    """Bounds the tail of the empirical mean of i.i.d. draws of `law` at threshold `q`.

    Args:
        law: The common law of the summands, possibly with mass at -infinity.
        q: The threshold, strictly between the (finite-part) mean and the largest atom.
        berry_esseen_c: The Berry-Esseen constant. Defaults to 1/2.

    Raises:
        ZeroVarianceError: The law has fewer than two finite atoms.
        ThresholdOutOfRangeError: No positive tilt puts the tilted mean at `q`.
    """
    if law.size < 2:  # noqa: PLR2004
        msg = "The law has a degenerate finite part, its variance is zero."
        raise ZeroVarianceError(msg)
    # the tilted mean increases from the finite-part mean (lam -> 0+) to the largest atom
    lowest = law.tilt(0.0).mean
    if not lowest < q < law.max_atom:
        msg = f"Threshold {q} must lie strictly between the mean {law.mean} (finite part {lowest}) and the largest atom {law.max_atom}."
        raise ThresholdOutOfRangeError(msg)

    def excess(lam: float) -> float:
        return law.tilt(lam).mean - q

    upper = 1.0
    while excess(upper) < 0:
        upper *= 2.0
    eta = brentq(excess, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=1000)
    tilted = law.tilt(eta)
    var = tilted.variance
    if var <= 0:
        msg = f"The tilted law at eta={eta} has zero variance."
        raise ZeroVarianceError(msg)

    _log.debug(f"Scalar tail bound at q={q}: eta={eta}, residual {excess(eta):.3g}.")
    return ScalarTailBound(
        eta=float(eta),
        rate=float(q * eta - law.cgf(eta)),
        m3=tilted.third_absolute_moment(),
        var=var,
        berry_esseen_c=berry_esseen_c,
    )


def exact_tail(law: DiscreteLaw, n: int, q: float, cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Exact Pr{(1/n) sum Z_i >= q} by n-fold convolution; any -infinity summand is a non-exceedance."""
    return law.power(n, cap).tail(n * q)


@dataclass(frozen=True, kw_only=True)
class VectorTailBound:
    """O(1/N) factor of the orthant bound from Esseen's concentration function.

    Attributes:
        lambda_min: Smallest eigenvalue of the covariance of the centered law.
        k: Support bound of the symmetrized law.
        v_star: Positive tilt vector of the orthant event.
        c: Esseen constant.
    """

    lambda_min: float
    k: float
    v_star: tuple[float, float]
    c: float

    def bound(self, n: int | NDArray) -> float | NDArray:
        n = np.asarray(n, dtype=np.float64)
        v1, v2 = self.v_star
        return self.c / (2.0 * self.lambda_min * n) * (self.k**2 + 2.0 / v1**2 + 2.0 / v2**2)

    __call__ = bound


def vector_tail_bound(law: VectorLaw, v_star: ArrayLike, c: float = ESSEEN_C) -> VectorTailBound:
    """Builds the vector tail factor for a centered law.

    Raises:
        NotCenteredError: The law does not have mean 0 within 1e-10.
        SingularCovarianceError: The covariance is not positive definite.
        EsseenConstantNonpositiveError: `c` is not positive.
    """
    if c <= 0:
        msg = f"The Esseen constant must be positive, got {c}."
        raise EsseenConstantNonpositiveError(msg)
    v = np.asarray(v_star, dtype=np.float64)
    if v.shape != (2,) or np.any(v <= 0):
        msg = f"The tilt vector must have two positive components, got {v.tolist()}."
        raise ValueError(msg)
    mean = law.mean
    if np.max(np.abs(mean)) > CENTERING_TOLERANCE:
        msg = f"The vector law must be centered, its mean is {mean.tolist()}."
        raise NotCenteredError(msg)

    eigenvalues = np.linalg.eigvalsh(law.covariance)
    if eigenvalues[0] <= SUM_TOLERANCE * max(1.0, eigenvalues[-1]):
        msg = f"The covariance is singular (eigenvalues {eigenvalues.tolist()})."
        raise SingularCovarianceError(msg)
    return VectorTailBound(lambda_min=float(eigenvalues[0]), k=law.diameter, v_star=(float(v[0]), float(v[1])), c=c)


def exact_orthant_tail(law: VectorLaw, n: int, b: ArrayLike, cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Exact Pr{(1/n) sum A_i in [b_1, inf) x [b_2, inf)} by 2D convolution."""
    return law.power(n, cap).orthant_tail(n * np.asarray(b, dtype=np.float64))
