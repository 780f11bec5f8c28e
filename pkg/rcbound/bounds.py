"""Explicit pre-factor bounds on the ensemble-average error probability.

Above the critical rate the random-coding bound e^{-N E_r(R,Q)} is sharpened by a polynomial factor:
N^(-1/2) for singular pairs and N^(-(1+rho*)/2) for nonsingular pairs, where rho* is the magnitude
of the slope of E_r(., Q) at R. Below the critical rate, singular pairs attain the exponent without
a pre-factor. Every bound is returned as a :class:`BoundReport` that evaluates the bound at any
blocklength and lists the constants it is built from.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from rcbound.channel import classify_pair
from rcbound.concentration import BERRY_ESSEEN_C, ESSEEN_C, tail_constant, vector_tail_bound
from rcbound.errors import (
    EsseenConstantNonpositiveError,
    NotNonsingularError,
    NotSingularError,
    QNotEoOptimalError,
    RateAboveCriticalError,
)
from rcbound.exponents import OptimizerConfig, critical_rate, eo, er_q, maximize_eo, rho_star, subdifferential_report
from rcbound.tilted import build_tilted_family, lambda_o_law

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from rcbound.channel import Channel, InputDistribution
    from rcbound.concentration import VectorTailBound
    from rcbound.ensemble import EnsembleResult
    from rcbound.tilted import TiltedFamily

_log = logging.getLogger(__name__)

# E_o(1, Q) must be within this of max_P E_o(1, P) for the below-critical bound
EO_OPTIMALITY_TOLERANCE = 1e-8
DEFAULT_N_MAX = 10**6
# blocklengths up to this are all checked when certifying the large-N hypotheses
_DENSE_SCAN = 64


class BoundBranch(Enum):
    """Which bound a report holds."""

    SINGULAR_AVG = "singular_avg"
    SINGULAR_MAXIMAL = "singular_maximal"
    NONSINGULAR_AVG = "nonsingular_avg"
    NONSINGULAR_MAXIMAL = "nonsingular_maximal"
    BELOW_CRITICAL_SINGULAR = "below_critical_singular"

    @property
    def is_maximal(self) -> bool:
        return self in (BoundBranch.SINGULAR_MAXIMAL, BoundBranch.NONSINGULAR_MAXIMAL)


@dataclass(frozen=True, kw_only=True)
class BoundReport:
    """An evaluable upper bound (first + second x expurgation(N)) e^{-N exponent} N^prefactor_power.

    Attributes:
        branch: The bound held.
        rate: The rate R in nats.
        exponent: The exponent of the bound, E_r(R, Q) or E_r(R).
        prefactor_power: The power of N, -1/2, -(1+rho*)/2 or 0.
        first_term: Constant of the term bounding the probability of the information-density event.
        second_term: Constant of the term bounding the probability of confusion with another codeword.
        constants: Named constants the terms are built from.
        valid_from_n: Smallest blocklength from which the bound is certified.
        notes: Free-form remarks.
    """

    branch: BoundBranch
    rate: float
    exponent: float
    prefactor_power: float
    first_term: float
    second_term: float = 0.0
    constants: dict[str, float] = field(default_factory=dict)
    valid_from_n: int = 1
    notes: list[str] = field(default_factory=list)

    def prefactor(self, n: int | NDArray) -> float | NDArray:
        """Sum of the two constants, the second scaled by 1 + e^{-N R}/2 for maximal-error bounds."""
        n = np.asarray(n, dtype=np.float64)
        scale = 1.0 + np.exp(-n * self.rate) / 2.0 if self.branch.is_maximal else 1.0
        return self.first_term + self.second_term * scale

    def evaluate(self, n: int | NDArray, clip: bool = True) -> float | NDArray:
        """The bound at blocklength(s) n.

        Args:
            n: Blocklength or array of blocklengths.
            clip: Clip the value at 1. Defaults to True.
        """
        n_arr = np.asarray(n, dtype=np.float64)
        if np.any(n_arr < 1):
            msg = "Blocklengths must be positive."
            raise ValueError(msg)
        value = self.prefactor(n_arr) * np.exp(-n_arr * self.exponent) * n_arr**self.prefactor_power
        if clip:
            value = np.minimum(value, 1.0)
        return float(value) if np.ndim(value) == 0 else value

    __call__ = evaluate

    def with_esseen_constant(self, c: float) -> BoundReport:
        """The same nonsingular bound with another Esseen constant."""
        if self.branch not in (BoundBranch.NONSINGULAR_AVG, BoundBranch.NONSINGULAR_MAXIMAL):
            msg = f"Only nonsingular bounds carry an Esseen constant, not {self.branch.value}."
            raise NotNonsingularError(msg)
        if c <= 0:
            msg = f"The Esseen constant must be positive, got {c}."
            raise EsseenConstantNonpositiveError(msg)
        constants = dict(self.constants, esseen_c=c)
        return replace(self, second_term=self.second_term / self.constants["esseen_c"] * c, constants=constants)


def _scalar_constant(family: TiltedFamily, berry_esseen_c: float) -> tuple[float, float, float]:
    """Brace constant of the information-density tail at eta, with m3 and Lambda''(eta)."""
    tilted = family.scalar_cgf.law.tilt(family.eta)
    m3, var = tilted.third_absolute_moment(), tilted.variance
    return tail_constant(m3, var, family.eta, berry_esseen_c), m3, var


def singular_bound(
    channel: Channel,
    q: InputDistribution,
    rate: float,
    maximal: bool = False,
    berry_esseen_c: float = BERRY_ESSEEN_C,
) -> BoundReport:
    """Pre-factor bound for a singular pair above the critical rate.

    The average-error bound is e^{-N E_r(R,Q)} N^{-1/2} (C1 + C2), with C1 the tilted Berry-Esseen
    constant of log f/W at eta and C2 that of log W/f under the restricted triple law at eta tilde.
    The maximal-error variant doubles the expurgated bound at rate R + log 2/N, giving
    (2 C1 + 4 C2 (1 + e^{-NR}/2)).

    Raises:
        NotSingularError: The pair is nonsingular.
        DegenerateChannelError: E_o(., Q) is linear in rho.
        RateOutOfOpenIntervalError: The rate is not in (R_cr(Q), I(Q;W)).
    """
    verdict = classify_pair(channel, q)
    if not verdict.is_singular:
        msg = f"{channel.name} is nonsingular under {q} (witness {verdict.witness})."
        raise NotSingularError(msg)
    rho = rho_star(rate, q, channel)
    family = build_tilted_family(channel, q, rho)
    exponent = er_q(rate, q, channel).e_r_q

    c1, m3, lambda_dd = _scalar_constant(family, berry_esseen_c)
    singular_law = lambda_o_law(family).tilt(family.eta_tilde)
    m3_tilde, lambda_o_dd = singular_law.third_absolute_moment(), singular_law.variance
    c2 = tail_constant(m3_tilde, lambda_o_dd, family.eta_tilde, berry_esseen_c)

    constants = {
        "rho_star": rho,
        "eta": family.eta,
        "eta_tilde": family.eta_tilde,
        "m3": m3,
        "m3_tilde": m3_tilde,
        "lambda_dd": lambda_dd,
        "lambda_o_dd": lambda_o_dd,
        "lambda_o_d1": singular_law.mean,
        "c1": c1,
        "c2": c2,
        "berry_esseen_c": berry_esseen_c,
    }
    _log.info(f"Singular bound for {channel.name} at R={rate}: C1={c1:.6g}, C2={c2:.6g}.")
    if maximal:
        return BoundReport(
            branch=BoundBranch.SINGULAR_MAXIMAL,
            rate=rate,
            exponent=exponent,
            prefactor_power=-0.5,
            first_term=2.0 * c1,
            second_term=4.0 * c2,
            constants=constants,
        )
    return BoundReport(
        branch=BoundBranch.SINGULAR_AVG,
        rate=rate,
        exponent=exponent,
        prefactor_power=-0.5,
        first_term=c1,
        second_term=c2,
        constants=constants,
    )


@dataclass(frozen=True, kw_only=True)
class _LargeNCheck:
    """Quantities at rho*_N entering the large-N hypotheses at one blocklength."""

    n: int
    passed: bool
    k: float = 0.0


def _second_term_law(family: TiltedFamily) -> VectorTailBound:
    """Vector tail factor of the centered tilted law of A at v_tilde (unit Esseen constant)."""
    tilted = family.vector_cgf.tilted_law(family.v_tilde)
    return vector_tail_bound(tilted.shift(-tilted.mean), family.v_tilde, c=1.0)


def _check_blocklength(  # noqa: PLR0913
    n: int,
    channel: Channel,
    q: InputDistribution,
    rate: float,
    reference: tuple[float, float, NDArray],
    berry_esseen_c: float,
) -> _LargeNCheck:
    first_constant, lambda_min, v_star = reference
    rate_n = rate - math.log(n) / (2.0 * n)
    if rate_n <= critical_rate(q, channel):
        return _LargeNCheck(n=n, passed=False)
    family = build_tilted_family(channel, q, rho_star(rate_n, q, channel))
    c1_n, _, _ = _scalar_constant(family, berry_esseen_c)
    factor = _second_term_law(family)
    v1, v2 = family.v_tilde
    passed = (
        c1_n <= 2.0 * first_constant
        and factor.lambda_min >= lambda_min / (2.0 * math.sqrt(2.0))
        and 1.0 / v1**2 + 1.0 / v2**2 <= 2.0 / v_star[0] ** 2 + 2.0 / v_star[1] ** 2
    )
    return _LargeNCheck(n=n, passed=passed, k=factor.k)


def _certify_large_n(  # noqa: PLR0913
    channel: Channel,
    q: InputDistribution,
    rate: float,
    reference: tuple[float, float, NDArray],
    berry_esseen_c: float,
    n_max: int,
) -> tuple[int, float]:
    """First blocklength after the last one failing a large-N hypothesis, and the largest k seen.

    Every N up to 64 is checked, then a geometric grid up to `n_max`; a failure on the grid is
    located by bisection towards the next passing grid point.
    """
    check = lambda n: _check_blocklength(n, channel, q, rate, reference, berry_esseen_c)  # noqa: E731
    dense = [check(n) for n in range(1, min(_DENSE_SCAN, n_max) + 1)]
    grid = sorted({int(n) for n in np.geomspace(_DENSE_SCAN, n_max, 24)} - {_DENSE_SCAN}) if n_max > _DENSE_SCAN else []
    sparse = [check(n) for n in grid]
    checks = dense + sparse
    k = max(c.k for c in checks)

    failing = [i for i, c in enumerate(checks) if not c.passed]
    if not failing:
        return 1, k
    last = failing[-1]
    if last == len(checks) - 1:
        _log.warning(f"The large-N hypotheses still fail at N={checks[last].n}; no blocklength up to {n_max} is certified.")
        return checks[last].n + 1, k
    low, high = checks[last].n, checks[last + 1].n
    while high - low > 1:
        middle = (low + high) // 2
        result = check(middle)
        k = max(k, result.k)
        if result.passed:
            high = middle
        else:
            low = middle
    return high, k


def nonsingular_bound(  # noqa: PLR0913
    channel: Channel,
    q: InputDistribution,
    rate: float,
    esseen_c: float = ESSEEN_C,
    maximal: bool = False,
    berry_esseen_c: float = BERRY_ESSEEN_C,
    n_max: int = DEFAULT_N_MAX,
) -> BoundReport:
    """Pre-factor bound for a nonsingular pair above the critical rate.

    With epsilon_N = log N/(2N) and R_N = R - epsilon_N, the bound is
    [2 C1 + 4 sqrt(2) c/lambda_min (k^2/4 + 1/v1^2 + 1/v2^2)] e^{-N E_r(R,Q)} N^{-(1+rho*)/2},
    valid from the first blocklength at which the large-N hypotheses are verified numerically.

    Args:
        channel: The channel W.
        q: The input distribution Q.
        rate: Rate R in nats.
        esseen_c: Esseen constant; 1.0 is a placeholder, the true value is not known. Defaults to 1.0.
        maximal: Bound the maximal instead of the average error probability. Defaults to False.
        berry_esseen_c: Berry-Esseen constant. Defaults to 1/2.
        n_max: Largest blocklength at which the hypotheses are checked. Defaults to 10^6.

    Raises:
        NotNonsingularError: The pair is singular.
        RateOutOfOpenIntervalError: The rate is not in (R_cr(Q), I(Q;W)).
        EsseenConstantNonpositiveError: `esseen_c` is not positive.
    """
    verdict = classify_pair(channel, q)
    if verdict.is_singular:
        msg = f"{channel.name} is singular under {q}."
        raise NotNonsingularError(msg)
    if esseen_c <= 0:
        msg = f"The Esseen constant must be positive, got {esseen_c}."
        raise EsseenConstantNonpositiveError(msg)

    rho = rho_star(rate, q, channel)
    family = build_tilted_family(channel, q, rho)
    exponent = er_q(rate, q, channel).e_r_q
    c1, m3, lambda_dd = _scalar_constant(family, berry_esseen_c)
    factor = _second_term_law(family)
    v_star = family.v_tilde

    valid_from_n, k = _certify_large_n(channel, q, rate, (c1, factor.lambda_min, v_star), berry_esseen_c, n_max)
    k = max(k, factor.k)
    unit = 4.0 * math.sqrt(2.0) / factor.lambda_min * (k**2 / 4.0 + 1.0 / v_star[0] ** 2 + 1.0 / v_star[1] ** 2)

    constants = {
        "rho_star": rho,
        "eta": family.eta,
        "m3": m3,
        "lambda_dd": lambda_dd,
        "c1": c1,
        "lambda_min": factor.lambda_min,
        "k": k,
        "v1": float(v_star[0]),
        "v2": float(v_star[1]),
        "esseen_c": esseen_c,
        "berry_esseen_c": berry_esseen_c,
    }
    notes = [f"esseen_c={esseen_c} is a placeholder; the Esseen constant is not known numerically."]
    _log.info(f"Nonsingular bound for {channel.name} at R={rate}: rho*={rho:.10g}, valid from N={valid_from_n}.")
    if maximal:
        return BoundReport(
            branch=BoundBranch.NONSINGULAR_MAXIMAL,
            rate=rate,
            exponent=exponent,
            prefactor_power=-(1.0 + rho) / 2.0,
            first_term=4.0 * c1,
            second_term=4.0 * esseen_c * unit,
            constants=constants,
            valid_from_n=valid_from_n,
            notes=notes,
        )
    return BoundReport(
        branch=BoundBranch.NONSINGULAR_AVG,
        rate=rate,
        exponent=exponent,
        prefactor_power=-(1.0 + rho) / 2.0,
        first_term=2.0 * c1,
        second_term=esseen_c * unit,
        constants=constants,
        valid_from_n=valid_from_n,
        notes=notes,
    )


def below_critical_singular_bound(
    channel: Channel,
    q: InputDistribution,
    rate: float,
    config: OptimizerConfig | None = None,
) -> BoundReport:
    """The bound e^{-N E_r(R)}, E_r(R) = -R + E_o(1, Q), for a singular pair at or below the critical rate.

    Raises:
        NotSingularError: The pair is nonsingular.
        RateAboveCriticalError: The rate exceeds R_cr(Q).
        QNotEoOptimalError: Q does not maximize E_o(1, .) within 1e-8.
    """
    if rate < 0:
        msg = f"Rates must be nonnegative, got {rate}."
        raise ValueError(msg)
    verdict = classify_pair(channel, q)
    if not verdict.is_singular:
        msg = f"{channel.name} is nonsingular under {q} (witness {verdict.witness})."
        raise NotSingularError(msg)
    r_cr = critical_rate(q, channel)
    if rate > r_cr:
        msg = f"Rate {rate} is above R_cr(Q) = {r_cr}."
        raise RateAboveCriticalError(msg)
    value = eo(1.0, q, channel)
    best, _ = maximize_eo(1.0, channel, config)
    if value < best - EO_OPTIMALITY_TOLERANCE:
        msg = f"E_o(1, Q) = {value} is below max_P E_o(1, P) = {best}."
        raise QNotEoOptimalError(msg)

    return BoundReport(
        branch=BoundBranch.BELOW_CRITICAL_SINGULAR,
        rate=rate,
        exponent=-rate + value,
        prefactor_power=0.0,
        first_term=1.0,
        constants={"eo_1": value, "r_cr_q": r_cr},
        notes=["The constant of the matching lower bound is not computed."],
    )


def corollary_report(
    channel: Channel,
    rate: float,
    eps: float = 0.0,
    config: OptimizerConfig | None = None,
    esseen_c: float = ESSEEN_C,
) -> BoundReport:
    """Bound built from the maximizers of E_r(R, .).

    A nonsingular maximizer with the steepest subgradient gives the power -(1+rho*_R)/2 when it attains
    the steepest subgradient over all maximizers, and -(1+rho_bar*_R-eps)/2 otherwise. Without a
    nonsingular maximizer the singular bound of the steepest maximizer is returned.

    Raises:
        RateOutOfOpenIntervalError: The rate is not between the critical rate of the channel and capacity,
            or not in (R_cr(Q), I(Q;W)) for the selected maximizer.
    """
    report = subdifferential_report(rate, channel, config)
    nonsingular = report.best_nonsingular
    if nonsingular is None:
        bound = singular_bound(channel, report.best, rate)
        return replace(bound, constants=dict(bound.constants, e_r=report.e_r), notes=[*bound.notes, "all maximizers are singular"])

    bound = nonsingular_bound(channel, nonsingular, rate, esseen_c=esseen_c)
    constants = dict(bound.constants, e_r=report.e_r, rho_star_R=report.rho_star_R, rho_bar_star_R=report.rho_bar_star_R)
    if report.attained:
        return replace(bound, prefactor_power=-(1.0 + report.rho_star_R) / 2.0, constants=constants)
    power = -(1.0 + report.rho_bar_star_R - eps) / 2.0
    notes = [*bound.notes, f"steepest subgradient is not attained by a nonsingular maximizer; eps={eps}"]
    return replace(bound, prefactor_power=max(power, bound.prefactor_power), constants=constants, notes=notes)


def fit_esseen_constant(report: BoundReport, exact: Sequence[EnsembleResult]) -> float:
    """Smallest Esseen constant for which a nonsingular bound dominates the given error probabilities.

    Raises:
        NotNonsingularError: The report is not a nonsingular bound.
    """
    if report.branch not in (BoundBranch.NONSINGULAR_AVG, BoundBranch.NONSINGULAR_MAXIMAL):
        msg = f"Only nonsingular bounds carry an Esseen constant, not {report.branch.value}."
        raise NotNonsingularError(msg)
    unit = report.second_term / report.constants["esseen_c"]
    required = 0.0
    for result in exact:
        n = result.n
        scale = math.exp(-n * report.exponent) * n**report.prefactor_power
        expurgation = 1.0 + math.exp(-n * report.rate) / 2.0 if report.branch.is_maximal else 1.0
        needed = (result.p_e_avg / scale - report.first_term) / (unit * expurgation)
        required = max(required, needed)
    _log.info(f"Fitted Esseen constant {required:.6g} over {len(exact)} blocklengths.")
    return required
