"""Gallager functions, random-coding and sphere-packing exponents, critical rates and rho*.

All rates are in nats per channel use.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp, rel_entr, softmax

from rcbound.channel import InputDistribution, check_dimensions, classify_pair
from rcbound.errors import (
    DegenerateChannelError,
    NoMaximizerFoundError,
    OptimizerDidNotConvergeError,
    RateOutOfOpenIntervalError,
)
from rcbound.tilted import build_tilted_family
from rcbound.utils.parallel import ordered_map
from rcbound.utils.simplex import cluster, project_onto_simplex, starting_points

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from rcbound.channel import Channel, SingularityVerdict

_log = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-10
RHO_STAR_RESIDUAL = 1e-11
# entries of optimizer output below this are treated as zero
ZERO_PROBABILITY = 1e-12


@dataclass(kw_only=True)
class OptimizerConfig:
    """Settings of the optimization over input distributions.

    Args:
        n_starts: Number of multi-start points at the optimal rho (uniform plus Dirichlet draws). Defaults to 32.
        rho_grid: Number of grid points over rho in [0,1] used to bracket the envelope. Defaults to 21.
        cluster_tol: L1 distance under which two maximizers are considered identical. Defaults to 1e-6.
        value_tol: Exponent distance under which a candidate counts as a maximizer. Defaults to 1e-9.
        gradient_tol: Sup-norm of the projected-gradient mapping at convergence. Defaults to 1e-11.
        stall_tol: Largest projected-gradient residual accepted when the line search stalls or max_iter is reached.
            Defaults to 1e-6.
        max_iter: Iteration cap of a single projected-gradient run. Defaults to 50000.
        rho_max: Upper end of the rho range for sphere packing and R_infinity probing. Defaults to 64.
        infinity_threshold: Sphere-packing values above this that still increase at rho_max are flagged infinite.
            Defaults to 1e3.
        seed: Seed of the random starting points. Defaults to 0.
        cpu_count: Processes for the multi-start runs; None uses all CPUs. Defaults to 1.
    """

    n_starts: int = 32
    rho_grid: int = 21
    cluster_tol: float = 1e-6
    value_tol: float = 1e-9
    gradient_tol: float = 1e-11
    stall_tol: float = 1e-6
    max_iter: int = 50000
    rho_max: float = 64.0
    infinity_threshold: float = 1e3
    seed: int = 0
    cpu_count: int | None = 1

    def __post_init__(self):
        if self.n_starts < 1 or self.rho_grid < 3:  # noqa: PLR2004
            msg = "At least one start and three rho grid points are required."
            raise ValueError(msg)
        for name in ("cluster_tol", "value_tol", "gradient_tol", "stall_tol", "rho_max", "infinity_threshold"):
            if getattr(self, name) <= 0:
                msg = f"{name} must be positive."
                raise ValueError(msg)
        if self.stall_tol < self.gradient_tol:
            msg = "stall_tol must not be below gradient_tol."
            raise ValueError(msg)


def _log_h(rho: float, q: NDArray, w: NDArray) -> NDArray:
    """log sum_x Q(x) W(y|x)^(1/(1+rho)), -inf where the sum vanishes."""
    with np.errstate(divide="ignore"):
        return np.log(q @ np.power(w, 1.0 / (1.0 + rho)))


def _log_f(rho: float, q: NDArray, w: NDArray) -> float:
    """log sum_y h_y^(1+rho) = -E_o(rho, Q)."""
    log_h = _log_h(rho, q, w)
    return float(logsumexp((1.0 + rho) * log_h[np.isfinite(log_h)]))


def eo(rho: float, q: InputDistribution, channel: Channel) -> float:
    """Gallager's function E_o(rho, Q) = -log sum_y [sum_x Q(x) W(y|x)^(1/(1+rho))]^(1+rho)."""
    check_dimensions(channel, q)
    if rho < 0:
        msg = f"rho must be nonnegative, got {rho}."
        raise ValueError(msg)
    return -_log_f(rho, q.q, channel.w)


def eo_rho_derivative(rho: float, q: InputDistribution, channel: Channel) -> float:
    """dE_o/drho as the expectation of log P^rho_{X|Y}/Q under the tilted pair law."""
    family = build_tilted_family(channel, q, rho)
    mask = family.pair_mask & (family.p_xy_rho > 0)
    x_index = np.nonzero(mask)[0]
    return float(np.sum(family.p_xy_rho[mask] * (np.log(family.p_x_given_y_rho[mask]) - np.log(q.q[x_index]))))


def eo_rho_second_derivative(rho: float, q: InputDistribution, channel: Channel) -> float:
    """Central finite difference of the closed-form derivative, step 1e-5(1+|rho|); diagnostics only."""
    h = 1e-5 * (1.0 + abs(rho))
    lower = max(rho - h, 0.0)
    return (eo_rho_derivative(rho + h, q, channel) - eo_rho_derivative(lower, q, channel)) / (rho + h - lower)


def mutual_information(q: InputDistribution, channel: Channel) -> float:
    check_dimensions(channel, q)
    output = q.q @ channel.w
    return float(np.sum(q.q[:, None] * rel_entr(channel.w, np.broadcast_to(output, channel.w.shape))))


def critical_rate(q: InputDistribution, channel: Channel) -> float:
    """R_cr(Q) = dE_o/drho at rho = 1."""
    return eo_rho_derivative(1.0, q, channel)


def is_degenerate(q: InputDistribution, channel: Channel) -> bool:
    """True when dE_o/drho is constant on [0,1], i.e. R_cr(Q) = I(Q;W)."""
    return eo_rho_derivative(0.0, q, channel) - eo_rho_derivative(1.0, q, channel) <= DEGENERACY_TOLERANCE


def rho_star(rate: float, q: InputDistribution, channel: Channel) -> float:
    """The unique rho in (0,1) with dE_o/drho = rate.

    Raises:
        DegenerateChannelError: E_o is linear in rho.
        RateOutOfOpenIntervalError: The rate is not strictly between R_cr(Q) and I(Q;W).
    """
    mutual = eo_rho_derivative(0.0, q, channel)
    critical = eo_rho_derivative(1.0, q, channel)
    if mutual - critical <= DEGENERACY_TOLERANCE:
        msg = f"{channel.name} is degenerate under {q}: R_cr(Q) = I(Q;W) = {mutual}."
        raise DegenerateChannelError(msg)
    if not critical < rate < mutual:
        msg = f"Rate {rate} is not in the open interval (R_cr(Q), I(Q;W)) = ({critical}, {mutual})."
        raise RateOutOfOpenIntervalError(msg)

    root = brentq(
        lambda rho: eo_rho_derivative(rho, q, channel) - rate,
        0.0,
        1.0,
        xtol=1e-15,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )
    residual = abs(eo_rho_derivative(root, q, channel) - rate)
    if residual > RHO_STAR_RESIDUAL:
        _log.warning(f"rho* at rate {rate} has residual {residual:.3g} above {RHO_STAR_RESIDUAL}.")
    return float(root)


@dataclass(frozen=True, kw_only=True)
class ExponentPoint:
    """E_r(R, Q) with the optimizing rho."""

    rate: float
    e_r_q: float
    rho_star: float
    q: InputDistribution

    def __post_init__(self):
        if not 0.0 <= self.rho_star <= 1.0:
            msg = f"rho* must lie in [0,1], got {self.rho_star}."
            raise ValueError(msg)


def er_q(rate: float, q: InputDistribution, channel: Channel) -> ExponentPoint:
    """Random-coding exponent of a fixed input distribution, max over rho in [0,1] of -rho R + E_o(rho, Q)."""
    if rate < 0:
        msg = f"Rates must be nonnegative, got {rate}."
        raise ValueError(msg)
    mutual = eo_rho_derivative(0.0, q, channel)
    critical = eo_rho_derivative(1.0, q, channel)
    if rate >= mutual:
        return ExponentPoint(rate=rate, e_r_q=0.0, rho_star=0.0, q=q)
    if rate <= critical or mutual - critical <= DEGENERACY_TOLERANCE:
        value = -rate + eo(1.0, q, channel)
        if value <= 0:
            return ExponentPoint(rate=rate, e_r_q=0.0, rho_star=0.0, q=q)
        return ExponentPoint(rate=rate, e_r_q=value, rho_star=1.0, q=q)
    rho = rho_star(rate, q, channel)
    return ExponentPoint(rate=rate, e_r_q=max(-rho * rate + eo(rho, q, channel), 0.0), rho_star=rho, q=q)


def _clean(q: NDArray) -> InputDistribution:
    q = np.where(q < ZERO_PROBABILITY, 0.0, q)
    return InputDistribution(q / q.sum())


def _projected_residual(q: NDArray, gradient: NDArray) -> float:
    """Sup-norm of the projected-gradient mapping at unit step; zero exactly at KKT points."""
    return float(np.max(np.abs(q - project_onto_simplex(q - gradient))))


def _accept_or_raise(q: NDArray, residual: float, rho: float, config: OptimizerConfig, reason: str) -> NDArray:
    if residual <= config.stall_tol:
        _log.debug(f"{reason} at rho={rho:.6g}; accepted with projected-gradient residual {residual:.3g}.")
        return q
    msg = f"{reason} at rho={rho}: projected-gradient residual {residual:.3g} is above {config.stall_tol}."
    raise OptimizerDidNotConvergeError(msg)


def _maximize_eo_from(start: NDArray, rho: float, w: NDArray, config: OptimizerConfig) -> NDArray:
    """Projected gradient descent of log sum_y h_y^(1+rho) over the simplex, with Armijo backtracking.

    Near the optimum the decrease of the objective drops below its rounding error. A step that leaves the
    value unchanged to working precision is then accepted only if it shrinks the projected-gradient residual.
    """
    s = 1.0 / (1.0 + rho)
    w_s = np.power(w, s)

    def objective(q: NDArray) -> tuple[float, NDArray]:
        with np.errstate(divide="ignore"):
            log_h = np.log(q @ w_s)
        finite = np.isfinite(log_h)
        weights = np.zeros_like(log_h)
        weights[finite] = softmax((1.0 + rho) * log_h[finite])
        ratio = np.zeros_like(w_s)
        ratio[:, finite] = w_s[:, finite] / np.exp(log_h[finite])
        return float(logsumexp((1.0 + rho) * log_h[finite])), (1.0 + rho) * (ratio @ weights)

    q = project_onto_simplex(start)
    step = 1.0
    value, gradient = objective(q)
    residual = _projected_residual(q, gradient)
    for iteration in range(config.max_iter):
        if residual <= config.gradient_tol:
            _log.debug(f"Projected gradient at rho={rho:.6g} converged after {iteration} iterations.")
            return q
        rounding = 4.0 * np.finfo(float).eps * max(1.0, abs(value))
        while True:
            candidate = project_onto_simplex(q - step * gradient)
            candidate_value, candidate_gradient = objective(candidate)
            candidate_residual = _projected_residual(candidate, candidate_gradient)
            if candidate_value < value + 1e-4 * float(gradient @ (candidate - q)):
                break
            if candidate_value <= value + rounding and candidate_residual < residual:
                break
            step *= 0.5
            if step < 1e-20:  # noqa: PLR2004
                return _accept_or_raise(q, residual, rho, config, "Line search stalled")
        q, value, gradient, residual = candidate, candidate_value, candidate_gradient, candidate_residual
        step = min(step * 2.0, 1e6)

    return _accept_or_raise(q, residual, rho, config, f"Projected gradient reached {config.max_iter} iterations")


def maximize_eo(rho: float, channel: Channel, config: OptimizerConfig | None = None) -> tuple[float, list[InputDistribution]]:
    """Maximizes E_o(rho, .) over the simplex by multi-start projected gradient.

    Returns:
        The maximal value and the distinct maximizers found.
    """
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    starts = starting_points(channel.num_inputs, config.n_starts, rng)
    solve = partial(_maximize_eo_from, rho=rho, w=channel.w, config=config)
    candidates = [_clean(q) for q in ordered_map(solve, starts, config.cpu_count)]
    values = np.array([eo(rho, q, channel) for q in candidates])
    best = float(values.max())
    kept = [q for q, value in zip(candidates, values, strict=True) if value >= best - config.value_tol]
    kept.sort(key=lambda q: -eo(rho, q, channel))
    return best, [kept[i] for i in cluster([q.q for q in kept], config.cluster_tol)]


def blahut_arimoto(channel: Channel, tolerance: float = 1e-10, max_iter: int = 200000) -> tuple[float, InputDistribution]:
    """Capacity and a capacity-achieving input distribution.

    Iterates until the gap between the upper and lower capacity estimates is below `tolerance`.

    Raises:
        OptimizerDidNotConvergeError: The gap is still above `tolerance` after `max_iter` iterations.
    """
    w = channel.w
    q = np.full(channel.num_inputs, 1.0 / channel.num_inputs)
    for iteration in range(max_iter):
        output = q @ w
        divergences = rel_entr(w, np.broadcast_to(output, w.shape)).sum(axis=1)
        lower = float(logsumexp(divergences, b=q))
        upper = float(divergences[q > 0].max())
        if upper - lower <= tolerance:
            _log.debug(f"Blahut-Arimoto converged after {iteration} iterations, gap {upper - lower:.3g}.")
            q = _clean(q)
            return mutual_information(q, channel), q
        q = q * np.exp(divergences - lower)
        q /= q.sum()
    msg = f"Blahut-Arimoto did not reach tolerance {tolerance} in {max_iter} iterations."
    raise OptimizerDidNotConvergeError(msg)


def capacity(channel: Channel) -> float:
    return blahut_arimoto(channel)[0]


def channel_critical_rate(channel: Channel, config: OptimizerConfig | None = None) -> float:
    """Critical rate of the channel, below which E_r(R) = -R + max_Q E_o(1, Q).

    This is the left derivative of max_Q E_o(rho, Q) at rho = 1, the smallest R_cr(Q) over the maximizers of E_o(1, .).
    """
    _, maximizers = maximize_eo(1.0, channel, config)
    return min(critical_rate(q, channel) for q in maximizers)


def _envelope_candidates(rate: float, channel: Channel, config: OptimizerConfig) -> tuple[float, list[NDArray]]:
    """Brackets and refines the rho maximizing -rho R + max_Q E_o(rho, Q).

    Returns:
        The optimal rho and the input distributions visited on the way.
    """
    grid = np.linspace(0.0, 1.0, config.rho_grid)
    q = np.full(channel.num_inputs, 1.0 / channel.num_inputs)
    grid_qs, envelope = [], []
    for rho in grid:
        q = _maximize_eo_from(q, rho, channel.w, config)
        grid_qs.append(q)
        envelope.append(-rho * rate - _log_f(rho, q, channel.w))
    best = int(np.argmax(envelope))

    lower, upper = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    warm = grid_qs[best]
    visited: dict[float, NDArray] = {}

    def negative_envelope(rho: float) -> float:
        visited[rho] = _maximize_eo_from(warm, rho, channel.w, config)
        return rho * rate + _log_f(rho, visited[rho], channel.w)

    refined = minimize_scalar(negative_envelope, bounds=(lower, upper), method="bounded", options={"xatol": 1e-10})
    rho_hat = float(refined.x)
    if -refined.fun < envelope[best]:
        rho_hat = float(grid[best])
    _log.debug(f"Envelope maximized at rho={rho_hat:.10g} for rate {rate}.")
    return rho_hat, grid_qs + list(visited.values())


def er(rate: float, channel: Channel, config: OptimizerConfig | None = None) -> tuple[float, list[InputDistribution]]:
    """Random-coding exponent E_r(R) = max_Q E_r(R, Q) and the distinct maximizers found.

    The value is the largest E_r(R, Q) over every candidate Q, so it never exceeds a true exponent value
    and dominates E_r(R, Q) for every candidate Q.

    Raises:
        OptimizerDidNotConvergeError: A projected-gradient run did not converge.
    """
    config = config or OptimizerConfig()
    if rate < 0:
        msg = f"Rates must be nonnegative, got {rate}."
        raise ValueError(msg)
    cap, q_cap = blahut_arimoto(channel)
    if rate >= cap:
        _log.info(f"Rate {rate} is at or above capacity {cap} of {channel.name}; E_r = 0.")
        return 0.0, [q_cap]

    rho_hat, visited = _envelope_candidates(rate, channel, config)
    rng = np.random.default_rng(config.seed)
    starts = starting_points(channel.num_inputs, config.n_starts, rng)
    solve = partial(_maximize_eo_from, rho=rho_hat, w=channel.w, config=config)
    candidates = [_clean(q) for q in ordered_map(solve, starts, config.cpu_count) + visited] + [q_cap]

    points = [er_q(rate, q, channel) for q in candidates]
    best = max(point.e_r_q for point in points)
    maximizers = sorted((p for p in points if p.e_r_q >= best - config.value_tol), key=lambda p: -p.e_r_q)
    if not maximizers:
        msg = f"No maximizer of E_r({rate}, Q) was found for {channel.name}."
        raise NoMaximizerFoundError(msg)
    distinct = [maximizers[i].q for i in cluster([p.q.q for p in maximizers], config.cluster_tol)]
    _log.info(f"E_r({rate}) = {best:.12g} for {channel.name} with {len(distinct)} maximizer(s).")
    return best, distinct


@dataclass(frozen=True, kw_only=True)
class SpherePackingPoint:
    """E_SP(R, Q) over rho in [0, rho_max].

    Attributes:
        value: The supremum found, at `rho`.
        still_increasing: The objective still increases at rho_max.
        infinite: `value` exceeds the infinity threshold and is still increasing.
    """

    rate: float
    value: float
    rho: float
    still_increasing: bool
    infinite: bool


def esp_q(rate: float, q: InputDistribution, channel: Channel, config: OptimizerConfig | None = None) -> SpherePackingPoint:
    """Sphere-packing exponent of a fixed input distribution, sup over rho >= 0 of -rho R + E_o(rho, Q)."""
    config = config or OptimizerConfig()
    if rate < 0:
        msg = f"Rates must be nonnegative, got {rate}."
        raise ValueError(msg)

    # E_o is concave in rho, so the objective is unimodal and its slope is E_o' - R
    if eo_rho_derivative(0.0, q, channel) <= rate:
        return SpherePackingPoint(rate=rate, value=0.0, rho=0.0, still_increasing=False, infinite=False)
    if eo_rho_derivative(config.rho_max, q, channel) > rate:
        value = -config.rho_max * rate + eo(config.rho_max, q, channel)
        return SpherePackingPoint(
            rate=rate,
            value=value,
            rho=config.rho_max,
            still_increasing=True,
            infinite=value > config.infinity_threshold,
        )
    rho = brentq(lambda r: eo_rho_derivative(r, q, channel) - rate, 0.0, config.rho_max, xtol=1e-14, maxiter=500)
    return SpherePackingPoint(rate=rate, value=-rho * rate + eo(rho, q, channel), rho=float(rho), still_increasing=False, infinite=False)


def esp(rate: float, channel: Channel, config: OptimizerConfig | None = None) -> SpherePackingPoint:
    """Sphere-packing exponent E_SP(R) = sup over Q of E_SP(R, Q).

    Candidates are the maximizers of E_o(rho, .) on a rho grid over [0, rho_max]; the best of them is returned.
    """
    config = config or OptimizerConfig()
    grid = np.concatenate(([0.0], np.geomspace(1e-3, config.rho_max, config.rho_grid)))
    q = np.full(channel.num_inputs, 1.0 / channel.num_inputs)
    candidates = []
    for rho in grid:
        q = _maximize_eo_from(q, rho, channel.w, config)
        candidates.append(_clean(q))
    candidates.append(blahut_arimoto(channel)[1])
    return max((esp_q(rate, candidate, channel, config) for candidate in candidates), key=lambda point: point.value)


@dataclass(frozen=True, kw_only=True)
class ChannelRates:
    """Characteristic rates of a channel and an input distribution.

    Attributes:
        capacity: Channel capacity.
        capacity_q: A capacity-achieving input distribution.
        r_cr_q: Critical rate R_cr(Q).
        i_q_w: Mutual information I(Q;W).
        r_infinity_estimate: Largest dE_o/drho at rho_max over the candidate inputs.
        r_infinity_is_estimate: Always True, R_infinity is a limit that is only approximated.
        degenerate: R_cr(Q) = I(Q;W), E_o is linear in rho.
    """

    capacity: float
    capacity_q: InputDistribution
    r_cr_q: float
    i_q_w: float
    r_infinity_estimate: float
    r_infinity_is_estimate: bool = True
    degenerate: bool = False


def channel_rates(channel: Channel, q: InputDistribution, config: OptimizerConfig | None = None) -> ChannelRates:
    config = config or OptimizerConfig()
    check_dimensions(channel, q)
    cap, q_cap = blahut_arimoto(channel)
    _, extremes = maximize_eo(config.rho_max, channel, config)
    r_infinity = max(eo_rho_derivative(config.rho_max, candidate, channel) for candidate in [q, q_cap, *extremes])
    i_q_w = eo_rho_derivative(0.0, q, channel)
    r_cr_q = eo_rho_derivative(1.0, q, channel)
    return ChannelRates(
        capacity=cap,
        capacity_q=q_cap,
        r_cr_q=r_cr_q,
        i_q_w=i_q_w,
        r_infinity_estimate=r_infinity,
        degenerate=i_q_w - r_cr_q <= DEGENERACY_TOLERANCE,
    )


@dataclass(frozen=True, kw_only=True)
class SubdifferentialReport:
    """Subgradients of E_r at a rate, one per maximizer found.

    Attributes:
        rate: The rate R.
        e_r: E_r(R).
        maximizers: Pairs (Q, -rho*(R, Q)).
        verdicts: Singularity verdict of every maximizer.
        hull: Smallest and largest subgradient.
        rho_star_R: Largest magnitude of a subgradient.
        rho_bar_star_R: Largest magnitude over nonsingular maximizers, None if there is none.
        attained: The largest magnitude is attained by a nonsingular maximizer.
    """

    rate: float
    e_r: float
    maximizers: list[tuple[InputDistribution, float]]
    verdicts: list[SingularityVerdict] = field(repr=False)
    hull: tuple[float, float]
    rho_star_R: float  # noqa: N815
    rho_bar_star_R: float | None  # noqa: N815
    attained: bool

    @property
    def best(self) -> InputDistribution:
        """A maximizer with the steepest subgradient."""
        return max(self.maximizers, key=lambda pair: -pair[1])[0]

    @property
    def best_nonsingular(self) -> InputDistribution | None:
        """A nonsingular maximizer with the steepest subgradient."""
        nonsingular = [pair for pair, verdict in zip(self.maximizers, self.verdicts, strict=True) if not verdict.is_singular]
        if not nonsingular:
            return None
        return max(nonsingular, key=lambda pair: -pair[1])[0]


def subdifferential_report(rate: float, channel: Channel, config: OptimizerConfig | None = None) -> SubdifferentialReport:
    """Maps every maximizer of E_r(R, .) to its subgradient -rho*(R, Q).

    Raises:
        RateOutOfOpenIntervalError: The rate is not between the critical rate of the channel and capacity.
        NoMaximizerFoundError: The optimizer returned no maximizer.
    """
    config = config or OptimizerConfig()
    cap = capacity(channel)
    r_cr = channel_critical_rate(channel, config)
    if not r_cr < rate < cap:
        msg = f"Rate {rate} is not in (R_cr, C) = ({r_cr}, {cap}) for {channel.name}."
        raise RateOutOfOpenIntervalError(msg)
    value, maximizers = er(rate, channel, config)
    if not maximizers:
        msg = f"No maximizer found at rate {rate} for {channel.name}."
        raise NoMaximizerFoundError(msg)

    slopes = [-er_q(rate, q, channel).rho_star for q in maximizers]
    verdicts = [classify_pair(channel, q) for q in maximizers]
    magnitudes = [abs(slope) for slope in slopes]
    nonsingular = [m for m, verdict in zip(magnitudes, verdicts, strict=True) if not verdict.is_singular]
    rho_star_r = max(magnitudes)
    rho_bar = max(nonsingular) if nonsingular else None
    return SubdifferentialReport(
        rate=rate,
        e_r=value,
        maximizers=list(zip(maximizers, slopes, strict=True)),
        verdicts=verdicts,
        hull=(min(slopes), max(slopes)),
        rho_star_R=rho_star_r,
        rho_bar_star_R=rho_bar,
        attained=rho_bar is not None and math.isclose(rho_bar, rho_star_r, rel_tol=0.0, abs_tol=1e-12),
    )
