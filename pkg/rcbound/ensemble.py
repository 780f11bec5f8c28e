"""Ensemble-average error probability of i.i.d. random codes under ML decoding.

Three oracles are provided: an exact evaluation by enumeration of joint types, a brute-force
enumeration of codebooks and outputs for tiny sizes, and a seeded Monte-Carlo estimator. Decoding
ties always count as errors. :func:`slope_fit` regresses the log pre-factor against log N.
"""

from __future__ import annotations

import itertools
import logging
import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.special import gammaln, xlogy
from scipy.stats import linregress, norm
from tqdm import tqdm

from rcbound.channel import check_dimensions
from rcbound.concentration import DEFAULT_SUPPORT_CAP, MERGE_TOLERANCE, TIE_TOLERANCE, DiscreteLaw
from rcbound.domain import tablestorage as ts
from rcbound.errors import (
    BudgetExceededError,
    CapExceededError,
    InsufficientPointsError,
    TieToleranceConflictError,
    TooManyTypesError,
)
from rcbound.utils.parallel import ordered_map

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray

    from rcbound.channel import Channel, InputDistribution

_log = logging.getLogger(__name__)

DEFAULT_TYPE_CAP = 10**6
DEFAULT_BRUTE_FORCE_CAP = 10**8
DEFAULT_MC_BUDGET = 10**10
MIN_TRIALS = 1000
CONFIDENCE = 0.99
MAX_RELATIVE_CI = 0.1
MIN_FIT_POINTS = 4
# entries per Monte-Carlo block array
_BLOCK_ENTRIES = 2**22


class EnsembleMethod(Enum):
    """How an ensemble error probability was obtained."""

    EXACT_TYPES = "exact"
    BRUTE_FORCE = "brute"
    MONTE_CARLO = "mc"

    @property
    def is_exact(self) -> bool:
        return self is not EnsembleMethod.MONTE_CARLO


@dataclass(frozen=True, kw_only=True)
class EnsembleResult:
    """Ensemble-average error probability at one blocklength.

    Attributes:
        n: Blocklength N.
        m: Number of messages M.
        p_e_avg: Average error probability.
        method: The oracle used.
        ci_halfwidth: Half-width of the confidence interval, 0 for exact methods.
        per_type_breakdown: Optional table with one row per (class) type.
    """

    n: int
    m: int
    p_e_avg: float
    method: EnsembleMethod
    ci_halfwidth: float = 0.0
    per_type_breakdown: pd.DataFrame | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.p_e_avg <= 1.0:
            msg = f"An error probability must lie in [0,1], got {self.p_e_avg}."
            raise ValueError(msg)


@dataclass(frozen=True, kw_only=True)
class SlopeFit:
    """Least-squares fit of log(P_e e^{N E}) = intercept + slope log N."""

    points: list[tuple[int, float]]
    slope: float
    stderr: float
    intercept: float


def message_count(n: int, rate: float) -> int:
    """M = ceil(e^{N R}); values within a relative 1e-12 above an integer round down to it."""
    if n < 1:
        msg = f"The blocklength must be positive, got {n}."
        raise ValueError(msg)
    if rate < 0:
        msg = f"Rates must be nonnegative, got {rate}."
        raise ValueError(msg)
    return max(1, math.ceil(math.exp(n * rate) * (1.0 - 1e-12)))


def _error_given_tail(p: float, messages: int) -> float:
    """1 - (1 - p)^(M-1), the probability that some other codeword wins or ties."""
    if p >= 1.0:
        return 1.0
    return -math.expm1((messages - 1) * math.log1p(-p))


def _cell_laws(channel: Channel, q: InputDistribution) -> tuple[list[tuple[int, int]], list[DiscreteLaw], list[float]]:
    """For every cell (a,b) of positive probability, the law of log W(b|Z) - log W(b|a) with Z ~ Q.

    Raises:
        TieToleranceConflictError: A log-ratio is nonzero but within the tie tolerance of 0.
    """
    check_dimensions(channel, q)
    w, prior = channel.w, q.q
    cells, laws, probs = [], [], []
    for a, b in zip(*np.nonzero((prior[:, None] > 0) & (w > 0)), strict=True):
        reach = (prior > 0) & (w[:, b] > 0)
        atoms = np.log(w[reach, b]) - math.log(w[a, b])
        near = (np.abs(atoms) > MERGE_TOLERANCE) & (np.abs(atoms) <= TIE_TOLERANCE)
        if np.any(near):
            msg = (
                f"Output {b} of {channel.name} has log-likelihood ratios {atoms[near].tolist()} within the tie "
                f"tolerance {TIE_TOLERANCE} of 0; ties cannot be told apart from near-ties."
            )
            raise TieToleranceConflictError(msg)
        atoms[np.abs(atoms) <= MERGE_TOLERANCE] = 0.0
        p_neg_inf = float(prior[(prior > 0) & (w[:, b] == 0)].sum())
        cells.append((int(a), int(b)))
        laws.append(DiscreteLaw(atoms, prior[reach], p_neg_inf))
        probs.append(float(prior[a] * w[a, b]))
    return cells, laws, probs


def _group_cells(laws: Sequence[DiscreteLaw], probs: Sequence[float]) -> tuple[list[list[int]], list[DiscreteLaw], list[float]]:
    """Groups cells whose difference laws coincide; counts per class follow a multinomial law."""
    members: list[list[int]] = []
    representatives: list[DiscreteLaw] = []
    for index, law in enumerate(laws):
        for group, representative in zip(members, representatives, strict=True):
            if representative.is_close(law):
                group.append(index)
                break
        else:
            members.append([index])
            representatives.append(law)
    return members, representatives, [math.fsum(probs[i] for i in group) for group in members]


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Count vectors of length `parts` summing to n, in lexicographic order."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first, *rest)


def _log_multinomial(counts: NDArray, probs: NDArray) -> float:
    n = counts.sum()
    return float(gammaln(n + 1) - gammaln(counts + 1).sum() + xlogy(counts, probs).sum())


class _PowerCache:
    """Convolution powers of the class laws, each built once from the previous one."""

    def __init__(self, laws: Sequence[DiscreteLaw], cap: int):
        self._powers = [[law] for law in laws]
        self._cap = cap

    def power(self, index: int, count: int) -> DiscreteLaw:
        powers = self._powers[index]
        while len(powers) < count:
            powers.append(powers[-1].convolve(powers[0], self._cap))
        return powers[count - 1]


def _type_tail(counts: Sequence[int], cache: _PowerCache, cap: int) -> float:
    total = None
    for index, count in enumerate(counts):
        if count == 0:
            continue
        part = cache.power(index, count)
        total = part if total is None else total.convolve(part, cap)
    return total.tail(0.0)


def pairwise_tail(
    channel: Channel,
    q: InputDistribution,
    joint_type: ArrayLike,
    cap: int = DEFAULT_SUPPORT_CAP,
) -> float:
    """Pr{sum_n log W(y_n|Z_n) - log W(y_n|x_n) >= 0} for a pair (x, y) of the given joint type, Z_n i.i.d. Q.

    Args:
        channel: The channel W.
        q: The codeword distribution Q.
        joint_type: |X| x |Y| matrix of counts of (x, y) pairs.
        cap: Support cap of the convolutions.

    Raises:
        SupportExplosionError: A convolution exceeds `cap` atoms.
        TieToleranceConflictError: A log-ratio is nonzero but within the tie tolerance of 0.
    """
    counts = np.asarray(joint_type)
    if counts.shape != channel.w.shape or np.any(counts < 0) or counts.sum() < 1:
        msg = f"A joint type must be a nonnegative {channel.w.shape} count matrix with positive total."
        raise ValueError(msg)
    cells, laws, _ = _cell_laws(channel, q)
    counted = {(int(a), int(b)) for a, b in np.argwhere(counts > 0)}
    if not counted <= set(cells):
        msg = f"The joint type counts pairs {sorted(counted - set(cells))} of zero probability under Q x W."
        raise ValueError(msg)
    return _type_tail([int(counts[cell]) for cell in cells], _PowerCache(laws, cap), cap)


def exact_ensemble_error(  # noqa: PLR0913
    channel: Channel,
    q: InputDistribution,
    n: int,
    rate: float,
    *,
    messages: int | None = None,
    aggregate: bool = True,
    breakdown: bool = False,
    type_cap: int = DEFAULT_TYPE_CAP,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> EnsembleResult:
    """Exact ensemble-average error probability by enumeration of joint types.

    The error event of a transmitted pair of joint type t is the union over the other M-1 independent
    codewords of the pairwise event, whose probability p_t depends on the type only. With `aggregate`,
    cells (x, y) sharing the same pairwise difference law are merged into one class before enumeration,
    which leaves the value unchanged.

    Args:
        channel: The channel W.
        q: The codeword distribution Q.
        n: Blocklength.
        rate: Rate in nats, giving M = ceil(e^{N R}).
        messages: Overrides M.
        aggregate: Enumerate class counts instead of full joint types. Defaults to True.
        breakdown: Attach a per-type table to the result. Defaults to False.
        type_cap: Largest number of types enumerated. Defaults to 10^6.
        support_cap: Support cap of the convolutions.

    Raises:
        TooManyTypesError: The number of types exceeds `type_cap`.
        SupportExplosionError: A convolution exceeds `support_cap` atoms.
    """
    m = message_count(n, rate) if messages is None else messages
    if m < 2:  # noqa: PLR2004
        msg = f"At least two messages are required, got M = {m} (N={n}, R={rate})."
        raise ValueError(msg)
    cells, laws, probs = _cell_laws(channel, q)
    if aggregate:
        members, laws, probs = _group_cells(laws, probs)
        labels = [";".join(f"{cells[i][0]}>{cells[i][1]}" for i in group) for group in members]
    else:
        labels = [f"{a}>{b}" for a, b in cells]
    num_types = math.comb(n + len(laws) - 1, len(laws) - 1)
    if num_types > type_cap:
        msg = f"{num_types} types at N={n} over {len(laws)} classes exceed the cap of {type_cap}."
        raise TooManyTypesError(msg)
    _log.debug(f"Enumerating {num_types} types at N={n}, M={m} over {len(laws)} classes.")

    class_probs = np.asarray(probs)
    cache = _PowerCache(laws, support_cap)
    weights, tails, contributions, names = [], [], [], []
    for counts in _compositions(n, len(laws)):
        weight = math.exp(_log_multinomial(np.asarray(counts), class_probs))
        tail = _type_tail(counts, cache, support_cap)
        weights.append(weight)
        tails.append(tail)
        contributions.append(weight * _error_given_tail(tail, m))
        if breakdown:
            names.append(",".join(f"{label}:{c}" for label, c in zip(labels, counts, strict=True) if c))

    normalization = math.fsum(weights)
    if abs(normalization - 1.0) > 1e-10:  # noqa: PLR2004
        _log.warning(f"Type weights at N={n} sum to {normalization!r}.")
    table = None
    if breakdown:
        table = pd.DataFrame({ts.TYPE_CLASS: names, ts.WEIGHT: weights, ts.PAIRWISE_TAIL: tails, ts.CONTRIBUTION: contributions})
    p_e = min(1.0, max(0.0, math.fsum(contributions)))
    return EnsembleResult(n=n, m=m, p_e_avg=p_e, method=EnsembleMethod.EXACT_TYPES, per_type_breakdown=table)


def brute_force(
    channel: Channel,
    q: InputDistribution,
    n: int,
    messages: int,
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
) -> EnsembleResult:
    """Ensemble-average error probability by enumeration of every codebook and output sequence.

    Raises:
        CapExceededError: |X|^(N M) |Y|^N exceeds `cap`.
    """
    check_dimensions(channel, q)
    if n < 1 or messages < 2:  # noqa: PLR2004
        msg = f"Brute force needs N >= 1 and M >= 2, got N={n}, M={messages}."
        raise ValueError(msg)
    num_x, num_y = channel.num_inputs, channel.num_outputs
    operations = num_x ** (n * messages) * num_y**n
    if operations > cap:
        msg = f"Brute force over {operations} codebook/output pairs exceeds the cap of {cap}."
        raise CapExceededError(msg)

    with np.errstate(divide="ignore"):
        log_w = np.log(channel.w)
        log_q = np.log(q.q)
    outputs = np.array(list(itertools.product(range(num_y), repeat=n)), dtype=np.intp)
    terms = []
    for flat in itertools.product(range(num_x), repeat=n * messages):
        codebook = np.array(flat, dtype=np.intp).reshape(messages, n)
        log_prior = log_q[codebook].sum()
        if not np.isfinite(log_prior):
            continue
        # ll[m, y] = log W^n(y | x_m)
        ll = log_w[codebook[:, None, :], outputs[None, :, :]].sum(axis=-1)
        for sent in range(messages):
            others = np.delete(ll, sent, axis=0).max(axis=0)
            wrong = (others >= ll[sent] - TIE_TOLERANCE) & np.isfinite(ll[sent])
            terms.extend(np.exp(log_prior + ll[sent][wrong]) / messages)
    p_e = min(1.0, math.fsum(terms))
    return EnsembleResult(n=n, m=messages, p_e_avg=p_e, method=EnsembleMethod.BRUTE_FORCE)


def _mc_block(job: tuple[np.random.SeedSequence, int], w: NDArray, q: NDArray, n: int, messages: int) -> int:
    """Number of decoding errors in a block of trials, each with a fresh codebook and message 0 sent."""
    seed, size = job
    rng = np.random.default_rng(seed)
    codebooks = rng.choice(q.size, size=(size, messages, n), p=q)
    cumulative = np.cumsum(w, axis=1)
    uniforms = rng.random((size, n, 1))
    outputs = np.minimum((uniforms >= cumulative[codebooks[:, 0, :]]).sum(axis=-1), w.shape[1] - 1)
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    ll = log_w[codebooks, outputs[:, None, :]].sum(axis=-1)
    errors = ll[:, 1:].max(axis=1) >= ll[:, 0] - TIE_TOLERANCE
    return int(errors.sum())


def monte_carlo(  # noqa: PLR0913
    channel: Channel,
    q: InputDistribution,
    n: int,
    rate: float,
    trials: int,
    seed: int,
    *,
    messages: int | None = None,
    budget: int = DEFAULT_MC_BUDGET,
    cpu_count: int | None = 1,
) -> EnsembleResult:
    """Monte-Carlo estimate of the ensemble-average error probability with a 99% confidence interval.

    Every trial draws a codebook, transmits message 0 and ML-decodes; by symmetry of the ensemble the
    transmitted index does not matter. Trials are split in blocks seeded from `seed`, so the result
    does not depend on `cpu_count`.

    Raises:
        BudgetExceededError: M N trials exceeds `budget`.
    """
    check_dimensions(channel, q)
    if trials < MIN_TRIALS:
        msg = f"At least {MIN_TRIALS} trials are required, got {trials}."
        raise ValueError(msg)
    m = message_count(n, rate) if messages is None else messages
    if m < 2:  # noqa: PLR2004
        msg = f"At least two messages are required, got M = {m} (N={n}, R={rate})."
        raise ValueError(msg)
    if m * n * trials > budget:
        msg = f"M N trials = {m * n * trials} exceeds the Monte-Carlo budget of {budget}."
        raise BudgetExceededError(msg)

    block = max(1, min(trials, _BLOCK_ENTRIES // (m * n)))
    sizes = [block] * (trials // block) + ([trials % block] if trials % block else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    worker = partial(_mc_block, w=np.asarray(channel.w), q=np.asarray(q.q), n=n, messages=m)
    errors = sum(ordered_map(worker, list(zip(seeds, sizes, strict=True)), cpu_count))

    p = errors / trials
    halfwidth = float(norm.ppf(0.5 + CONFIDENCE / 2.0) * math.sqrt(p * (1.0 - p) / trials))
    _log.debug(f"Monte-Carlo at N={n}, M={m}: {errors}/{trials} errors.")
    return EnsembleResult(n=n, m=m, p_e_avg=p, method=EnsembleMethod.MONTE_CARLO, ci_halfwidth=halfwidth)


def ensemble_sweep(  # noqa: PLR0913
    channel: Channel,
    q: InputDistribution,
    ns: Sequence[int],
    rate: float,
    method: EnsembleMethod = EnsembleMethod.EXACT_TYPES,
    *,
    trials: int = 10_000,
    seed: int = 0,
    cpu_count: int | None = 1,
    progress: bool = False,
) -> list[EnsembleResult]:
    """Runs one oracle over a range of blocklengths."""
    results = []
    for n in tqdm(ns, desc=f"{method.value} oracle", file=sys.stderr, disable=not progress):
        if method is EnsembleMethod.EXACT_TYPES:
            results.append(exact_ensemble_error(channel, q, n, rate))
        elif method is EnsembleMethod.BRUTE_FORCE:
            results.append(brute_force(channel, q, n, message_count(n, rate)))
        else:
            results.append(monte_carlo(channel, q, n, rate, trials, seed, cpu_count=cpu_count))
    _log.info(f"{method.value} oracle on {channel.name}: {len(results)} blocklengths at rate {rate}.")
    return results


def results_to_dataframe(results: Sequence[EnsembleResult]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            ts.N: [r.n for r in results],
            ts.M: [r.m for r in results],
            ts.P_E: [r.p_e_avg for r in results],
            ts.CI: [r.ci_halfwidth for r in results],
            ts.METHOD: [r.method.value for r in results],
        },
    )


def slope_fit(results: Sequence[EnsembleResult], exponent: float) -> SlopeFit:
    """OLS slope of log(P_e e^{N exponent}) against log N.

    Points with P_e = 0 and Monte-Carlo points whose relative confidence half-width is 10% or more
    are dropped.

    Raises:
        InsufficientPointsError: Fewer than four points remain.
    """
    points = []
    for result in results:
        if result.p_e_avg <= 0:
            _log.warning(f"Dropping N={result.n} from the slope fit: zero error probability.")
            continue
        if result.ci_halfwidth / result.p_e_avg >= MAX_RELATIVE_CI:
            _log.warning(f"Dropping N={result.n} from the slope fit: relative CI {result.ci_halfwidth / result.p_e_avg:.3g}.")
            continue
        points.append((result.n, math.log(result.p_e_avg) + result.n * exponent))
    if len(points) < MIN_FIT_POINTS:
        msg = f"A slope fit needs at least {MIN_FIT_POINTS} usable points, got {len(points)}."
        raise InsufficientPointsError(msg)
    fit = linregress(np.log([p[0] for p in points]), [p[1] for p in points])
    return SlopeFit(points=points, slope=float(fit.slope), stderr=float(fit.stderr), intercept=float(fit.intercept))
