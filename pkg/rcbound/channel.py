"""Channel and input-distribution data model, support sets and singularity classification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import TYPE_CHECKING

import numpy as np

from rcbound.errors import (
    ChannelValidationError,
    DimensionMismatchError,
    EmptyAlphabetError,
    EmptyMaximizerListError,
    NegativeEntryError,
    RowSumOutOfToleranceError,
)

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from numpy.typing import ArrayLike, NDArray

_log = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-12
# nonzero entries below this are rejected; log-domain computations assume they are absent
MIN_POSITIVE_ENTRY = 1e-12
EQUALITY_RTOL = 1e-12


def _frozen(values: NDArray) -> NDArray:
    values = np.array(values, dtype=np.float64)
    values.setflags(write=False)
    return values


def _check_probabilities(values: NDArray, what: str) -> NDArray:
    """Shared checks for channel rows and input distributions; returns renormalized copy."""
    if not np.all(np.isfinite(values)):
        msg = f"The {what} contains non-finite entries."
        raise ChannelValidationError(msg)
    if np.any(values < 0):
        msg = f"The {what} contains negative entries: {values[values < 0].tolist()}."
        raise NegativeEntryError(msg)
    tiny = (values > 0) & (values < MIN_POSITIVE_ENTRY)
    if np.any(tiny):
        msg = f"The {what} contains positive entries below {MIN_POSITIVE_ENTRY}; set them to 0 or increase them."
        raise ChannelValidationError(msg)

    sums = values.sum(axis=-1, keepdims=True)
    bad = np.abs(sums - 1.0) > SUM_TOLERANCE
    if np.any(bad):
        msg = f"The {what} does not sum to 1 within {SUM_TOLERANCE}: sums are {sums.ravel().tolist()}."
        raise RowSumOutOfToleranceError(msg)
    return values / sums


class Channel:
    """A discrete memoryless channel W(y|x), rows indexed by input.

    Instances are immutable. Use :func:`validate_channel` to build one from raw data.
    """

    def __init__(self, w: NDArray, name: str | None = None):
        self._w = _frozen(w)
        self._name = name

    @property
    def w(self) -> NDArray:
        return self._w

    @property
    def num_inputs(self) -> int:
        return self._w.shape[0]

    @property
    def num_outputs(self) -> int:
        return self._w.shape[1]

    @property
    def name(self) -> str:
        if self._name is None:
            return f"channel {self.num_inputs}x{self.num_outputs}"
        return self._name

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self._w > 0))

    def __repr__(self) -> str:
        return f"Channel({self.name})"


class InputDistribution:
    """A probability vector Q over the input alphabet of a channel."""

    def __init__(self, q: NDArray):
        self._q = _frozen(q)

    @classmethod
    def uniform(cls, num_inputs: int) -> InputDistribution:
        if num_inputs < 1:
            msg = "An input distribution needs at least one input."
            raise EmptyAlphabetError(msg)
        return cls(np.full(num_inputs, 1.0 / num_inputs))

    @property
    def q(self) -> NDArray:
        return self._q

    @property
    def size(self) -> int:
        return self._q.shape[0]

    @property
    def support(self) -> NDArray:
        return self._q > 0

    def distance(self, other: InputDistribution) -> float:
        """L1 distance to another distribution."""
        return float(np.abs(self._q - other.q).sum())

    def __repr__(self) -> str:
        return f"InputDistribution({np.array2string(self._q, precision=6)})"


def validate_channel(w: ArrayLike, name: str | None = None) -> Channel:
    """Builds a :class:`Channel` from a raw matrix.

    Rows whose sum is within 1e-12 of 1 are renormalized, other rows are rejected.

    Args:
        w: Rectangular matrix of conditional probabilities W(y|x), one row per input.
        name: Optional label used in logs and reports.

    Raises:
        EmptyAlphabetError: The matrix has no rows or no columns.
        NegativeEntryError: An entry is negative.
        RowSumOutOfToleranceError: A row does not sum to 1.
        ChannelValidationError: The matrix is not 2D, has non-finite or tiny positive entries.
    """
    try:
        matrix = np.array(w, dtype=np.float64)
    except ValueError as e:
        msg = "The channel matrix must be rectangular."
        raise ChannelValidationError(msg) from e
    if matrix.ndim != 2:  # noqa: PLR2004
        msg = f"The channel matrix must be two-dimensional, got {matrix.ndim} dimension(s)."
        raise ChannelValidationError(msg)
    if matrix.shape[0] == 0 or matrix.shape[1] == 0:
        msg = f"The channel matrix has an empty alphabet (shape {matrix.shape})."
        raise EmptyAlphabetError(msg)

    return Channel(_check_probabilities(matrix, "channel matrix"), name=name)


def validate_input_distribution(q: ArrayLike, channel: Channel | None = None) -> InputDistribution:
    """Builds an :class:`InputDistribution`, optionally checking it against a channel.

    Raises:
        EmptyAlphabetError: The vector is empty.
        NegativeEntryError: An entry is negative.
        RowSumOutOfToleranceError: The entries do not sum to 1.
        DimensionMismatchError: The length differs from the number of channel inputs.
    """
    vector = np.array(q, dtype=np.float64)
    if vector.ndim != 1:
        msg = f"An input distribution must be a vector, got shape {vector.shape}."
        raise ChannelValidationError(msg)
    if vector.size == 0:
        msg = "An input distribution needs at least one input."
        raise EmptyAlphabetError(msg)
    distribution = InputDistribution(_check_probabilities(vector, "input distribution"))
    if channel is not None:
        check_dimensions(channel, distribution)
    return distribution


def check_dimensions(channel: Channel, q: InputDistribution) -> None:
    if q.size != channel.num_inputs:
        msg = f"Input distribution has {q.size} entries but {channel.name} has {channel.num_inputs} inputs."
        raise DimensionMismatchError(msg)


@dataclass(frozen=True, kw_only=True)
class SupportSets:
    """Supports of the pair and triple laws of (Q, W).

    Attributes:
        s_q: Pairs (x,y) with Q(x)W(y|x) > 0.
        s_q_tilde: Triples (x,y,z) with Q(x)W(y|x)Q(z)W(y|z) > 0.
        x_of_y: For every output y, the inputs x with W(y|x) > 0.
        pair_mask: Boolean |X|x|Y| indicator of s_q.
        triple_mask: Boolean |X|x|Y|x|X| indicator of s_q_tilde.
    """

    s_q: frozenset[tuple[int, int]]
    s_q_tilde: frozenset[tuple[int, int, int]]
    x_of_y: Mapping[int, frozenset[int]]
    pair_mask: NDArray = field(repr=False)
    triple_mask: NDArray = field(repr=False)


def support_masks(channel: Channel, q: InputDistribution) -> tuple[NDArray, NDArray]:
    """Boolean indicators of s_q (|X| x |Y|) and s_q_tilde (|X| x |Y| x |X|)."""
    check_dimensions(channel, q)
    pair_mask = (q.q[:, None] > 0) & (channel.w > 0)
    # triple (x,y,z) is in the support iff both (x,y) and (z,y) are in s_q
    triple_mask = pair_mask[:, :, None] & pair_mask.T[None, :, :]
    for mask in (pair_mask, triple_mask):
        mask.setflags(write=False)
    return pair_mask, triple_mask


def support_sets(channel: Channel, q: InputDistribution) -> SupportSets:
    pair_mask, triple_mask = support_masks(channel, q)
    w = channel.w
    x_of_y = {y: frozenset(int(x) for x in np.flatnonzero(w[:, y] > 0)) for y in range(channel.num_outputs)}
    return SupportSets(
        s_q=frozenset((int(x), int(y)) for x, y in np.argwhere(pair_mask)),
        s_q_tilde=frozenset((int(x), int(y), int(z)) for x, y, z in np.argwhere(triple_mask)),
        x_of_y=MappingProxyType(x_of_y),
        pair_mask=pair_mask,
        triple_mask=triple_mask,
    )


class PairKind(Enum):
    """Whether W(y|x) = W(y|z) on every triple of the joint support."""

    SINGULAR = "singular"
    NONSINGULAR = "nonsingular"


@dataclass(frozen=True, kw_only=True)
class SingularityVerdict:
    """Result of a singularity classification.

    Attributes:
        kind: Singular or nonsingular.
        witness: A triple (x,y,z) of the joint support with W(y|x) != W(y|z), present iff nonsingular.
        list_relative: True when the verdict only holds relative to a supplied list of maximizers.
    """

    kind: PairKind
    witness: tuple[int, int, int] | None = None
    list_relative: bool = False

    def __post_init__(self):
        if (self.kind is PairKind.NONSINGULAR) != (self.witness is not None):
            msg = "A witness triple must be given exactly when the verdict is nonsingular."
            raise ValueError(msg)

    @property
    def is_singular(self) -> bool:
        return self.kind is PairKind.SINGULAR


def classify_pair(channel: Channel, q: InputDistribution) -> SingularityVerdict:
    """Classifies (Q, W) as singular or nonsingular.

    The witness is the lexicographically first triple of s_q_tilde on which the
    likelihoods differ beyond a relative tolerance of 1e-12.
    """
    _, triple_mask = support_masks(channel, q)
    w = channel.w
    w_xy = w[:, :, None]
    w_zy = w.T[None, :, :]
    differs = triple_mask & ~np.isclose(w_xy, w_zy, rtol=EQUALITY_RTOL, atol=0.0)
    mismatches = np.argwhere(differs)
    if mismatches.size == 0:
        return SingularityVerdict(kind=PairKind.SINGULAR)
    witness = tuple(int(i) for i in mismatches[0])
    _log.debug(f"{channel.name} is nonsingular under {q}: witness {witness}.")
    return SingularityVerdict(kind=PairKind.NONSINGULAR, witness=witness)


def classify_channel_at_rate(
    channel: Channel,
    rate: float,
    maximizers: Sequence[InputDistribution],
) -> SingularityVerdict:
    """Classifies the channel at a rate from a list of maximizers of E_r(R, Q).

    The channel is nonsingular at the rate if any listed maximizer forms a nonsingular pair.
    Completeness of the list cannot be certified, so the verdict is flagged list-relative.

    Raises:
        EmptyMaximizerListError: No maximizers were given.
    """
    if len(maximizers) == 0:
        msg = f"Cannot classify {channel.name} at rate {rate}: the list of maximizers is empty."
        raise EmptyMaximizerListError(msg)
    for q in maximizers:
        verdict = classify_pair(channel, q)
        if not verdict.is_singular:
            return SingularityVerdict(kind=PairKind.NONSINGULAR, witness=verdict.witness, list_relative=True)
    return SingularityVerdict(kind=PairKind.SINGULAR, list_relative=True)
