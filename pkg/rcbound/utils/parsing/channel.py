import json
import logging
import os
import re
from typing import TextIO

import numpy as np

from rcbound.channel import Channel, InputDistribution, validate_channel, validate_input_distribution
from rcbound.errors import ConfigParseError

_log = logging.getLogger(__name__)


class PresetParser:
    """Builds the channels named by `bsc:<p>`, `bec:<eps>`, `identity:<k>` and `typewriter:<k>`."""

    _PATTERN = re.compile(r"^(bsc|bec|identity|typewriter):([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)$")

    @staticmethod
    def matches(source: str) -> bool:
        return PresetParser._PATTERN.match(source.strip().lower()) is not None

    @staticmethod
    def parse(source: str) -> Channel:
        m = PresetParser._PATTERN.match(source.strip().lower())
        if not m:
            msg = f"Unknown channel preset: {source!r}."
            raise ConfigParseError(msg)
        kind, value = m.group(1), float(m.group(2))
        if kind in ("bsc", "bec"):
            if not 0.0 <= value <= 1.0:
                msg = f"The parameter of {kind} must be a probability, got {value}."
                raise ConfigParseError(msg)
            return validate_channel(PresetParser._binary(kind, value), name=source.strip())

        size = int(value)
        if size != value or size < 2:  # noqa: PLR2004
            msg = f"The alphabet size of {kind} must be an integer of at least 2, got {m.group(2)}."
            raise ConfigParseError(msg)
        if kind == "identity":
            return validate_channel(np.eye(size), name=source.strip())
        # input x reaches outputs x and x+1 mod k with probability 1/2 each
        w = 0.5 * (np.eye(size) + np.roll(np.eye(size), 1, axis=1))
        return validate_channel(w, name=source.strip())

    @staticmethod
    def _binary(kind: str, value: float) -> np.ndarray:
        if kind == "bsc":
            return np.array([[1.0 - value, value], [value, 1.0 - value]])
        # outputs are 0, erasure, 1
        return np.array([[1.0 - value, value, 0.0], [0.0, value, 1.0 - value]])


def parse_channel_document(file_: TextIO, name: str | None = None) -> tuple[Channel, InputDistribution | None]:
    """Read a channel document.

    Args:
        file_: A JSON object with a matrix "W" (one row per input) and an optional vector "Q".
        name: Label of the channel. Defaults to the "name" entry of the document.

    Returns:
        The channel and the input distribution, if the document has one.
    """
    try:
        document = json.load(file_)
    except json.JSONDecodeError as e:
        msg = f"Channel document is not valid JSON: {e}."
        raise ConfigParseError(msg) from e
    if not isinstance(document, dict) or "W" not in document:
        msg = 'A channel document must be a JSON object with a matrix "W".'
        raise ConfigParseError(msg)
    channel = validate_channel(document["W"], name=name or document.get("name"))
    q = None
    if document.get("Q") is not None:
        q = validate_input_distribution(document["Q"], channel)
    return channel, q


def parse_channel(source: str) -> tuple[Channel, InputDistribution | None]:
    """A channel from a preset string or the path of a channel document."""
    if PresetParser.matches(source):
        return PresetParser.parse(source), None
    if not os.path.isfile(source):
        msg = f"{source!r} is neither a channel preset nor an existing file."
        raise ConfigParseError(msg)
    with open(source, encoding="utf-8") as f:
        return parse_channel_document(f, name=os.path.splitext(os.path.basename(source))[0])


def parse_input_distribution(source: str, channel: Channel, document_q: InputDistribution | None = None) -> InputDistribution | None:
    """The input distribution named by `source`.

    `uniform` gives the uniform distribution, `auto` returns None (the caller optimizes), `file` takes the
    "Q" entry of the channel document, and anything else is read as a comma-separated vector.
    """
    source = source.strip().lower()
    if source == "uniform":
        return InputDistribution.uniform(channel.num_inputs)
    if source == "auto":
        return None
    if source == "file":
        if document_q is None:
            msg = 'The channel document has no "Q" entry.'
            raise ConfigParseError(msg)
        return document_q
    try:
        values = [float(part) for part in source.split(",")]
    except ValueError as e:
        msg = f'Input distributions are "uniform", "auto", "file" or a comma-separated vector, got {source!r}.'
        raise ConfigParseError(msg) from e
    return validate_input_distribution(values, channel)
