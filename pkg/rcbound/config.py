import logging
import os
from dataclasses import dataclass, field

from rcbound.channel import Channel, InputDistribution
from rcbound.concentration import BERRY_ESSEEN_C, ESSEEN_C
from rcbound.ensemble import EnsembleMethod
from rcbound.errors import ConfigParseError
from rcbound.utils.parsing.channel import PresetParser, parse_channel, parse_input_distribution

_log = logging.getLogger(__name__)

CPU_COUNT_VARIABLE = "RCBOUND_CPU_COUNT"
VERIFY_TOLERANCE = 1e-8


def cpu_count_from_environment() -> int | None:
    """Process count from RCBOUND_CPU_COUNT; unset gives 1, "all" gives every CPU (None)."""
    value = os.environ.get(CPU_COUNT_VARIABLE)
    if value is None or value.strip() == "":
        return 1
    if value.strip().lower() == "all":
        return None
    try:
        count = int(value)
    except ValueError as e:
        msg = f"{CPU_COUNT_VARIABLE} must be a positive integer or 'all', got {value!r}."
        raise ConfigParseError(msg) from e
    if count < 1:
        msg = f"{CPU_COUNT_VARIABLE} must be a positive integer or 'all', got {value!r}."
        raise ConfigParseError(msg)
    return count


@dataclass(kw_only=True)
class RunConfig:
    """Everything a subcommand needs, validated before any computation starts.

    Args:
        channel_source: A channel preset (e.g. "bec:0.5") or the path of a channel document.
        q_source: "uniform", "auto" (optimize), "file" (the document's "Q") or a comma-separated vector.
        rates: Rates in nats.
        n_range: Blocklengths.
        tolerance: Largest identity residual accepted by `verify`. Defaults to 1e-8.
        esseen_c: Esseen constant of the nonsingular bound. Defaults to 1.0.
        berry_esseen_c: Berry-Esseen constant. Defaults to 1/2.
        eps: Slack of the corollary power when the steepest subgradient is not attained. Defaults to 0.
        seed: Seed of the Monte-Carlo oracle. Defaults to 0.
        trials: Monte-Carlo trials per blocklength. Defaults to 10000.
        method: Ensemble oracle. Defaults to the exact enumeration over types.
        maximal: Bound the maximal error probability. Defaults to False.
        bits: The rates were given in bits and have been converted. Defaults to False.
        law_source: Path of a law document, for `concentration`. Defaults to None.
        threshold: Threshold of the concentration tail. Defaults to None.
        exponent: Exponent removed before a slope fit, for `regress`. Defaults to None.
        output: CSV path; None writes to stdout. Defaults to None.
        sidecar: JSON path for the constants of bound reports. Defaults to None.
        hdf5: HDF5 path that receives every table. Defaults to None.
        cpu_count: Processes for the parallel parts; None uses every CPU. Defaults to RCBOUND_CPU_COUNT, or 1.
        progress: Show progress bars on stderr. Defaults to False.
    """

    channel_source: str | None = None
    q_source: str = "uniform"
    rates: list[float] = field(default_factory=list)
    n_range: list[int] = field(default_factory=list)
    tolerance: float = VERIFY_TOLERANCE
    esseen_c: float = ESSEEN_C
    berry_esseen_c: float = BERRY_ESSEEN_C
    eps: float = 0.0
    seed: int = 0
    trials: int = 10_000
    method: EnsembleMethod = EnsembleMethod.EXACT_TYPES
    maximal: bool = False
    bits: bool = False
    law_source: str | None = None
    threshold: float | None = None
    exponent: float | None = None
    output: str | None = None
    sidecar: str | None = None
    hdf5: str | None = None
    cpu_count: int | None = field(default_factory=cpu_count_from_environment)
    progress: bool = False

    def __post_init__(self):
        for name in ("tolerance", "esseen_c", "berry_esseen_c"):
            if getattr(self, name) <= 0:
                msg = f"{name} must be positive, got {getattr(self, name)}."
                raise ConfigParseError(msg)
        if self.eps < 0:
            msg = f"eps must be nonnegative, got {self.eps}."
            raise ConfigParseError(msg)
        if self.trials < 1:
            msg = f"At least one trial is required, got {self.trials}."
            raise ConfigParseError(msg)
        if any(n < 1 for n in self.n_range):
            msg = "Blocklengths must be positive."
            raise ConfigParseError(msg)
        if any(rate < 0 for rate in self.rates):
            msg = "Rates must be nonnegative."
            raise ConfigParseError(msg)
        if self.channel_source is not None and not PresetParser.matches(self.channel_source) and not os.path.isfile(self.channel_source):
            msg = f"{self.channel_source!r} is neither a channel preset nor an existing file."
            raise ConfigParseError(msg)
        if self.law_source is not None and not os.path.isfile(self.law_source):
            msg = f"The law document {self.law_source!r} does not exist."
            raise ConfigParseError(msg)
        if isinstance(self.method, str):
            try:
                self.method = EnsembleMethod(self.method)
            except ValueError as e:
                msg = f"Unknown ensemble method {self.method!r}; use one of {[m.value for m in EnsembleMethod]}."
                raise ConfigParseError(msg) from e

    def require(self, *names: str) -> None:
        """Raise a ConfigParseError naming the first of `names` that is unset or empty."""
        for name in names:
            value = getattr(self, name)
            if value is None or (isinstance(value, list) and not value):
                msg = f"This subcommand needs {name.replace('_', ' ')}."
                raise ConfigParseError(msg)

    def load(self) -> tuple[Channel, InputDistribution | None]:
        """The channel and the input distribution; None when the distribution is to be optimized."""
        self.require("channel_source")
        channel, document_q = parse_channel(self.channel_source)
        q = parse_input_distribution(self.q_source, channel, document_q)
        _log.info(f"Loaded {channel.name} ({channel.num_inputs} inputs, {channel.num_outputs} outputs), Q from {self.q_source!r}.")
        return channel, q
