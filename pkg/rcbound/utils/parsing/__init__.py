import math

import numpy as np

from rcbound.errors import ConfigParseError


def _number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        msg = f"Cannot read {what} from {text!r}."
        raise ConfigParseError(msg) from e
    if not math.isfinite(value):
        msg = f"The {what} must be finite, got {text!r}."
        raise ConfigParseError(msg)
    return value


def parse_n_range(text: str) -> list[int]:
    """Blocklengths from `n`, `lo:hi` or `lo:hi:step`, both ends inclusive."""
    parts = text.split(":")
    try:
        numbers = [int(part) for part in parts]
    except ValueError as e:
        msg = f"Blocklength ranges are written lo:hi[:step] with integers, got {text!r}."
        raise ConfigParseError(msg) from e
    if len(numbers) == 1:
        numbers = [numbers[0], numbers[0], 1]
    elif len(numbers) == 2:  # noqa: PLR2004
        numbers.append(1)
    elif len(numbers) != 3:  # noqa: PLR2004
        msg = f"Blocklength ranges are written lo:hi[:step], got {text!r}."
        raise ConfigParseError(msg)
    low, high, step = numbers
    if low < 1 or step < 1 or high < low:
        msg = f"The blocklength range {text!r} is empty or not positive."
        raise ConfigParseError(msg)
    return list(range(low, high + 1, step))


def parse_rates(text: str, bits: bool = False) -> list[float]:
    """Rates from `r`, a comma list, or `lo:hi:steps` (inclusive linspace); converted from bits if asked."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:  # noqa: PLR2004
            msg = f"Rate ranges are written lo:hi:steps, got {text!r}."
            raise ConfigParseError(msg)
        low, high = _number(parts[0], "rate"), _number(parts[1], "rate")
        steps = int(_number(parts[2], "number of rates"))
        if steps < 1 or high < low:
            msg = f"The rate range {text!r} is empty."
            raise ConfigParseError(msg)
        rates = np.linspace(low, high, steps).tolist()
    else:
        rates = [_number(part, "rate") for part in text.split(",")]
    if any(rate < 0 for rate in rates):
        msg = f"Rates must be nonnegative, got {text!r}."
        raise ConfigParseError(msg)
    return [rate * math.log(2.0) for rate in rates] if bits else rates
