import json
from typing import TextIO

from rcbound.concentration import DiscreteLaw
from rcbound.errors import ConfigParseError


def parse_law(file_: TextIO) -> DiscreteLaw:
    """Read a finite-support law.

    Args:
        file_: A JSON object with "atoms" and "probs" lists and an optional "p_neg_inf".

    Returns:
        The law, with atoms merged within 1e-12.
    """
    try:
        document = json.load(file_)
    except json.JSONDecodeError as e:
        msg = f"Law document is not valid JSON: {e}."
        raise ConfigParseError(msg) from e
    if not isinstance(document, dict) or not {"atoms", "probs"} <= document.keys():
        msg = 'A law document must be a JSON object with "atoms" and "probs".'
        raise ConfigParseError(msg)
    return DiscreteLaw(document["atoms"], document["probs"], float(document.get("p_neg_inf", 0.0)))
