"""Deterministic report serialization: canonical JSON, stable float text.

Every float in an emitted report is rendered with 17 significant digits
(``%.17g``), enough to round-trip a double exactly, so a report is a
byte-stable function of its data.  The stdlib encoder's ``repr``-based
float text is avoided on purpose, and non-finite values are rejected:
JSON has no spelling for them, and a report that contains one is a bug
in whatever produced it.
"""

import json
import math

import numpy as np

from .errors import DomainError
from .grids import atomic_write

__all__ = ["format_float", "json_text", "dump_json"]


def format_float(value):
    """One finite double as text, 17 significant digits."""
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value!r} has no place in a report")
    return "%.17g" % value


def json_text(value):
    """Canonical JSON for nested dict/list/scalar data, 2-space indented.

    Dict keys must be strings and keep their insertion order; floats go
    through :func:`format_float`.  Unsupported types raise DomainError.
    """
    pieces = []
    _render(value, 0, pieces)
    return "".join(pieces)


def _render(value, indent, out):
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        _render_container(value.items(), indent, out, "{", "}", keyed=True)
    elif isinstance(value, (list, tuple)):
        _render_container(value, indent, out, "[", "]", keyed=False)
    else:
        raise DomainError(f"cannot serialize {type(value).__name__} value {value!r}")


def _render_container(items, indent, out, open_token, close_token, keyed):
    items = list(items)
    if not items:
        out.append(open_token + close_token)
        return
    pad = "  " * (indent + 1)
    out.append(open_token + "\n")
    for position, item in enumerate(items):
        out.append(pad)
        if keyed:
            key, item = item
            if not isinstance(key, str):
                raise DomainError(f"JSON object keys must be strings, got {key!r}")
            out.append(json.dumps(key) + ": ")
        _render(item, indent + 1, out)
        out.append(",\n" if position + 1 < len(items) else "\n")
    out.append("  " * indent + close_token)


def dump_json(path, value):
    """Atomically write ``value`` as canonical JSON with a trailing newline."""
    text = json_text(value) + "\n"
    with atomic_write(path) as handle:
        handle.write(text)
    return text
