"""CSV/JSON artifacts with a self-describing config header.

A table is an ordered mapping ``column name -> list of values`` (ints, floats
or strings).  CSV floats carry 17 significant digits so that parsing restores
them exactly.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

CONFIG_PREFIX = "# config: "


def canonical_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _check_table(table: dict) -> int:
    lengths = {len(v) for v in table.values()}
    if len(lengths) > 1:
        raise ValueError(f"ragged table: column lengths {sorted(lengths)}")
    for name in table:
        if "," in name or "\n" in name:
            raise ValueError(f"column name {name!r} contains a delimiter")
    return lengths.pop() if lengths else 0


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    if isinstance(v, float) or (hasattr(v, "dtype") and v.dtype.kind == "f"):
        text = format(float(v), ".17g")
        if math.isfinite(float(v)) and not any(c in text for c in ".e"):
            text += ".0"
        return text
    text = str(v)
    if "," in text or "\n" in text:
        raise ValueError(f"string cell {text!r} contains a delimiter")
    return text


def parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def to_csv(table: dict, config: dict) -> str:
    n = _check_table(table)
    names = list(table)
    lines = [CONFIG_PREFIX + canonical_config(config), ",".join(names)]
    for i in range(n):
        lines.append(",".join(format_value(table[c][i]) for c in names))
    return "\n".join(lines) + "\n"


def to_json(table: dict, config: dict) -> str:
    _check_table(table)
    cols = {name: [parse_value(format_value(v)) for v in values] for name, values in table.items()}
    return json.dumps({"config": config, "columns": cols}, sort_keys=False, indent=1) + "\n"


def parse_csv(text: str) -> tuple[dict, dict]:
    """Inverse of :func:`to_csv`: returns ``(table, config)``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CONFIG_PREFIX):
        raise ValueError("missing config header line")
    config = json.loads(lines[0][len(CONFIG_PREFIX):])
    if len(lines) < 2 or not lines[1]:
        return {}, config
    names = lines[1].split(",")
    table = {name: [] for name in names}
    for line in lines[2:]:
        cells = line.split(",")
        if len(cells) != len(names):
            raise ValueError(f"row has {len(cells)} cells, expected {len(names)}")
        for name, cell in zip(names, cells):
            table[name].append(parse_value(cell))
    return table, config


def parse_json(text: str) -> tuple[dict, dict]:
    data = json.loads(text)
    return data["columns"], data["config"]


def emit(table: dict, fmt: str = "csv", path=None, config: dict | None = None) -> None:
    """Write ``table`` as CSV or JSON to ``path`` (stdout when None or ``-``)."""
    config = {} if config is None else config
    if fmt == "csv":
        text = to_csv(table, config)
    elif fmt == "json":
        text = to_json(table, config)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
