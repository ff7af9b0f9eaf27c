"""Option parsing helpers, INI config files, manifests and CSV output."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .core import ParameterError, make_mode
from .kernel import _jsonable, fmt


class ConfigError(ParameterError):
    """Invalid configuration file or option value."""


def parse_mode(text: str):
    """``kind:key=value,...`` -> ModeFunction, e.g. ``parabolic:T=1``."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"mode parameter {item!r} is not key=value")
        try:
            params[key.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"mode parameter {key!r} is not a number") from exc
    if kind not in ("parabolic", "gaussian"):
        raise ConfigError(f"unknown mode kind {kind!r} (use parabolic or gaussian)")
    return make_mode(kind, **params)


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def parse_ints(text) -> list[int]:
    vals = parse_floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def parse_weights(text: str) -> dict:
    """``m:w,m:w`` -> {m: w}."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        m, sep, w = item.partition(":")
        if not sep:
            raise ConfigError(f"mixture entry {item!r} is not photon_number:weight")
        try:
            out[int(m)] = float(w)
        except ValueError as exc:
            raise ConfigError(f"bad mixture entry {item!r}") from exc
    return out


def load_section(path, section: str) -> dict:
    """Read ``[section]`` (plus ``[DEFAULT]``) of an INI file as option -> string.

    Keys may use dashes or underscores; they are normalized to underscores.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    items = dict(cp.defaults())
    if cp.has_section(section):
        items.update(cp.items(section))
    return {k.replace("-", "_"): v for k, v in items.items()}


def canonical_json(data) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"))


def content_hash(data) -> str:
    """git-style object hash (``blob <len>\\0<content>``) of the canonical JSON, sha256."""
    body = canonical_json(data).encode("utf-8")
    return "sha256:" + hashlib.sha256(b"blob %d\0" % len(body) + body).hexdigest()


def file_hash(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_csv(path, header, rows) -> Path:
    """UTF-8, '\\n' line endings, round-trip float formatting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v + 0.0)  # no "-0"
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    if v is None:
        return ""
    return fmt(v)


def write_matrix_csv(path, points, values) -> Path:
    """Matrix on a grid: header ``y\\x`` then x values; rows start with y.

    Complex matrices get a real and an imaginary column per x.
    """
    values = np.asarray(values)
    cplx = np.iscomplexobj(values)
    header = ["y\\x"] + [fmt(x) for x in points for _ in ((0, 1) if cplx else (0,))]
    rows = []
    for j, y in enumerate(points):
        row = [float(y)]
        for i in range(len(points)):
            v = values[i, j]
            row += [float(v.real), float(v.imag)] if cplx else [float(v)]
        rows.append(row)
    return write_csv(path, header, rows)


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
