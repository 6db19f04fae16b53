"""CSV and JSON readers/writers with provenance headers.

Every file starts with ``#`` comment lines carrying the toolkit version, the
configuration hash and the seed. Readers skip those lines and report the
1-based file line of any malformed record.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .boundstates import LevelRow, LevelTable
from .rcsj import SwitchingHistogram
from .scattering import Spectrum

LEVEL_HEADER = ["bias_ratio", "w01_GHz", "w12_GHz", "w23_GHz", "d01", "d12", "d23"]
SPECTRUM_HEADER = ["freq_GHz", "transmission", "phase_rad"]
HISTOGRAM_HEADER = ["bin_low_uA", "bin_high_uA", "count"]


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path, self.line = str(path), line
        super().__init__(f"{path}: line {line}: {message}")


def _version() -> str:
    from . import __version__
    return __version__


def provenance(config_hash: str = "", seed=None, extra: dict | None = None) -> dict:
    meta = {"version": _version(), "config_sha256": config_hash or "none",
            "seed": "none" if seed is None else str(seed)}
    meta.update(extra or {})
    return meta


def _header_lines(meta: dict) -> str:
    return "".join(f"# {k}: {v}\n" for k, v in meta.items())


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _write(path, meta: dict, header: list, rows) -> str:
    buf = _io.StringIO()
    buf.write(_header_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _read(path, header: list) -> tuple[dict, list[tuple[int, list[str]]]]:
    meta, rows, seen_header = {}, [], False
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                key, _, val = stripped[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            fields = next(csv.reader([stripped]))
            if not seen_header:
                if [f.strip() for f in fields] != header:
                    raise ParseError(path, lineno, f"expected header {','.join(header)}")
                seen_header = True
                continue
            if len(fields) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(fields)}")
            rows.append((lineno, fields))
    if not seen_header:
        raise ParseError(path, 1, "missing header row")
    return meta, rows


def _float(path, lineno, text, allow_blank=False):
    text = text.strip()
    if allow_blank and text == "":
        return None
    try:
        v = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(path, lineno, f"non-finite value: {text!r}")
    return v


# -- levels -----------------------------------------------------------------------

def write_levels(table: LevelTable, path=None, meta: dict | None = None) -> str:
    rows = []
    for r in table.rows:
        ghz = [None if w is None else w / (2 * math.pi * 1e9) for w in r.omega]
        rows.append([_num(r.bias_ratio), *map(_num, ghz), *map(_num, r.delta)])
    return _write(path, meta or provenance(), LEVEL_HEADER, rows)


def read_levels(path) -> LevelTable:
    _, rows = _read(path, LEVEL_HEADER)
    out = []
    for lineno, f in rows:
        vals = [_float(path, lineno, x, allow_blank=k > 0) for k, x in enumerate(f)]
        omega = [None if w is None else w * 2 * math.pi * 1e9 for w in vals[1:4]]
        n_bound = 1 + sum(w is not None for w in omega)  # lower bound from the visible columns
        out.append(LevelRow(vals[0], n_bound, omega, vals[4:7]))
    return LevelTable(out)


# -- spectra ----------------------------------------------------------------------

def write_spectrum(spec: Spectrum, path=None, meta: dict | None = None) -> str:
    rows = [[_num(f / 1e9), _num(t), _num(ph)]
            for f, t, ph in zip(spec.frequency, spec.transmission, spec.phase)]
    return _write(path, meta or provenance(), SPECTRUM_HEADER, rows)


def read_spectrum(path) -> Spectrum:
    _, rows = _read(path, SPECTRUM_HEADER)
    if len(rows) < 2:
        raise ParseError(path, rows[0][0] if rows else 1, "a spectrum needs at least 2 rows")
    data = np.array([[_float(path, n, x) for x in f] for n, f in rows])
    bad = np.nonzero(np.diff(data[:, 0]) <= 0)[0]
    if len(bad):
        raise ParseError(path, rows[bad[0] + 1][0], "frequencies must be strictly increasing")
    return Spectrum(2 * math.pi * 1e9 * data[:, 0], data[:, 1], data[:, 2])


# -- histograms -------------------------------------------------------------------

def write_histogram(hist: SwitchingHistogram, path=None, meta: dict | None = None) -> str:
    counts = hist.counts
    integer = np.issubdtype(np.asarray(counts).dtype, np.integer)
    rows = [[_num(lo * 1e6), _num(hi * 1e6), str(int(c)) if integer else _num(c)]
            for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], counts)]
    return _write(path, meta or provenance(), HISTOGRAM_HEADER, rows)


def read_histogram(path) -> SwitchingHistogram:
    meta, rows = _read(path, HISTOGRAM_HEADER)
    if not rows:
        raise ParseError(path, 1, "histogram has no bins")
    data = np.array([[_float(path, n, x) for x in f] for n, f in rows])
    for k in range(1, len(rows)):
        if not math.isclose(data[k, 0], data[k - 1, 1], rel_tol=1e-9, abs_tol=1e-12):
            raise ParseError(path, rows[k][0], "bins must be contiguous")
    for (n, _), lo, hi, c in zip(rows, data[:, 0], data[:, 1], data[:, 2]):
        if hi <= lo:
            raise ParseError(path, n, "bin_high_uA must exceed bin_low_uA")
        if c < 0:
            raise ParseError(path, n, "negative count")
    edges = np.concatenate([data[:, 0], data[-1:, 1]]) * 1e-6
    counts = data[:, 2]
    if np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    total = meta.get("n_total")
    n_total = int(total) if total and total.isdigit() else int(round(float(np.sum(counts))))
    return SwitchingHistogram(edges, counts, n_total, meta.get("method", "measured"))


# -- JSON -------------------------------------------------------------------------

def write_json(obj: dict, path=None, meta: dict | None = None) -> str:
    doc = {"provenance": meta or provenance(), **obj}
    text = json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")
