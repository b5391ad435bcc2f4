"""On-disk formats.

Matrix CSV (``hdrouter-matrix/1``)::

    # schema: hdrouter-matrix/1
    # config_hash: <hex>          (optional)
    l_A\\l_B,-2,-1,0,1,2
    -2,0,0,0,0,113
    ...

Element CSV (``hdrouter-elements/1``), one record per measured setting::

    # schema: hdrouter-elements/1
    record,l,l2,phase,count
    background,,,,1234
    diag,-1,,,5012
    super,-1,0,0,2518        (phase k means k*pi/2 on photon A)

The order of the ``diag`` records fixes the index list; every pair
``l`` before ``l2`` in that order needs all four phases. Cells are
non-negative integers for raw data or reals for expected counts.

Reports are JSON with a ``schema`` field; time series are CSV with the same
``#`` header lines as matrices.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from ..measurement import CoincidenceMatrix
from ..witness import DensityElementSet, ElementCounts, estimate_density_elements

MATRIX_SCHEMA = "hdrouter-matrix/1"
ELEMENTS_SCHEMA = "hdrouter-elements/1"
SERIES_SCHEMA = "hdrouter-series/1"
REPORT_SCHEMA = "hdrouter-report/1"


class DataError(ValueError):
    """A data file violates its schema; messages carry the line number."""


def _num(x) -> str:
    x = float(x)
    if math.isfinite(x) and x == int(x) and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def _header(schema: str, meta: dict | None) -> list:
    lines = [f"# schema: {schema}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def _write(path: Path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="")


# matrices --------------------------------------------------------------------

def matrix_to_csv(m: CoincidenceMatrix, meta: dict | None = None) -> str:
    lines = _header(MATRIX_SCHEMA, meta)
    lines.append("l_A\\l_B," + ",".join(str(int(l)) for l in m.ells_b))
    for la, row in zip(m.ells_a, m.counts):
        lines.append(f"{int(la)}," + ",".join(_num(c) for c in row))
    return "\n".join(lines) + "\n"


def write_matrix(path, m: CoincidenceMatrix, meta: dict | None = None):
    _write(path, matrix_to_csv(m, meta))


def _split_header(text: str, source: str):
    meta, body = {}, []
    for no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise DataError(f"{source}:{no}: header line is not '# key: value'")
            meta[key.strip()] = value.strip()
        else:
            body.append((no, line))
    return meta, body


def _cell(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{where}: non-finite count {text!r}")
    if v < 0:
        raise DataError(f"{where}: negative count {text!r}")
    return v


def _int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{where}: not an integer mode label: {text!r}") from None


def parse_matrix(text: str, source: str = "<matrix>") -> CoincidenceMatrix:
    meta, body = _split_header(text, source)
    if meta.get("schema") != MATRIX_SCHEMA:
        raise DataError(f"{source}: expected '# schema: {MATRIX_SCHEMA}'")
    if not body:
        raise DataError(f"{source}: no header row")
    no, head = body[0]
    cols = head.split(",")
    if len(cols) < 2:
        raise DataError(f"{source}:{no}: header row needs at least one l_B column")
    ells_b = [_int(c, f"{source}:{no}") for c in cols[1:]]
    if len(set(ells_b)) != len(ells_b):
        raise DataError(f"{source}:{no}: duplicate l_B labels")
    ells_a, rows = [], []
    for no, line in body[1:]:
        cells = line.split(",")
        if len(cells) != len(cols):
            raise DataError(f"{source}:{no}: expected {len(cols)} fields, found {len(cells)}")
        la = _int(cells[0], f"{source}:{no}")
        if la in ells_a:
            raise DataError(f"{source}:{no}: duplicate l_A label {la}")
        ells_a.append(la)
        rows.append([_cell(c, f"{source}:{no} cell (l_A={la}, l_B={lb})")
                     for c, lb in zip(cells[1:], ells_b)])
    if not rows:
        raise DataError(f"{source}: no data rows")
    return CoincidenceMatrix(np.array(ells_a), np.array(ells_b), np.array(rows))


# element records -------------------------------------------------------------

def elements_to_csv(el: DensityElementSet, meta: dict | None = None) -> str:
    if el.counts is None:
        raise ValueError("element set has no raw counts to write")
    c = el.counts
    lines = _header(ELEMENTS_SCHEMA, meta)
    lines.append("record,l,l2,phase,count")
    lines.append(f"background,,,,{_num(c.background)}")
    for l, n in zip(el.ells, c.diag):
        lines.append(f"diag,{l},,,{_num(n)}")
    iu, ju = np.triu_indices(len(el.ells), 1)
    for p, (i, j) in enumerate(zip(iu, ju)):
        for k in range(4):
            lines.append(f"super,{el.ells[i]},{el.ells[j]},{k},{_num(c.phase[p, k])}")
    return "\n".join(lines) + "\n"


def write_elements(path, el: DensityElementSet, meta: dict | None = None):
    _write(path, elements_to_csv(el, meta))


def parse_elements(text: str, source: str = "<elements>",
                   normalization: str = "subspace") -> DensityElementSet:
    meta, body = _split_header(text, source)
    if meta.get("schema") != ELEMENTS_SCHEMA:
        raise DataError(f"{source}: expected '# schema: {ELEMENTS_SCHEMA}'")
    if not body or body[0][1].replace(" ", "") != "record,l,l2,phase,count":
        no = body[0][0] if body else 0
        raise DataError(f"{source}:{no}: header row must be 'record,l,l2,phase,count'")
    background, diag, supers = None, {}, {}
    ells = []
    for no, line in body[1:]:
        f = [x.strip() for x in line.split(",")]
        where = f"{source}:{no}"
        if len(f) != 5:
            raise DataError(f"{where}: expected 5 fields, found {len(f)}")
        kind = f[0]
        count = _cell(f[4], f"{where} ({kind} record)")
        if kind == "background":
            if background is not None:
                raise DataError(f"{where}: second background record")
            background = count
        elif kind == "diag":
            l = _int(f[1], where)
            if l in diag:
                raise DataError(f"{where}: duplicate diag record for l={l}")
            diag[l] = count
            ells.append(l)
        elif kind == "super":
            l, l2 = _int(f[1], where), _int(f[2], where)
            k = _int(f[3], where)
            if k not in range(4):
                raise DataError(f"{where}: phase index {k} not in 0..3")
            key = (l, l2, k)
            if key in supers:
                raise DataError(f"{where}: duplicate super record {key}")
            supers[key] = (count, no)
        else:
            raise DataError(f"{where}: unknown record type {kind!r}")
    if not ells:
        raise DataError(f"{source}: no diag records")
    pos = {l: i for i, l in enumerate(ells)}
    iu, ju = np.triu_indices(len(ells), 1)
    phase = np.zeros((len(iu), 4))
    for p, (i, j) in enumerate(zip(iu, ju)):
        for k in range(4):
            key = (ells[i], ells[j], k)
            if key not in supers:
                raise DataError(f"{source}: missing super record l={ells[i]}, l2={ells[j]}, "
                                f"phase={k}")
            phase[p, k] = supers.pop(key)[0]
    for (l, l2, k), (_, no) in supers.items():
        if l not in pos or l2 not in pos:
            raise DataError(f"{source}:{no}: super record uses modes outside the diag index set")
        raise DataError(f"{source}:{no}: super record ({l}, {l2}) is out of index-list order")
    counts = ElementCounts(np.array([diag[l] for l in ells]),
                           np.asarray(0.0 if background is None else background), phase)
    return estimate_density_elements(counts, ells, normalization=normalization)


def ingest_counts(path, normalization: str = "subspace"):
    """Parse a matrix or element file, dispatching on its schema header."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    meta, _ = _split_header(text, str(path))
    schema = meta.get("schema")
    if schema == MATRIX_SCHEMA:
        return parse_matrix(text, str(path))
    if schema == ELEMENTS_SCHEMA:
        return parse_elements(text, str(path), normalization)
    raise DataError(f"{path}:1: unknown or missing schema header {schema!r}")


# reports and series ----------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def report_to_json(record: dict) -> str:
    body = {"schema": REPORT_SCHEMA, **record}
    return json.dumps(_jsonable(body), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(path, record: dict):
    _write(path, report_to_json(record))


def series_to_csv(columns: dict, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for line in _header(SERIES_SCHEMA, meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    for row in zip(*(columns[n] for n in names)):
        w.writerow([_num(v) if isinstance(v, (int, float, np.number)) and not isinstance(v, bool)
                     else v for v in row])
    return buf.getvalue()


def write_series(path, columns: dict, meta: dict | None = None):
    _write(path, series_to_csv(columns, meta))
