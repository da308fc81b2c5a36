"""Text formats: Hamiltonian files, CSV tables, JSON estimate export.

Hamiltonian files come in two flavours. The matrix form::

    2
    1,0 0,0
    0,0 -1,0

has the dimension on line 1 followed by one row per line of ``re,im``
pairs. The spectral form::

    spectrum
    -1 1

lists eigenvalues; the eigenbasis is the standard basis.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import HamiltonianFormatError
from .geometry import HermitianObservable

CSV_FORMAT = "{:.9g}"


def parse_hamiltonian(text: str) -> HermitianObservable:
    lines = text.split("\n")
    # tolerate a trailing newline and blank trailing lines
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise HamiltonianFormatError("empty file", 1)

    head = lines[0].strip()
    if head.lower() == "spectrum":
        if len(lines) < 2:
            raise HamiltonianFormatError("missing eigenvalue line", 2)
        if len(lines) > 2:
            raise HamiltonianFormatError("unexpected content after eigenvalues", 3)
        try:
            levels = [float(tok) for tok in lines[1].split()]
        except ValueError as exc:
            raise HamiltonianFormatError(f"bad eigenvalue: {exc}", 2) from None
        if len(levels) < 2:
            raise HamiltonianFormatError("need at least two eigenvalues", 2)
        return HermitianObservable.from_levels(levels)

    try:
        dim = int(head)
    except ValueError:
        raise HamiltonianFormatError(f"expected dimension or 'spectrum', got {head!r}", 1) from None
    if dim < 2:
        raise HamiltonianFormatError(f"dimension must be at least 2, got {dim}", 1)
    if len(lines) != dim + 1:
        raise HamiltonianFormatError(
            f"expected {dim} matrix rows, found {len(lines) - 1}", min(len(lines), dim + 1) + 1
        )

    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        lineno = i + 2
        toks = lines[i + 1].split()
        if len(toks) != dim:
            raise HamiltonianFormatError(f"expected {dim} entries, found {len(toks)}", lineno)
        for j, tok in enumerate(toks):
            parts = tok.split(",")
            if len(parts) != 2:
                raise HamiltonianFormatError(f"entry {tok!r} is not a 're,im' pair", lineno)
            try:
                m[i, j] = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                raise HamiltonianFormatError(f"entry {tok!r} is not numeric", lineno) from None
    try:
        return HermitianObservable(m)
    except ValueError as exc:
        raise HamiltonianFormatError(str(exc)) from None


def read_hamiltonian(path) -> HermitianObservable:
    return parse_hamiltonian(Path(path).read_text(encoding="utf-8"))


def format_hamiltonian(h: HermitianObservable) -> str:
    rows = [str(h.dim)]
    for row in h.entries:
        rows.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(rows) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(CSV_FORMAT.format(float(v)) for v in row))
    return "\n".join(out) + "\n"


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def encode_value(value):
    """JSON-ready form: complex matrices become row-major lists of [re, im] pairs."""
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(value)]
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
