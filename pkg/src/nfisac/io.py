"""Plain-text matrix files.

Each matrix is a header line ``<name> <rows> <cols>`` followed by ``rows``
lines of ``cols`` complex entries written as ``re im`` pairs, row-major.
Lines starting with ``#`` are comments.  Vectors are stored as columns.

An SDP instance is a sequence of such matrices plus a few keyword lines::

    sdp <num_blocks> <num_constraints>
    C[0] n n
    ...
    constraint <i> <b> [label]
    A[i,j] n n
    ...
"""
from __future__ import annotations

import io as _io
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .sdp import SdpConstraint, SdpProblem


class MatrixFormatError(ValueError):
    pass


def _fmt(z: complex) -> str:
    return f"{z.real:.17g} {z.imag:.17g}"


def write_matrix(fh: TextIO, name: str, a) -> None:
    if any(c.isspace() for c in name) or not name:
        raise ValueError(f"matrix name must be a non-empty token, got {name!r}")
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError("only vectors and matrices can be written")
    fh.write(f"{name} {a.shape[0]} {a.shape[1]}\n")
    for row in a:
        fh.write(" ".join(_fmt(z) for z in row) + "\n")


def _lines(fh: TextIO):
    for lineno, raw in enumerate(fh, 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _read_body(lines, name, rows, cols, lineno):
    out = np.empty((rows, cols), dtype=complex)
    for i in range(rows):
        try:
            ln, line = next(lines)
        except StopIteration:
            raise MatrixFormatError(f"{name}: expected {rows} rows after line {lineno}") from None
        vals = line.split()
        if len(vals) != 2 * cols:
            raise MatrixFormatError(f"line {ln}: {name} row {i} has {len(vals)} numbers, expected {2 * cols}")
        try:
            nums = np.array(vals, dtype=float)
        except ValueError as exc:
            raise MatrixFormatError(f"line {ln}: {exc}") from None
        out[i] = nums[0::2] + 1j * nums[1::2]
    return out


def _parse_header(line, lineno):
    parts = line.split()
    if len(parts) != 3:
        raise MatrixFormatError(f"line {lineno}: expected '<name> <rows> <cols>', got {line!r}")
    try:
        rows, cols = int(parts[1]), int(parts[2])
    except ValueError:
        raise MatrixFormatError(f"line {lineno}: bad dimensions in {line!r}") from None
    if rows < 0 or cols < 0:
        raise MatrixFormatError(f"line {lineno}: negative dimensions")
    return parts[0], rows, cols


def read_matrices(fh: TextIO) -> dict[str, np.ndarray]:
    """Read every matrix in ``fh`` into a name -> array mapping (order kept)."""
    out: dict[str, np.ndarray] = {}
    lines = _lines(fh)
    for lineno, line in lines:
        name, rows, cols = _parse_header(line, lineno)
        if name in out:
            raise MatrixFormatError(f"line {lineno}: duplicate matrix {name!r}")
        out[name] = _read_body(lines, name, rows, cols, lineno)
    return out


def save_matrices(path, items: Iterable[tuple[str, np.ndarray]], header: str = "") -> None:
    with open(path, "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        for name, a in items:
            write_matrix(fh, name, a)


def load_matrices(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        return read_matrices(fh)


def beamformer_items(bf) -> list[tuple[str, np.ndarray]]:
    """Named arrays for a :class:`~nfisac.metrics.BeamformerSet`."""
    items = [(f"f[{k}]", f) for k, f in enumerate(bf.tx_users)]
    items += [(f"S[{m}]", s) for m, s in enumerate(bf.tx_sensing_cov)]
    if bf.tx_sensing_vec is not None:
        items += [(f"s[{m}]", s) for m, s in enumerate(bf.tx_sensing_vec)]
    if bf.tx_residual is not None:
        items.append(("S_residual", bf.tx_residual))
    items += [(f"w[{l}]", w) for l, w in enumerate(bf.rx_uplink)]
    items += [(f"u[{m}]", u) for m, u in enumerate(bf.rx_sensing)]
    return items


# -- SDP instances ----------------------------------------------------------

def write_sdp(fh: TextIO, problem: SdpProblem) -> None:
    fh.write(f"sdp {len(problem.block_dims)} {len(problem.constraints)}\n")
    for j, c in enumerate(problem.objective):
        write_matrix(fh, f"C[{j}]", c)
    for i, con in enumerate(problem.constraints):
        label = f" {con.label}" if con.label else ""
        fh.write(f"constraint {i} {con.b:.17g}{label}\n")
        for j, a in enumerate(con.coeffs):
            if a is not None:
                write_matrix(fh, f"A[{i},{j}]", a)


def read_sdp(fh: TextIO) -> SdpProblem:
    lines = _lines(fh)
    try:
        lineno, first = next(lines)
    except StopIteration:
        raise MatrixFormatError("empty SDP file") from None
    parts = first.split()
    if len(parts) != 3 or parts[0] != "sdp":
        raise MatrixFormatError(f"line {lineno}: expected 'sdp <blocks> <constraints>'")
    nb, m = int(parts[1]), int(parts[2])
    objective: list[np.ndarray | None] = [None] * nb
    coeffs: list[list] = [[None] * nb for _ in range(m)]
    rhs: list[float | None] = [None] * m
    labels = [""] * m
    for lineno, line in lines:
        if line.startswith("constraint "):
            parts = line.split(maxsplit=3)
            i = int(parts[1])
            if not 0 <= i < m:
                raise MatrixFormatError(f"line {lineno}: constraint index {i} out of range")
            rhs[i] = float(parts[2])
            labels[i] = parts[3] if len(parts) > 3 else ""
            continue
        name, rows, cols = _parse_header(line, lineno)
        a = _read_body(lines, name, rows, cols, lineno)
        if name.startswith("C[") and name.endswith("]"):
            objective[int(name[2:-1])] = a
        elif name.startswith("A[") and name.endswith("]"):
            i, j = (int(v) for v in name[2:-1].split(","))
            coeffs[i][j] = a
        else:
            raise MatrixFormatError(f"line {lineno}: unexpected matrix {name!r} in SDP file")
    missing = [j for j, c in enumerate(objective) if c is None]
    if missing:
        raise MatrixFormatError(f"objective blocks missing: {missing}")
    if any(b is None for b in rhs):
        raise MatrixFormatError("some constraints have no 'constraint' line")
    dims = [c.shape[0] for c in objective]
    real = all(np.all(c.imag == 0) for c in objective) and all(
        a is None or np.all(a.imag == 0) for row in coeffs for a in row)
    conv = (lambda a: a.real.copy()) if real else (lambda a: a)
    cons = [SdpConstraint([None if a is None else conv(a) for a in row], b, lab)
            for row, b, lab in zip(coeffs, rhs, labels)]
    return SdpProblem(dims, [conv(c) for c in objective], cons)


def dump_sdp(problem: SdpProblem, path=None) -> str | None:
    """Write ``problem`` to ``path``; with no path, return the text."""
    if path is None:
        buf = _io.StringIO()
        write_sdp(buf, problem)
        return buf.getvalue()
    with open(Path(path), "w") as fh:
        write_sdp(fh, problem)
    return None


def load_sdp(path_or_text) -> SdpProblem:
    if isinstance(path_or_text, str) and path_or_text.lstrip().startswith("sdp "):
        return read_sdp(_io.StringIO(path_or_text))
    with open(path_or_text) as fh:
        return read_sdp(fh)
