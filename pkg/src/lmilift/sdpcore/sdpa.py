"""SDPA sparse format (``.dat-s``) reader and writer.

SDPA states problems as ``min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0``, so the
constant matrix written under ``matno 0`` is ``-A_0``. Scalar (1 x 1) blocks
are written as diagonal blocks of size -1. Values are printed with ``repr`` so
a write/read cycle reproduces every float bit for bit.
"""

from __future__ import annotations

import io
import os
import re

import numpy as np

from .problem import ConicProblem


class SdpaFormatError(ValueError):
    def __init__(self, msg: str, line: int, column: int | None = None):
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {msg}")
        self.line = line
        self.column = column


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_sdpa(p: ConicProblem) -> str:
    out = io.StringIO()
    if p.tag:
        out.write(f"* tag: {p.tag}\n")
    out.write(f"{p.nvars} = mDIM\n")
    out.write(f"{len(p.blocks)} = nBLOCK\n")
    sizes = [(-1 if d == 1 else d) for d in p.block_sizes]
    out.write(" ".join(str(s) for s in sizes) + " = bLOCKsTRUCT\n")
    out.write(" ".join(_fmt(v) for v in p.c) + "\n")
    for k, blk in enumerate(p.blocks):
        d = blk.shape[1]
        for matno in range(p.nvars + 1):
            M = -blk[0] if matno == 0 else blk[matno]
            for i in range(d):
                for j in range(i, d):
                    v = M[i, j]
                    if v != 0:
                        out.write(f"{matno} {k + 1} {i + 1} {j + 1} {_fmt(v)}\n")
    return out.getvalue()


def write_sdpa(p: ConicProblem, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_sdpa(p))


def _numbers(line: str, lineno: int, kind=float) -> list:
    cleaned = re.sub(r"[,{}()]", " ", line.split("=")[0])
    vals = []
    col = 0
    for tok in cleaned.split():
        col = line.find(tok, col) + 1
        try:
            vals.append(kind(tok))
        except ValueError:
            raise SdpaFormatError(f"cannot parse {tok!r}", lineno, col) from None
    return vals


def loads_sdpa(text: str) -> ConicProblem:
    tag = ""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s:
            continue
        if s[0] in "\"*":
            m = re.match(r"[\"*]\s*tag:\s*(.*)$", s)
            if m and not lines:
                tag = m.group(1)
            continue
        lines.append((lineno, raw))
    if len(lines) < 4:
        raise SdpaFormatError("header needs mDIM, nBLOCK, block sizes and the cost vector", len(text.splitlines()) + 1)

    def header_int(idx, name):
        lineno, raw = lines[idx]
        vals = _numbers(raw, lineno, int)
        if len(vals) != 1:
            raise SdpaFormatError(f"expected a single integer {name}", lineno, 1)
        return vals[0]

    m = header_int(0, "mDIM")
    nblock = header_int(1, "nBLOCK")
    lineno, raw = lines[2]
    sizes = _numbers(raw, lineno, int)
    if len(sizes) != nblock:
        raise SdpaFormatError(f"expected {nblock} block sizes, got {len(sizes)}", lineno, 1)
    if any(s == 0 for s in sizes):
        raise SdpaFormatError("block size 0", lineno, 1)
    lineno, raw = lines[3]
    c = _numbers(raw, lineno, float)
    if len(c) != m:
        raise SdpaFormatError(f"expected {m} cost entries, got {len(c)}", lineno, 1)

    # negative sizes are diagonal blocks; split into 1x1 blocks
    layout = []  # (user block index, offset) for each (sdpa block, diagonal position)
    user_sizes = []
    for s in sizes:
        if s > 0:
            layout.append(("dense", len(user_sizes)))
            user_sizes.append(s)
        else:
            layout.append(("diag", len(user_sizes)))
            user_sizes.extend([1] * (-s))
    blocks = [np.zeros((m + 1, d, d)) for d in user_sizes]

    for lineno, raw in lines[4:]:
        parts = raw.split()
        if len(parts) != 5:
            raise SdpaFormatError(f"entry needs 5 fields, found {len(parts)}", lineno, 1)
        try:
            matno, blkno, i, j = (int(t) for t in parts[:4])
        except ValueError:
            raise SdpaFormatError("matno, blkno, i, j must be integers", lineno, 1) from None
        try:
            v = float(parts[4])
        except ValueError:
            raise SdpaFormatError(f"bad value {parts[4]!r}", lineno, raw.find(parts[4]) + 1) from None
        if not 0 <= matno <= m:
            raise SdpaFormatError(f"matno {matno} out of range 0..{m}", lineno, 1)
        if not 1 <= blkno <= nblock:
            raise SdpaFormatError(f"blkno {blkno} out of range 1..{nblock}", lineno, raw.find(parts[1]) + 1)
        d = abs(sizes[blkno - 1])
        if not (1 <= i <= d and 1 <= j <= d):
            raise SdpaFormatError(f"index ({i},{j}) outside block of size {d}", lineno, raw.find(parts[2]) + 1)
        if i > j:
            raise SdpaFormatError(
                f"lower-triangle entry ({i},{j}); only i <= j is allowed", lineno, raw.find(parts[2]) + 1
            )
        kind, base = layout[blkno - 1]
        val = -v if matno == 0 else v
        if kind == "dense":
            B = blocks[base]
            B[matno, i - 1, j - 1] = val
            B[matno, j - 1, i - 1] = val
        else:
            if i != j:
                raise SdpaFormatError("off-diagonal entry in a diagonal block", lineno, raw.find(parts[2]) + 1)
            blocks[base + i - 1][matno, 0, 0] = val
    return ConicProblem(m, np.array(c), blocks, tag)


def read_sdpa(path: str | os.PathLike) -> ConicProblem:
    with open(path, encoding="ascii") as fh:
        return loads_sdpa(fh.read())
