"""SDPA sparse format (``.dat-s``) for assembled relaxations.

The moment view ``min sum_a f_a y_a  s.t.  A_0 + sum_{a != 0} y_a A_a PSD``
is written in SDPA's primal form ``min c'x  s.t.  sum_k x_k F_k - F_0 PSD``
with ``x = (y_a)_{a != 0}``, ``c = f`` and ``F_0 = -A_0``; the constant
``f_0`` is recorded in a comment. Metadata comments start with ``"`` and are
read back when present; other comment lines (``"`` or ``*``) are ignored.
"""

from __future__ import annotations

import os
import re

import numpy as np

from ..relaxation import BlockSdp

_SPLIT = re.compile(r"[\s,{}()]+")


class SdpaFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _num(v: float) -> str:
    # 17 significant digits round-trip every double
    s = format(float(v), ".17g")
    return "0" if s in ("0", "-0") else s


def format_sdpa(sdp: BlockSdp) -> str:
    out = ['"popsdp moment relaxation in SDPA sparse format']
    if sdp.nvars is not None:
        out.append(f'"nvars {sdp.nvars}')
    if sdp.order is not None:
        out.append(f'"order {sdp.order}')
    out.append(f'"offset {_num(sdp.offset)}')
    for i, lab in enumerate(sdp.labels):
        out.append(f'"label {i + 1} {lab}')
    out.append(f'"nnz {len(sdp.values)}')
    out.append(str(sdp.num_constraints))
    out.append(str(len(sdp.block_sizes)))
    out.append(" ".join(str(s) for s in sdp.block_sizes))
    out.append(" ".join(_num(v) for v in sdp.rhs[1:]) if sdp.num_constraints else "")
    for (k, b, r, c), v in zip(sdp.entries, sdp.values):
        v = -v if k == 0 else v
        out.append(f"{k} {b + 1} {r + 1} {c + 1} {_num(v)}")
    return "\n".join(out) + "\n"


def write_sdpa(sdp: BlockSdp, path) -> None:
    data = format_sdpa(sdp).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(data)


def parse_sdpa(text: str) -> BlockSdp:
    meta: dict = {"labels": {}}
    body: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith('"') or line.startswith("*"):
            _meta(line[1:].strip(), meta)
            continue
        fields = [f for f in _SPLIT.split(line) if f]
        if fields:
            body.append((lineno, fields))
    last = len(text.splitlines())
    if len(body) < 3:
        raise SdpaFormatError("file ends inside the header", last)

    def ints(idx, count=None):
        lineno, fields = body[idx]
        try:
            vals = [int(f) for f in fields]
        except ValueError:
            raise SdpaFormatError("expected integers", lineno) from None
        if count is not None and len(vals) < count:
            raise SdpaFormatError(f"expected {count} integers, found {len(vals)}", lineno)
        return vals, lineno

    m = ints(0, 1)[0][0]
    nb = ints(1, 1)[0][0]
    if m < 0 or nb < 1:
        raise SdpaFormatError("bad problem dimensions", body[0][0])
    sizes, ln_sizes = ints(2, nb)
    sizes = sizes[:nb]
    if any(s == 0 for s in sizes):
        raise SdpaFormatError("block size 0", ln_sizes)
    if any(s < 0 for s in sizes):
        raise SdpaFormatError("diagonal (negative-size) blocks are not supported", ln_sizes)
    # with no constraints the right-hand side line is empty
    start = 3 if m == 0 else 4
    rhs: list[float] = []
    if m:
        if len(body) < 4:
            raise SdpaFormatError("file ends inside the header", last)
        ln_rhs, rfields = body[3]
        try:
            rhs = [float(f) for f in rfields]
        except ValueError:
            raise SdpaFormatError("bad right-hand side", ln_rhs) from None
        if len(rhs) < m:
            raise SdpaFormatError(f"expected {m} right-hand sides, found {len(rhs)}", ln_rhs)
    rows, vals = [], []
    for lineno, fields in body[start:]:
        if len(fields) != 5:
            raise SdpaFormatError(f"entry needs 5 fields, found {len(fields)}", lineno)
        try:
            k, b, r, c = (int(f) for f in fields[:4])
            v = float(fields[4])
        except ValueError:
            raise SdpaFormatError("malformed entry", lineno) from None
        if not (0 <= k <= m and 1 <= b <= nb and 1 <= r <= sizes[b - 1] and 1 <= c <= sizes[b - 1]):
            raise SdpaFormatError("entry index out of range", lineno)
        if r > c:
            r, c = c, r
        rows.append((k, b - 1, r - 1, c - 1))
        vals.append(-v if k == 0 else v)
    if "nnz" in meta and meta["nnz"] != len(rows):
        raise SdpaFormatError(f"expected {meta['nnz']} entries, found {len(rows)} (truncated file?)", last)
    labels = None
    if meta["labels"] and sorted(meta["labels"]) == list(range(1, nb + 1)):
        labels = [meta["labels"][i] for i in range(1, nb + 1)]
    return BlockSdp(
        sizes,
        [meta.get("offset", 0.0)] + rhs[:m],
        np.array(rows, dtype=np.int64).reshape(-1, 4),
        np.array(vals),
        meta.get("nvars"),
        meta.get("order"),
        labels,
    )


def _meta(line: str, meta: dict) -> None:
    key, _, rest = line.partition(" ")
    try:
        if key in ("nvars", "order", "nnz"):
            meta[key] = int(rest)
        elif key == "offset":
            meta[key] = float(rest)
        elif key == "label":
            idx, _, lab = rest.partition(" ")
            meta["labels"][int(idx)] = lab
    except ValueError:
        pass  # free-form comment


def read_sdpa(path: str | os.PathLike) -> BlockSdp:
    with open(path, encoding="ascii") as fh:
        return parse_sdpa(fh.read())
