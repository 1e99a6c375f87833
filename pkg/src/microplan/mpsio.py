"""MPS and LP text export, an MPS reader, and solution-file exchange.

Exports are byte-stable: identical instances produce identical files.
Row and column names embed the equation tags and (family, unit, year,
hour) coordinates; names longer than the writer's limit are auto-shortened
with a sidecar JSON map written next to the model file.  The MPS layout
keeps fixed sections with whitespace-padded fields, readable by both
fixed- and free-format parsers (names never contain blanks).

Solution files use a minimal grammar, one entry per line:

    # comment
    objective <float>          (optional)
    <column name> <float>

Columns absent from the file default to zero.
"""

from __future__ import annotations

import json
import math
from typing import Optional

import numpy as np

from .model import BINARY, CONTINUOUS, INTEGER, MilpInstance, ModelError

_OBJ_ROW = "COST"


class MpsFormatError(ValueError):
    """Unparseable model or solution file."""


def _fmt(value: float) -> str:
    return repr(float(value))


def _shorten_names(names, prefix: str, limit: int):
    """Replace over-long names; returns (new_names, {short: original})."""
    out = []
    mapping = {}
    for i, name in enumerate(names):
        if len(name) <= limit:
            out.append(name)
        else:
            short = f"{prefix}{i:07d}"
            mapping[short] = name
            out.append(short)
    return out, mapping


def export_model(instance: MilpInstance, fmt: str, path,
                 max_name_len: int = 255) -> str:
    """Write the instance as 'mps' or 'lp'; returns the written path."""
    if fmt == "mps":
        return write_mps(instance, path, max_name_len=max_name_len)
    if fmt == "lp":
        return write_lp(instance, path, max_name_len=max_name_len)
    raise MpsFormatError(f"unknown export format {fmt!r} (use mps or lp)")


def _export_names(instance: MilpInstance, path, max_name_len: int):
    rows, row_map = _shorten_names(instance.row_labels, "R", max_name_len)
    cols, col_map = _shorten_names(instance.col_names, "C", max_name_len)
    if row_map or col_map:
        with open(str(path) + ".names.json", "w") as f:
            json.dump({"rows": row_map, "cols": col_map}, f, indent=1, sort_keys=True)
    return rows, cols


def write_mps(instance: MilpInstance, path, max_name_len: int = 255) -> str:
    rows, cols = _export_names(instance, path, max_name_len)
    width = max(8, max((len(n) for n in rows + cols + [_OBJ_ROW]), default=8))

    def pad(s):
        return s.ljust(width)

    # entries grouped per column, in column order
    by_col: list = [[] for _ in range(instance.n_cols)]
    for r, c, v in instance.triplets():
        by_col[c].append((r, v))

    lines = [f"NAME          {instance.name}", "ROWS", f" N  {_OBJ_ROW}"]
    for label, sense in zip(rows, instance.row_sense):
        lines.append(f" {sense}  {label}")

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for j in range(instance.n_cols):
        want_int = instance.vartype[j] != CONTINUOUS
        if want_int != in_int:
            tag = "INTORG" if want_int else "INTEND"
            lines.append(f"    {pad(f'MARKER{marker}')}  'MARKER'"
                         f"{' ' * max(1, width - 6)}'{tag}'")
            marker += 1
            in_int = want_int
        entries = []
        if instance.obj[j] != 0.0 or not by_col[j]:
            entries.append((_OBJ_ROW, instance.obj[j]))
        entries.extend((rows[r], v) for r, v in by_col[j])
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            parts = [f"    {pad(cols[j])}"]
            for rname, v in pair:
                parts.append(f"  {pad(rname)}  {_fmt(v)}")
            lines.append("".join(parts))
    if in_int:
        lines.append(f"    {pad(f'MARKER{marker}')}  'MARKER'"
                     f"{' ' * max(1, width - 6)}'INTEND'")

    lines.append("RHS")
    for label, rhs in zip(rows, instance.row_rhs):
        if rhs != 0.0:
            lines.append(f"    {pad('RHS')}  {pad(label)}  {_fmt(rhs)}")
    if instance.obj_offset != 0.0:
        lines.append(f"    {pad('RHS')}  {pad(_OBJ_ROW)}  {_fmt(-instance.obj_offset)}")

    lines.append("BOUNDS")
    for j in range(instance.n_cols):
        lb, ub = instance.col_lb[j], instance.col_ub[j]
        name = pad(cols[j])
        if lb == ub:
            lines.append(f" FX {pad('BND')}  {name}  {_fmt(lb)}")
            continue
        if math.isfinite(lb):
            lines.append(f" LO {pad('BND')}  {name}  {_fmt(lb)}")
        else:
            lines.append(f" MI {pad('BND')}  {name}")
        if math.isfinite(ub):
            lines.append(f" UP {pad('BND')}  {name}  {_fmt(ub)}")
        else:
            lines.append(f" PL {pad('BND')}  {name}")
    lines.append("ENDATA")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return str(path)


def write_lp(instance: MilpInstance, path, max_name_len: int = 255) -> str:
    rows, cols = _export_names(instance, path, max_name_len)
    lines = [f"\\ Problem: {instance.name}", "Minimize"]

    def run(terms, head):
        chunks, cur = [], head
        for t in terms:
            if len(cur) + len(t) + 1 > 230:
                chunks.append(cur)
                cur = "  " + t
            else:
                cur += " " + t
        chunks.append(cur)
        return chunks

    terms = []
    for j in range(instance.n_cols):
        v = instance.obj[j]
        if v != 0.0:
            terms.append(f"{'+' if v >= 0 else '-'} {_fmt(abs(v))} {cols[j]}")
    if instance.obj_offset != 0.0:
        v = instance.obj_offset
        terms.append(f"{'+' if v >= 0 else '-'} {_fmt(abs(v))}")
    if not terms:
        terms.append("+ 0 " + cols[0])
    lines.extend(run(terms, f" {_OBJ_ROW}:"))

    lines.append("Subject To")
    rel = {"L": "<=", "G": ">=", "E": "="}
    for r in range(instance.n_rows):
        terms = []
        for c, v in instance.row_entries(r):
            terms.append(f"{'+' if v >= 0 else '-'} {_fmt(abs(v))} {cols[c]}")
        if not terms:
            terms.append(f"+ 0 {cols[0]}")
        terms.append(f"{rel[instance.row_sense[r]]} {_fmt(instance.row_rhs[r])}")
        lines.extend(run(terms, f" {rows[r]}:"))

    lines.append("Bounds")
    for j in range(instance.n_cols):
        lb, ub = instance.col_lb[j], instance.col_ub[j]
        name = cols[j]
        if lb == ub:
            lines.append(f" {name} = {_fmt(lb)}")
        elif not math.isfinite(lb) and not math.isfinite(ub):
            lines.append(f" {name} free")
        else:
            lo = "-inf" if not math.isfinite(lb) else _fmt(lb)
            hi = "+inf" if not math.isfinite(ub) else _fmt(ub)
            lines.append(f" {lo} <= {name} <= {hi}")

    generals = [cols[j] for j in range(instance.n_cols)
                if instance.vartype[j] == INTEGER]
    binaries = [cols[j] for j in range(instance.n_cols)
                if instance.vartype[j] == BINARY]
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    lines.append("End")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# MPS reader (round-trips this module's writer output)

def read_mps(path) -> MilpInstance:
    ins = MilpInstance()
    section = None
    obj_row = None
    row_pos: dict = {}
    col_pos: dict = {}
    col_entries: dict = {}
    col_int: dict = {}
    rhs_map: dict = {}
    bounds: dict = {}
    in_int = False

    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("*"):
                continue
            if not line[0].isspace():
                head = line.split()
                section = head[0].upper()
                if section == "NAME" and len(head) > 1:
                    ins.name = head[1]
                if section == "ENDATA":
                    break
                continue
            fields = line.split()
            if section == "ROWS":
                sense, label = fields[0].upper(), fields[1]
                if sense == "N":
                    if obj_row is None:
                        obj_row = label
                    continue
                if sense not in ("L", "E", "G"):
                    raise MpsFormatError(f"{path}:{lineno}: bad row sense {sense}")
                row_pos[label] = len(ins.row_labels)
                ins.row_labels.append(label)
                ins.row_sense.append(sense)
                ins.row_rhs.append(0.0)
                ins._entries.append([])
            elif section == "COLUMNS":
                if len(fields) >= 3 and fields[1].strip("'") == "MARKER":
                    tag = fields[-1].strip("'")
                    in_int = tag == "INTORG"
                    continue
                cname = fields[0]
                if cname not in col_pos:
                    col_pos[cname] = len(col_pos)
                    col_entries[cname] = []
                    col_int[cname] = in_int
                pairs = fields[1:]
                if len(pairs) % 2:
                    raise MpsFormatError(f"{path}:{lineno}: odd COLUMNS fields")
                for k in range(0, len(pairs), 2):
                    col_entries[cname].append((pairs[k], float(pairs[k + 1])))
            elif section == "RHS":
                pairs = fields[1:]
                for k in range(0, len(pairs), 2):
                    rhs_map[pairs[k]] = float(pairs[k + 1])
            elif section == "RANGES":
                raise MpsFormatError(f"{path}:{lineno}: RANGES not supported")
            elif section == "BOUNDS":
                btype = fields[0].upper()
                cname = fields[2]
                val = float(fields[3]) if len(fields) > 3 else None
                bounds.setdefault(cname, []).append((btype, val))

    if obj_row is None:
        raise MpsFormatError(f"{path}: no objective (N) row")

    for cname in col_pos:
        is_int = col_int[cname]
        ins.add_col(cname, 0.0, 1.0 if is_int else math.inf,
                    INTEGER if is_int else CONTINUOUS)
    for cname, entry_list in col_entries.items():
        j = col_pos[cname]
        for rname, v in entry_list:
            if rname == obj_row:
                ins.obj[j] += v
            elif rname in row_pos:
                ins._entries[row_pos[rname]].append((j, v))
            else:
                raise MpsFormatError(f"{path}: entry for unknown row {rname}")
    for i in range(len(ins._entries)):
        ins._entries[i] = sorted(ins._entries[i])
    for rname, v in rhs_map.items():
        if rname == obj_row:
            ins.obj_offset = -v
        elif rname in row_pos:
            ins.row_rhs[row_pos[rname]] = v
        else:
            raise MpsFormatError(f"{path}: RHS for unknown row {rname}")
    for cname, blist in bounds.items():
        j = col_pos[cname]
        for btype, val in blist:
            if btype == "FX":
                ins.col_lb[j] = ins.col_ub[j] = val
            elif btype == "LO":
                ins.col_lb[j] = val
            elif btype == "UP":
                ins.col_ub[j] = val
            elif btype == "MI":
                ins.col_lb[j] = -math.inf
            elif btype == "PL":
                ins.col_ub[j] = math.inf
            elif btype == "BV":
                ins.col_lb[j], ins.col_ub[j] = 0.0, 1.0
                ins.vartype[j] = BINARY
            elif btype in ("UI", "LI"):
                (ins.col_ub if btype == "UI" else ins.col_lb)[j] = val
            else:
                raise MpsFormatError(f"{path}: bound type {btype} not supported")
    # Integer columns with unit bounds are binaries.
    for j in range(ins.n_cols):
        if ins.vartype[j] == INTEGER and ins.col_lb[j] >= 0 and ins.col_ub[j] <= 1:
            ins.vartype[j] = BINARY
    return ins


# ---------------------------------------------------------------------------
# Solution files

def write_solution(path, instance: MilpInstance, x, objective: Optional[float] = None,
                   names_map: Optional[dict] = None) -> str:
    """Write column values in the documented minimal grammar."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n_cols,):
        raise ModelError(f"value vector has {x.shape[0] if x.ndim else 0} entries, "
                         f"instance has {instance.n_cols} columns")
    lines = [f"# solution for {instance.name}"]
    if objective is not None:
        lines.append(f"objective {_fmt(objective)}")
    for j, name in enumerate(instance.col_names):
        lines.append(f"{name} {_fmt(x[j])}")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return str(path)


def read_solution(path, names_map: Optional[dict] = None) -> tuple:
    """Parse a solution file; returns ({name: value}, objective or None).

    ``names_map`` translates shortened export names back to the originals
    (the "cols" table of a sidecar .names.json).
    """
    values: dict = {}
    objective = None
    translate = names_map or {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MpsFormatError(f"{path}:{lineno}: expected '<name> <value>'")
            name, sval = parts
            try:
                val = float(sval)
            except ValueError:
                raise MpsFormatError(f"{path}:{lineno}: bad value {sval!r}") from None
            if name == "objective":
                objective = val
            else:
                values[translate.get(name, name)] = val
    return values, objective


def solution_vector(instance: MilpInstance, values: dict) -> np.ndarray:
    """Arrange a {name: value} mapping into the instance's column order."""
    pos = {name: j for j, name in enumerate(instance.col_names)}
    x = np.zeros(instance.n_cols)
    unknown = [n for n in values if n not in pos]
    if unknown:
        raise MpsFormatError(f"solution names not in model: {unknown[:5]}"
                             + ("..." if len(unknown) > 5 else ""))
    for name, val in values.items():
        x[pos[name]] = val
    return x
