"""Free-format MPS export/import and plain ``name value`` solution files."""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from ..model import FIRST_STAGE, SECOND_STAGE, ModelInstance, VarKey
from .lp import LpSolution
from .simplex import OPTIMAL

OBJ_ROW = "obj"
_SENSE_CODE = {"<=": "L", ">=": "G", "=": "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


class MpsFormatError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def _check_name(name: str) -> None:
    if not name or len(name) > 255 or any(ch.isspace() for ch in name):
        raise MpsFormatError(f"name {name!r} is not a valid MPS identifier")


def write_mps(model: ModelInstance, path: str | os.PathLike) -> None:
    """Write ``model`` as free MPS; binaries sit between INTORG/INTEND markers."""
    obj = OBJ_ROW
    while obj in model.row_index:
        obj = "_" + obj
    for v in model.variables:
        _check_name(v.name)
    for r in model.rows:
        _check_name(r.name)

    cols: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for r in model.rows:
        for j in sorted(r.coefs):
            cols[j].append((r.name, r.coefs[j]))

    out = [f"NAME {model.name}", "ROWS", f" N {obj}"]
    out += [f" {_SENSE_CODE[r.sense]} {r.name}" for r in model.rows]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, v in enumerate(model.variables):
        if v.is_binary != in_int:
            tag = "'INTORG'" if v.is_binary else "'INTEND'"
            out.append(f" MARKER{marker} 'MARKER' {tag}")
            marker += 1
            in_int = v.is_binary
        entries = ([(obj, v.cost)] if v.cost != 0.0 else []) + cols[j]
        if not entries:
            entries = [(obj, 0.0)]
        out += [f" {v.name} {row} {_num(a)}" for row, a in entries]
    if in_int:
        out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    out += [f" RHS {r.name} {_num(r.rhs)}" for r in model.rows if r.rhs != 0.0]
    out.append("RANGES")
    out.append("BOUNDS")
    for v in model.variables:
        lo, up = v.lower, v.upper
        if lo == up:
            out.append(f" FX BND {v.name} {_num(lo)}")
        elif v.is_binary and lo == 0.0 and up == 1.0:
            out.append(f" BV BND {v.name}")
        elif lo == -math.inf and up == math.inf:
            out.append(f" FR BND {v.name}")
        else:
            if lo == -math.inf:
                out.append(f" MI BND {v.name}")
            elif lo != 0.0 or v.is_binary:
                out.append(f" LO BND {v.name} {_num(lo)}")
            if up != math.inf:
                out.append(f" UP BND {v.name} {_num(up)}")
            elif v.is_binary:
                out.append(f" PL BND {v.name}")
    out.append("ENDATA")
    Path(path).write_text("\n".join(out) + "\n")


def _stage_of(name: str) -> int:
    try:
        return SECOND_STAGE if VarKey.parse(name).scenario is not None else FIRST_STAGE
    except ValueError:
        return FIRST_STAGE


def read_mps(path: str | os.PathLike) -> ModelInstance:
    """Parse free MPS written by :func:`write_mps` (or any solver using the same subset)."""
    path = Path(path)
    name = path.stem
    obj_row = None
    senses: dict[str, str] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_binary: dict[str, bool] = {}
    coefs: dict[str, dict[str, float]] = {}
    costs: dict[str, float] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    section = None
    in_int = False

    def fail(line_no: int, msg: str) -> MpsFormatError:
        return MpsFormatError(f"{path}:{line_no}: {msg}")

    with path.open() as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                head = line.split()
                section = head[0].upper()
                if section == "NAME":
                    name = head[1] if len(head) > 1 else name
                elif section == "ENDATA":
                    break
                elif section not in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "OBJSENSE"):
                    raise fail(line_no, f"unknown section {section}")
                continue
            tok = line.split()
            try:
                if section == "ROWS":
                    code, rname = tok[0].upper(), tok[1]
                    if code == "N":
                        if obj_row is None:
                            obj_row = rname
                        continue
                    if code not in _CODE_SENSE:
                        raise fail(line_no, f"unknown row type {code}")
                    if rname in senses:
                        raise fail(line_no, f"duplicate row {rname}")
                    senses[rname] = _CODE_SENSE[code]
                    row_order.append(rname)
                    coefs[rname] = {}
                elif section == "COLUMNS":
                    if len(tok) >= 3 and tok[1] == "'MARKER'":
                        in_int = tok[2] == "'INTORG'"
                        continue
                    cname = tok[0]
                    if cname not in col_binary:
                        col_order.append(cname)
                        col_binary[cname] = in_int
                    for k in range(1, len(tok) - 1, 2):
                        rname, val = tok[k], float(tok[k + 1])
                        if rname == obj_row:
                            costs[cname] = costs.get(cname, 0.0) + val
                        elif rname in coefs:
                            coefs[rname][cname] = val
                        else:
                            raise fail(line_no, f"column {cname} references unknown row {rname}")
                elif section == "RHS":
                    for k in range(1, len(tok) - 1, 2):
                        rname, val = tok[k], float(tok[k + 1])
                        if rname != obj_row:
                            if rname not in senses:
                                raise fail(line_no, f"RHS for unknown row {rname}")
                            rhs[rname] = val
                elif section == "RANGES":
                    raise fail(line_no, "ranged rows are not supported")
                elif section == "BOUNDS":
                    kind, cname = tok[0].upper(), tok[2]
                    if cname not in col_binary:
                        raise fail(line_no, f"bound on unknown column {cname}")
                    b = bounds.setdefault(cname, [0.0, math.inf])
                    val = float(tok[3]) if len(tok) > 3 else None
                    if kind == "UP":
                        b[1] = val
                    elif kind == "LO":
                        b[0] = val
                    elif kind == "FX":
                        b[0] = b[1] = val
                    elif kind == "FR":
                        b[0], b[1] = -math.inf, math.inf
                    elif kind == "MI":
                        b[0] = -math.inf
                    elif kind == "PL":
                        b[1] = math.inf
                    elif kind == "BV":
                        b[0], b[1] = 0.0, 1.0
                        col_binary[cname] = True
                    else:
                        raise fail(line_no, f"unsupported bound type {kind}")
            except (IndexError, ValueError) as exc:
                if isinstance(exc, MpsFormatError):
                    raise
                raise fail(line_no, f"malformed line {line!r}") from None

    model = ModelInstance(name)
    for cname in col_order:
        lo, up = bounds.get(cname, (0.0, math.inf))
        if col_binary[cname] and cname not in bounds:
            lo, up = 0.0, 1.0
        model.add_var(cname, lo, up, costs.get(cname, 0.0), binary=col_binary[cname], stage=_stage_of(cname))
        # add_var clips binaries to [0, 1]; keep explicit bounds exactly
        model.variables[-1].lower, model.variables[-1].upper = float(lo), float(up)
    index = model.index
    for rname in row_order:
        model.add_row(rname, {index[c]: a for c, a in coefs[rname].items()}, senses[rname], rhs.get(rname, 0.0))
    return model


# ---------------------------------------------------------------------------
# solution files: one "name value" pair per line; lines starting with '#' are comments

def write_solution(path: str | os.PathLike, model: ModelInstance, x) -> None:
    x = np.asarray(x, dtype=float)
    lines = [f"# {model.name}: {model.n_vars} variables"]
    lines += [f"{v.name} {_num(x[j])}" for j, v in enumerate(model.variables)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path: str | os.PathLike, model: ModelInstance) -> LpSolution:
    """Map an external ``name value`` file onto ``model``.

    Unknown or repeated names and unparsable values raise; variables missing
    from the file are set to 0 and listed in ``warnings``.
    """
    path = Path(path)
    x = np.zeros(model.n_vars)
    seen = np.zeros(model.n_vars, dtype=bool)
    with path.open() as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'name value', got {raw.strip()!r}")
            name, text = tok
            j = model.index.get(name)
            if j is None:
                raise ValueError(f"{path}:{line_no}: unknown variable {name}")
            if seen[j]:
                raise ValueError(f"{path}:{line_no}: duplicate variable {name}")
            try:
                val = float(text)
            except ValueError:
                raise ValueError(f"{path}:{line_no}: cannot parse value {text!r} for {name}") from None
            if not math.isfinite(val):
                raise ValueError(f"{path}:{line_no}: non-finite value for {name}")
            x[j] = val
            seen[j] = True
    warnings = tuple(f"{model.variables[j].name} missing; set to 0" for j in np.flatnonzero(~seen))
    return LpSolution(OPTIMAL, model.objective_value(x), x, np.zeros(model.n_rows), np.zeros(model.n_vars),
                      0, warnings)
