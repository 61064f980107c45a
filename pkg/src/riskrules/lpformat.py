"""Plain-text LP model writer and reader.

The dialect is the common LP file layout: an objective section, Subject To,
optional Bounds, an integrality section, End. Coefficients are written with
17 significant digits so float64 values survive a round trip through text.
The reader parses everything this package emits (and the usual hand-written
variations) back into a matrix-free form that can be evaluated at a point,
which is how emitted models get checked against the in-repo solver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import StructuralError

_SENSES = ("<=", ">=", "=")


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _term_chunks(coefs: dict) -> list[str]:
    parts = []
    for name, coef in coefs.items():
        if coef == 0.0:
            continue
        if coef < 0.0:
            parts.append(f"- {fmt(-coef)} {name}")
        elif parts:
            parts.append(f"+ {fmt(coef)} {name}")
        else:
            parts.append(f"{fmt(coef)} {name}")
    if not parts:
        parts.append("0 dummy_zero")
    return parts


def _wrap(label: str, chunks: list[str], tail: str = "") -> list[str]:
    # keep lines short; continuation lines start with a space
    lines = []
    cur = f" {label}"
    for chunk in chunks:
        if len(cur) + len(chunk) > 200:
            lines.append(cur)
            cur = "   " + chunk
        else:
            cur = f"{cur} {chunk}"
    if tail:
        cur = f"{cur} {tail}"
    lines.append(cur)
    return lines


@dataclass
class Constraint:
    name: str
    coefs: dict
    sense: str
    rhs: float


@dataclass
class LPFile:
    minimize: bool = True
    objective: dict = field(default_factory=dict)
    obj_constant: float = 0.0
    constraints: list = field(default_factory=list)
    binaries: set = field(default_factory=set)
    free: set = field(default_factory=set)

    def variables(self) -> set:
        names = set(self.objective)
        for con in self.constraints:
            names.update(con.coefs)
        return names


def write_lp(lp: LPFile, comment: str = "") -> str:
    lines = []
    if comment:
        for row in comment.splitlines():
            lines.append(f"\\ {row}")
    lines.append("Minimize" if lp.minimize else "Maximize")
    obj_chunks = _term_chunks(lp.objective)
    if lp.obj_constant > 0.0:
        obj_chunks.append(f"+ {fmt(lp.obj_constant)}")
    elif lp.obj_constant < 0.0:
        obj_chunks.append(f"- {fmt(-lp.obj_constant)}")
    lines.extend(_wrap("obj:", obj_chunks))
    lines.append("Subject To")
    for con in lp.constraints:
        if con.sense not in _SENSES:
            raise StructuralError(f"bad sense {con.sense!r} in row {con.name}")
        lines.extend(
            _wrap(
                f"{con.name}:",
                _term_chunks(con.coefs),
                f"{con.sense} {fmt(con.rhs)}",
            )
        )
    if lp.free:
        lines.append("Bounds")
        for name in sorted(lp.free):
            lines.append(f" {name} free")
    if lp.binaries:
        lines.append("Binary")
        for name in sorted(lp.binaries):
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# reader

_TOKEN_RE = re.compile(
    r"(<=|>=|=<|=>|=|\+|-|:|[A-Za-z_][A-Za-z0-9_.\[\]]*|"
    r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|\.[0-9]+)"
)

_SECTION_WORDS = {
    "minimize": "objective-min",
    "minimise": "objective-min",
    "min": "objective-min",
    "maximize": "objective-max",
    "maximise": "objective-max",
    "max": "objective-max",
    "subject": "constraints",
    "st": "constraints",
    "bounds": "bounds",
    "bound": "bounds",
    "binary": "binary",
    "binaries": "binary",
    "bin": "binary",
    "general": "general",
    "generals": "general",
    "gen": "general",
    "end": "end",
}

_NUM_RE = re.compile(r"^[0-9.]")


def _is_number(tok: str) -> bool:
    return bool(_NUM_RE.match(tok))


def _strip_comments(text: str) -> str:
    kept = []
    for line in text.splitlines():
        cut = line.find("\\")
        kept.append(line if cut < 0 else line[:cut])
    return "\n".join(kept)


def _tokenize(text: str) -> list[str]:
    out = []
    for line in _strip_comments(text).splitlines():
        out.extend(_TOKEN_RE.findall(line))
    return out


def _parse_expr(tokens, pos):
    """Parse signed terms until a sense, ':' lookahead, or section word."""
    coefs: dict = {}
    const = 0.0
    sign = 1.0
    pending: float | None = None
    while pos < len(tokens):
        tok = tokens[pos]
        low = tok.lower()
        if tok in ("<=", ">=", "=", "=<", "=>"):
            break
        if low in _SECTION_WORDS and tokens[pos + 1 : pos + 2] != [":"]:
            break  # keyword opens the next section; a trailing ":" means a label
        if tok == "+":
            pos += 1
            continue
        if tok == "-":
            sign = -sign
            pos += 1
            continue
        if _is_number(tok):
            if pending is not None:
                const += sign * pending
                sign = 1.0
            pending = float(tok)
            pos += 1
            continue
        if tokens[pos + 1 : pos + 2] == [":"]:
            break  # next constraint's label
        coef = sign * (1.0 if pending is None else pending)
        coefs[tok] = coefs.get(tok, 0.0) + coef
        pending = None
        sign = 1.0
        pos += 1
    if pending is not None:
        const += sign * pending
    return coefs, const, pos


def parse_lp(text: str) -> LPFile:
    tokens = _tokenize(text)
    lp = LPFile()
    pos = 0
    section = None
    auto = 0
    while pos < len(tokens):
        pos_start = pos
        tok = tokens[pos]
        low = tok.lower()
        if low in _SECTION_WORDS and tokens[pos + 1 : pos + 2] != [":"]:
            kind = _SECTION_WORDS[low]
            if kind == "end":
                break
            if kind == "constraints":
                # swallow "subject to" / "s t"
                if low == "subject" and tokens[pos + 1 : pos + 2] and tokens[pos + 1].lower() == "to":
                    pos += 1
                section = "constraints"
            elif kind in ("objective-min", "objective-max"):
                lp.minimize = kind == "objective-min"
                section = "objective"
            else:
                section = kind
            pos += 1
            continue
        if section == "objective":
            if tokens[pos + 1 : pos + 2] == [":"]:
                pos += 2  # objective label
            coefs, const, pos = _parse_expr(tokens, pos)
            lp.objective = coefs
            lp.obj_constant = const
        elif section == "constraints":
            if tokens[pos + 1 : pos + 2] == [":"]:
                name = tok
                pos += 2
            else:
                name = f"r{auto}"
                auto += 1
            coefs, const, pos = _parse_expr(tokens, pos)
            if pos >= len(tokens) or tokens[pos] not in ("<=", ">=", "=", "=<", "=>"):
                raise StructuralError(f"row {name} has no sense")
            sense = {"=<": "<=", "=>": ">="}.get(tokens[pos], tokens[pos])
            pos += 1
            if pos >= len(tokens):
                raise StructuralError(f"row {name} has no right-hand side")
            rsign = 1.0
            while tokens[pos] in ("+", "-"):
                if tokens[pos] == "-":
                    rsign = -rsign
                pos += 1
            if not _is_number(tokens[pos]):
                raise StructuralError(f"row {name} right-hand side is not a number")
            rhs = rsign * float(tokens[pos]) - const
            pos += 1
            lp.constraints.append(Constraint(name, coefs, sense, rhs))
        elif section == "bounds":
            # only the forms this package writes plus "lo <= x <= hi"
            if tokens[pos + 1 : pos + 2] and tokens[pos + 1].lower() == "free":
                lp.free.add(tok)
                pos += 2
            else:
                start = pos
                while pos < len(tokens) and tokens[pos].lower() not in _SECTION_WORDS:
                    pos += 1
                    if (
                        pos < len(tokens)
                        and tokens[pos - 1].lower() == "free"
                    ):
                        break
                if pos == start:
                    pos += 1
        elif section == "binary":
            lp.binaries.add(tok)
            pos += 1
        elif section == "general":
            pos += 1
        else:
            raise StructuralError(f"token {tok!r} before any section")
        if pos == pos_start:
            raise StructuralError(f"parser stuck at token {tok!r}")
    return lp


def evaluate_objective(lp: LPFile, assignment: dict) -> float:
    total = lp.obj_constant
    for name, coef in lp.objective.items():
        total += coef * assignment.get(name, 0.0)
    return total


def constraint_violations(lp: LPFile, assignment: dict, tol: float = 1e-9) -> list[str]:
    bad = []
    for con in lp.constraints:
        lhs = sum(coef * assignment.get(n, 0.0) for n, coef in con.coefs.items())
        if con.sense == "<=" and lhs > con.rhs + tol:
            bad.append(con.name)
        elif con.sense == ">=" and lhs < con.rhs - tol:
            bad.append(con.name)
        elif con.sense == "=" and abs(lhs - con.rhs) > tol:
            bad.append(con.name)
    return bad
