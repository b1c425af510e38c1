"""Sign and ranking restrictions: records, file format, assumption checks and candidate tables.

Indices are 0-based everywhere in Python; the restriction file and printed
reports use 1-based indices (or names).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import IntEnum
from functools import cached_property
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .var import IrfTensor

HEADER = ("kind", "var_i", "shock_j", "var_k", "shock_l", "sign", "lambda", "horizon")


class RestrictionError(ValueError):
    """Malformed or inconsistent restriction input."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class Match(IntEnum):
    """How a candidate column relates to one shock's impact restrictions."""

    NEITHER = 0
    PLUS = 1
    MINUS = -1
    BOTH = 2


@dataclass(frozen=True)
class Restriction:
    """``sign * (f[i, j, h] - lam * f[k, l, h]) >= 0``; a sign record has no ``(k, l)``."""

    kind: str
    i: int
    j: int
    sign: int
    k: Optional[int] = None
    l: Optional[int] = None
    lam: float = 0.0
    horizon: int = 0

    def __post_init__(self):
        if self.kind not in ("sign", "ranking"):
            raise RestrictionError(f"unknown kind {self.kind!r}")
        if self.sign not in (-1, 1):
            raise RestrictionError(f"sign must be -1 or +1, got {self.sign}")
        if self.horizon < 0:
            raise RestrictionError("horizon must be non-negative")
        if self.kind == "sign":
            if self.k is not None or self.l is not None or self.lam != 0.0:
                raise RestrictionError("sign records take no var_k, shock_l or lambda")
        else:
            if self.k is None or self.l is None:
                raise RestrictionError("ranking records need var_k and shock_l")
            if not self.lam >= 0.0:
                raise RestrictionError("lambda must be >= 0")

    @property
    def is_sign(self) -> bool:
        """True when the record only constrains ``f[i, j, h]`` (sign, or ranking with lambda 0)."""
        return self.kind == "sign" or self.lam == 0.0

    @property
    def single_shock(self) -> bool:
        return self.is_sign or self.l == self.j

    def evaluate(self, f: np.ndarray) -> float:
        """Signed slack on a ``(n, m)`` response slice; the record holds iff this is ``>= 0``."""
        value = f[self.i, self.j]
        if not self.is_sign:
            value = value - self.lam * f[self.k, self.l]
        return self.sign * value


@dataclass(frozen=True)
class ImpactProgram:
    """Impact single-shock restrictions compiled to linear functionals on columns.

    Row ``r`` of ``weights`` is ``sign * (e_i - lam * e_k)``; rows are grouped by
    shock, ``bounds[j]:bounds[j+1]`` belonging to shock ``j``.
    """

    weights: np.ndarray
    bounds: np.ndarray
    m: int

    def codes(self, R: np.ndarray) -> np.ndarray:
        """Candidate-table codes for every column of ``R`` (shape ``(..., n, n)``) -> ``(..., m, n)``."""
        values = np.matmul(self.weights, R)
        out = np.zeros(values.shape[:-2] + (self.m, values.shape[-1]), dtype=np.int8)
        for j in range(self.m):
            seg = values[..., self.bounds[j] : self.bounds[j + 1], :]
            plus = (seg >= 0).all(axis=-2)
            minus = (seg <= 0).all(axis=-2)
            out[..., j, :] = np.where(plus & minus, 2, np.where(plus, 1, np.where(minus, -1, 0)))
        return out

    @property
    def n_records(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class RestrictionSet:
    n: int
    m: int
    records: tuple
    variable_names: Optional[tuple] = None
    shock_names: Optional[tuple] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise RestrictionError("n and m must be positive")
        if self.m > self.n:
            raise RestrictionError(f"m={self.m} shocks cannot exceed n={self.n} variables")
        if self.variable_names is not None and len(self.variable_names) != self.n:
            raise RestrictionError("variable_names length does not match n")
        if self.shock_names is not None and len(self.shock_names) != self.m:
            raise RestrictionError("shock_names length does not match m")
        for r in self.records:
            for idx, bound, what in ((r.i, self.n, "variable"), (r.j, self.m, "shock"),
                                     (r.k, self.n, "variable"), (r.l, self.m, "shock")):
                if idx is not None and not 0 <= idx < bound:
                    raise RestrictionError(f"{what} index {idx + 1} out of range 1..{bound}")

    @cached_property
    def impact_single(self) -> tuple:
        """Impact-horizon records involving a single shock, grouped per shock."""
        groups = [[] for _ in range(self.m)]
        for r in self.records:
            if r.horizon == 0 and r.single_shock:
                groups[r.j].append(r)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def cross_shock(self) -> tuple:
        return tuple(r for r in self.records if r.horizon == 0 and not r.single_shock)

    @cached_property
    def dynamic(self) -> tuple:
        return tuple(r for r in self.records if r.horizon > 0)

    @cached_property
    def program(self) -> ImpactProgram:
        rows, bounds = [], [0]
        for group in self.impact_single:
            for r in group:
                w = np.zeros(self.n)
                w[r.i] += r.sign
                if not r.is_sign:
                    w[r.k] -= r.sign * r.lam
                rows.append(w)
            bounds.append(len(rows))
        weights = np.array(rows).reshape(len(rows), self.n)
        return ImpactProgram(weights, np.array(bounds), self.m)

    @property
    def max_dynamic_horizon(self) -> int:
        return max((r.horizon for r in self.dynamic), default=0)

    def unrestricted_shocks(self) -> list:
        return [j for j, g in enumerate(self.impact_single) if not g]

    def variable_label(self, i: int) -> str:
        return self.variable_names[i] if self.variable_names else str(i + 1)

    def shock_label(self, j: int) -> str:
        return self.shock_names[j] if self.shock_names else str(j + 1)

    @classmethod
    def from_sign_matrix(cls, signs, **kwargs) -> "RestrictionSet":
        """Impact sign restrictions from an ``n x m`` matrix over {-1, 0, +1}."""
        signs = np.asarray(signs, dtype=int)
        n, m = signs.shape
        records = tuple(
            Restriction("sign", i, j, int(signs[i, j]))
            for j in range(m) for i in range(n) if signs[i, j] != 0
        )
        return cls(n, m, records, **kwargs)


# --- file format -----------------------------------------------------------


def _parse_label(value: str, names: Optional[Sequence[str]], bound: Optional[int], line: int, column: str) -> int:
    if value.isdigit():
        idx = int(value) - 1
        if idx < 0 or (bound is not None and idx >= bound):
            raise RestrictionError(f"index {value} out of range", line, column)
        return idx
    if names is None:
        raise RestrictionError(f"label {value!r} used without a declared name list", line, column)
    try:
        return list(names).index(value)
    except ValueError:
        raise RestrictionError(f"unknown label {value!r}", line, column) from None


def _parse_decimal(value: str, line: int, column: str) -> float:
    try:
        d = Decimal(value)
    except InvalidOperation:
        raise RestrictionError(f"not a decimal number: {value!r}", line, column) from None
    if not d.is_finite():
        raise RestrictionError(f"not a finite number: {value!r}", line, column)
    return float(d)


def parse_restrictions(
    text: str,
    n: Optional[int] = None,
    m: Optional[int] = None,
    variable_names: Optional[Sequence[str]] = None,
    strict: bool = True,
) -> RestrictionSet:
    """Parse a restriction CSV.

    ``n``/``m``/``variable_names`` supply defaults when the file has no
    preamble (e.g. the variable names from a data header). In strict mode every
    shock needs at least one impact single-shock restriction.
    """
    var_names = list(variable_names) if variable_names is not None else None
    shock_names = None
    header_seen = False
    raw = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            directive, _, rest = stripped[1:].partition(":")
            directive = directive.strip().lower()
            items = [s.strip() for s in rest.split(",") if s.strip()]
            if directive == "variables":
                var_names = items
            elif directive == "shocks":
                shock_names = items
            elif directive in ("n", "m"):
                try:
                    size = int(rest.strip())
                except ValueError:
                    raise RestrictionError(f"#{directive} needs an integer", lineno) from None
                if directive == "n":
                    n = size
                else:
                    m = size
            continue
        fields = next(csv.reader([stripped]))
        fields = [f.strip() for f in fields]
        if not header_seen:
            if tuple(f.lower() for f in fields) != HEADER:
                raise RestrictionError(f"expected header {','.join(HEADER)}", lineno)
            header_seen = True
            continue
        if len(fields) < len(HEADER):
            fields += [""] * (len(HEADER) - len(fields))
        if len(fields) != len(HEADER):
            raise RestrictionError(f"expected {len(HEADER)} fields, got {len(fields)}", lineno)
        raw.append((lineno, dict(zip(HEADER, fields))))

    if not raw:
        raise RestrictionError("no restrictions")

    if var_names is not None:
        if n is not None and n != len(var_names):
            raise RestrictionError(f"{len(var_names)} variable names declared but n={n}")
        n = len(var_names)
    if shock_names is not None:
        if m is not None and m != len(shock_names):
            raise RestrictionError(f"{len(shock_names)} shock names declared but m={m}")
        m = len(shock_names)

    records = []
    for lineno, row in raw:
        kind = row["kind"].lower()
        if kind not in ("sign", "ranking"):
            raise RestrictionError(f"kind must be 'sign' or 'ranking', got {row['kind']!r}", lineno, "kind")
        i = _parse_label(row["var_i"], var_names, n, lineno, "var_i")
        j = _parse_label(row["shock_j"], shock_names, m, lineno, "shock_j")
        if row["sign"] not in ("1", "+1", "-1"):
            raise RestrictionError(f"sign must be -1 or +1, got {row['sign']!r}", lineno, "sign")
        sign = int(row["sign"])
        horizon = 0
        if row["horizon"]:
            if not row["horizon"].isdigit():
                raise RestrictionError(f"horizon must be a non-negative integer", lineno, "horizon")
            horizon = int(row["horizon"])
        if kind == "sign":
            for col in ("var_k", "shock_l", "lambda"):
                if row[col]:
                    raise RestrictionError("must be empty for a sign record", lineno, col)
            records.append(Restriction("sign", i, j, sign, horizon=horizon))
            continue
        if not row["var_k"]:
            raise RestrictionError("ranking record needs var_k", lineno, "var_k")
        if not row["lambda"]:
            raise RestrictionError("ranking record needs lambda", lineno, "lambda")
        k = _parse_label(row["var_k"], var_names, n, lineno, "var_k")
        l = _parse_label(row["shock_l"], shock_names, m, lineno, "shock_l") if row["shock_l"] else j
        lam = _parse_decimal(row["lambda"], lineno, "lambda")
        if lam < 0:
            raise RestrictionError("lambda must be >= 0", lineno, "lambda")
        records.append(Restriction("ranking", i, j, sign, k, l, lam, horizon))

    if n is None:
        n = 1 + max(max(r.i, r.k if r.k is not None else 0) for r in records)
    if m is None:
        m = 1 + max(max(r.j, r.l if r.l is not None else 0) for r in records)

    rset = RestrictionSet(
        n, m, tuple(records),
        tuple(var_names) if var_names is not None else None,
        tuple(shock_names) if shock_names is not None else None,
    )
    if strict:
        missing = rset.unrestricted_shocks()
        if missing:
            labels = ", ".join(rset.shock_label(j) for j in missing)
            raise RestrictionError(f"shock(s) {labels} have no impact restriction (strict mode)")
    return rset


def load_restrictions(path, **kwargs) -> RestrictionSet:
    with open(path, encoding="utf-8") as fh:
        return parse_restrictions(fh.read(), **kwargs)


def serialize_restrictions(rset: RestrictionSet) -> str:
    out = io.StringIO()
    if rset.variable_names is not None:
        out.write("#variables: " + ",".join(rset.variable_names) + "\n")
    else:
        out.write(f"#n: {rset.n}\n")
    if rset.shock_names is not None:
        out.write("#shocks: " + ",".join(rset.shock_names) + "\n")
    else:
        out.write(f"#m: {rset.m}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rset.records:
        writer.writerow([
            r.kind,
            r.i + 1,
            r.j + 1,
            "" if r.k is None else r.k + 1,
            "" if r.l is None else r.l + 1,
            f"{r.sign:+d}",
            "" if r.kind == "sign" else repr(r.lam),
            r.horizon,
        ])
    return out.getvalue()


# --- assumptions -----------------------------------------------------------


@dataclass(frozen=True)
class PairWitness:
    """Why shocks ``j`` and ``l`` are distinguishable (``condition`` 1 or 2), or ``None``."""

    j: int
    l: int
    condition: Optional[int] = None
    i1: Optional[int] = None
    i2: Optional[int] = None

    @property
    def distinguishable(self) -> bool:
        return self.condition is not None


@dataclass(frozen=True)
class AssumptionReport:
    pairs: tuple

    @property
    def holds(self) -> bool:
        return all(p.distinguishable for p in self.pairs)

    def pair(self, j: int, l: int) -> PairWitness:
        for p in self.pairs:
            if (p.j, p.l) == (j, l) or (p.j, p.l) == (l, j):
                return p
        raise KeyError((j, l))

    def describe(self, rset: RestrictionSet) -> str:
        lines = []
        for p in self.pairs:
            a, b = rset.shock_label(p.j), rset.shock_label(p.l)
            if p.condition is None:
                lines.append(f"({a}, {b}): indistinguishable")
            else:
                lines.append(
                    f"({a}, {b}): condition {p.condition} "
                    f"i1={rset.variable_label(p.i1)} i2={rset.variable_label(p.i2)}"
                )
        return "\n".join(lines)


def _pure_signs(rset: RestrictionSet) -> dict:
    signs: dict = {}
    for group in rset.impact_single:
        for r in group:
            if r.is_sign:
                signs.setdefault((r.i, r.j), set()).add(r.sign)
    return signs


def _rankings(rset: RestrictionSet) -> dict:
    """Single-shock impact rankings keyed by ``(j, i1, i2, lam)`` -> set of signs.

    With ``lam == 1`` the record ``(i2, i1, s)`` is the same combination as
    ``(i1, i2, -s)`` and is stored both ways.
    """
    out: dict = {}
    for group in rset.impact_single:
        for r in group:
            if r.is_sign:
                continue
            out.setdefault((r.j, r.i, r.k, r.lam), set()).add(r.sign)
            if r.lam == 1.0:
                out.setdefault((r.j, r.k, r.i, r.lam), set()).add(-r.sign)
    return out


def check_assumptions(rset: RestrictionSet) -> AssumptionReport:
    """Look for a distinguishing witness for every pair of identified shocks.

    Condition 1: a variable with equal pure signs for both shocks and one with
    opposite pure signs. Condition 2: a matched pair of single-shock rankings
    on the same variables with opposite signs and equal positive lambda.
    """
    signs = _pure_signs(rset)
    ranks = _rankings(rset)
    pairs = []
    for j, l in combinations(range(rset.m), 2):
        same = opposite = None
        for i in range(rset.n):
            a, b = signs.get((i, j), ()), signs.get((i, l), ())
            if same is None and any(x == y for x in a for y in b):
                same = i
            if opposite is None and any(x == -y for x in a for y in b):
                opposite = i
        if same is not None and opposite is not None:
            pairs.append(PairWitness(j, l, 1, same, opposite))
            continue
        found = None
        for (jj, i1, i2, lam), s_j in ranks.items():
            if jj != j or lam <= 0:
                continue
            s_l = ranks.get((l, i1, i2, lam), ())
            if any(x == -y for x in s_j for y in s_l):
                found = (i1, i2)
                break
        if found:
            pairs.append(PairWitness(j, l, 2, *found))
        else:
            pairs.append(PairWitness(j, l))
    return AssumptionReport(tuple(pairs))


# --- candidate tables ------------------------------------------------------


@dataclass(frozen=True)
class CandidateTable:
    """``entries[j, i]`` in {0, +1, -1, 2}: whether column ``i`` (or its negative) fits shock ``j``.

    ``2`` marks a column fitting with either sign (possible only with exact zeros).
    """

    entries: np.ndarray

    @property
    def strict(self) -> bool:
        return is_strict(self.entries)

    def candidates(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.entries[j])


def is_strict(entries: np.ndarray) -> bool:
    return bool((entries != 2).all() and ((entries != 0).sum(axis=0) <= 1).all())


def column_satisfies(rset: RestrictionSet, j: int, column) -> Match:
    column = np.asarray(column, dtype=float)
    if column.shape != (rset.n,):
        raise ValueError(f"column must have length {rset.n}")
    return Match(int(rset.program.codes(column[:, None])[j, 0]))


def build_candidate_table(rset: RestrictionSet, R: np.ndarray, strict: bool = False) -> CandidateTable:
    """Candidate table for ``R = L Q``.

    With ``strict=True`` and a set satisfying the distinguishability
    assumptions, ``both`` entries collapse to ``+1``.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (rset.n, rset.n):
        raise ValueError(f"R must be {rset.n}x{rset.n}")
    entries = rset.program.codes(R)
    if strict and check_assumptions(rset).holds:
        entries[entries == 2] = 1
    return CandidateTable(entries)


def inequality_count(rset: RestrictionSet) -> int:
    """Scalar inequalities evaluated per candidate table (one per record and column)."""
    return rset.program.n_records * rset.n


def impact_violations(rset: RestrictionSet, impact: np.ndarray) -> int:
    """Number of impact single-shock records violated by the first ``m`` columns of ``impact``."""
    f = np.asarray(impact)[:, : rset.m]
    return sum(1 for group in rset.impact_single for r in group if r.evaluate(f) < 0)


def check_cross_shock(rset: RestrictionSet, impact: np.ndarray) -> bool:
    f = np.asarray(impact)
    return all(r.evaluate(f) >= 0 for r in rset.cross_shock)


def check_dynamic(rset: RestrictionSet, irf: IrfTensor) -> bool:
    if not rset.dynamic:
        return True
    if rset.max_dynamic_horizon > irf.H:
        raise ValueError(
            f"restriction horizon {rset.max_dynamic_horizon} exceeds the IRF horizon {irf.H}"
        )
    v = irf.values
    return all(r.evaluate(v[:, :, r.horizon]) >= 0 for r in rset.dynamic)
