"""Solver-agnostic linear model tables and text exports."""

from __future__ import annotations

import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.sparse as sp

INF = math.inf
CONTINUOUS = "continuous"
BINARY = "binary"

OPTIMAL = "optimal"
FEASIBLE = "feasible-with-gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class Variable:
    name: str
    index: tuple
    lb: float
    ub: float
    kind: str = CONTINUOUS

    @property
    def label(self) -> str:
        return _label(self.name, self.index)


@dataclass
class Row:
    tag: str
    index: tuple
    lb: float
    ub: float

    @property
    def label(self) -> str:
        return _label(self.tag, self.index)

    @property
    def sense(self) -> str:
        if self.lb == self.ub:
            return "=="
        if self.lb == -INF:
            return "<="
        if self.ub == INF:
            return ">="
        return "range"


def _label(name: str, index: tuple) -> str:
    if not index:
        return name
    return name + "(" + ",".join(str(i).replace(" ", "_") for i in index) + ")"


class ModelInstance:
    """Variable table, linear constraint table and a linear objective.

    Rows are stored as ``lb <= a.x <= ub``; the objective sense is
    maximisation. Families (variable names, row tags) carry index tuples so
    values can be looked up by their domain meaning.
    """

    def __init__(self, name: str = "gate"):
        self.name = name
        self.variables: list[Variable] = []
        self.rows: list[Row] = []
        self.obj: dict[int, float] = defaultdict(float)
        self.obj_constant = 0.0
        self._var_lookup: dict[tuple[str, tuple], int] = {}
        self._row_lookup: dict[tuple[str, tuple], int] = {}
        self._coef_rows: list[int] = []
        self._coef_cols: list[int] = []
        self._coef_vals: list[float] = []
        self.meta: dict = {}

    # construction
    def add_var(self, name, index=(), lb=0.0, ub=INF, kind=CONTINUOUS) -> int:
        key = (name, tuple(index))
        if key in self._var_lookup:
            raise ValueError(f"duplicate variable {_label(*key)}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        vid = len(self.variables)
        self.variables.append(Variable(name, tuple(index), float(lb), float(ub), kind))
        self._var_lookup[key] = vid
        return vid

    def add_row(self, tag, index, coefs: dict[int, float], lb=-INF, ub=INF) -> int:
        key = (tag, tuple(index))
        if key in self._row_lookup:
            raise ValueError(f"duplicate constraint {_label(*key)}")
        rid = len(self.rows)
        self.rows.append(Row(tag, tuple(index), float(lb), float(ub)))
        self._row_lookup[key] = rid
        for vid, c in coefs.items():
            if c != 0.0:
                self._coef_rows.append(rid)
                self._coef_cols.append(vid)
                self._coef_vals.append(float(c))
        return rid

    def add_eq(self, tag, index, coefs, rhs=0.0) -> int:
        return self.add_row(tag, index, coefs, rhs, rhs)

    def add_le(self, tag, index, coefs, rhs=0.0) -> int:
        return self.add_row(tag, index, coefs, -INF, rhs)

    def add_ge(self, tag, index, coefs, rhs=0.0) -> int:
        return self.add_row(tag, index, coefs, rhs, INF)

    def add_obj(self, vid: int, coef: float) -> None:
        self.obj[vid] += coef

    def fix(self, vid: int, value: float) -> None:
        v = self.variables[vid]
        v.lb = v.ub = float(value)

    # lookup
    def var(self, name, index=()) -> int:
        return self._var_lookup[(name, tuple(index))]

    def has_var(self, name, index=()) -> bool:
        return (name, tuple(index)) in self._var_lookup

    def row(self, tag, index=()) -> int:
        return self._row_lookup[(tag, tuple(index))]

    def has_row(self, tag, index=()) -> bool:
        return (tag, tuple(index)) in self._row_lookup

    def family(self, name) -> dict[tuple, int]:
        return {k[1]: v for k, v in self._var_lookup.items() if k[0] == name}

    def row_family(self, tag) -> dict[tuple, int]:
        return {k[1]: v for k, v in self._row_lookup.items() if k[0] == tag}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def integer_ids(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == BINARY]

    @property
    def is_mip(self) -> bool:
        return any(v.kind == BINARY and v.lb != v.ub for v in self.variables)

    def row_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for r in self.rows:
            counts[r.tag] += 1
        return dict(counts)

    def var_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for v in self.variables:
            counts[v.name] += 1
        return dict(counts)

    # arrays
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self._coef_vals, (self._coef_rows, self._coef_cols)),
            shape=(self.n_rows, self.n_vars),
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([v.lb for v in self.variables], dtype=float),
            np.array([v.ub for v in self.variables], dtype=float),
        )

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([r.lb for r in self.rows], dtype=float),
            np.array([r.ub for r in self.rows], dtype=float),
        )

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for vid, coef in self.obj.items():
            c[vid] = coef
        return c

    def integrality(self) -> np.ndarray:
        return np.array([1 if v.kind == BINARY else 0 for v in self.variables], dtype=np.uint8)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ x) + self.obj_constant

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Bound violation of every row at ``x`` (zero when satisfied)."""
        ax = self.matrix() @ x
        lo, hi = self.row_bounds()
        return np.maximum(np.maximum(lo - ax, ax - hi), 0.0)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ x

    def copy(self) -> "ModelInstance":
        other = ModelInstance(self.name)
        other.variables = [Variable(v.name, v.index, v.lb, v.ub, v.kind) for v in self.variables]
        other.rows = [Row(r.tag, r.index, r.lb, r.ub) for r in self.rows]
        other.obj = defaultdict(float, self.obj)
        other.obj_constant = self.obj_constant
        other._var_lookup = dict(self._var_lookup)
        other._row_lookup = dict(self._row_lookup)
        other._coef_rows = list(self._coef_rows)
        other._coef_cols = list(self._coef_cols)
        other._coef_vals = list(self._coef_vals)
        other.meta = dict(self.meta)
        return other

    def tag_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(i, r.tag, r.label, r.sense, r.lb, r.ub) for i, r in enumerate(self.rows)],
            columns=["row", "tag", "label", "sense", "lb", "ub"],
        )


@dataclass
class SolveResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None
    mip_gap: float = 0.0
    wall_time: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)

    @property
    def has_duals(self) -> bool:
        return self.row_duals is not None


def dual_objective(model: ModelInstance, result: SolveResult) -> float:
    """Dual objective of an LP from row and column duals.

    Duals follow the maximisation convention: a row dual is the marginal
    objective change per unit increase of the active row bound.
    """
    y = result.row_duals
    d = result.col_duals
    lo, hi = model.row_bounds()
    lb, ub = model.bounds()
    total = model.obj_constant

    def active(val, low, high):
        # positive dual: relaxing the upper side helps; negative: the lower side
        out = np.where(val > 0, high, low)
        # a solver-noise dual pointing at an infinite side is read against the finite one
        out = np.where(np.isinf(out), np.where(val > 0, low, high), out)
        both = low == high
        out = np.where(both, low, out)
        out = np.where(val == 0, 0.0, out)
        return out

    ry = active(y, lo, hi)
    total += float(np.sum(np.where(y != 0, y * ry, 0.0)))
    rd = active(d, lb, ub)
    total += float(np.sum(np.where(d != 0, d * rd, 0.0)))
    return total


def _fmt(v: float) -> str:
    return repr(float(v))


def export_mps(model: ModelInstance) -> str:
    """Free-format MPS; the objective is written as a minimisation of -U."""
    out = io.StringIO()
    out.write(f"NAME {model.name}\n")
    out.write("OBJSENSE\n    MIN\n")
    out.write("ROWS\n N obj\n")
    kinds = []
    for i, r in enumerate(model.rows):
        s = r.sense
        k = {"==": "E", "<=": "L", ">=": "G", "range": "E"}[s]
        if s == "range":
            k = "L"
        kinds.append(k)
        out.write(f" {k} r{i}\n")
    out.write("COLUMNS\n")
    a = model.matrix().tocsc()
    c = model.objective_vector()
    in_int = False
    for j, v in enumerate(model.variables):
        is_int = v.kind == BINARY
        if is_int and not in_int:
            out.write(" MARKER 'MARKER' 'INTORG'\n")
            in_int = True
        elif not is_int and in_int:
            out.write(" MARKER 'MARKER' 'INTEND'\n")
            in_int = False
        if c[j] != 0:
            out.write(f" c{j} obj {_fmt(-c[j])}\n")
        start, end = a.indptr[j], a.indptr[j + 1]
        for i, val in zip(a.indices[start:end], a.data[start:end]):
            out.write(f" c{j} r{i} {_fmt(val)}\n")
        if c[j] == 0 and start == end:
            out.write(f" c{j} obj 0.0\n")
    if in_int:
        out.write(" MARKER 'MARKER' 'INTEND'\n")
    out.write("RHS\n")
    if model.obj_constant:
        out.write(f" rhs obj {_fmt(model.obj_constant)}\n")
    ranges = []
    for i, r in enumerate(model.rows):
        s = r.sense
        if s in ("==", ">="):
            rhs = r.lb
        else:
            rhs = r.ub
        if rhs != 0:
            out.write(f" rhs r{i} {_fmt(rhs)}\n")
        if s == "range":
            ranges.append((i, r.ub - r.lb))
    if ranges:
        out.write("RANGES\n")
        for i, width in ranges:
            out.write(f" rng r{i} {_fmt(width)}\n")
    out.write("BOUNDS\n")
    for j, v in enumerate(model.variables):
        if v.kind == BINARY and v.lb == 0 and v.ub == 1:
            out.write(f" BV bnd c{j}\n")
            continue
        if v.lb == v.ub:
            out.write(f" FX bnd c{j} {_fmt(v.lb)}\n")
            continue
        if v.lb == -INF and v.ub == INF:
            out.write(f" FR bnd c{j}\n")
            continue
        if v.lb == -INF:
            out.write(f" MI bnd c{j}\n")
        elif v.lb != 0:
            out.write(f" LO bnd c{j} {_fmt(v.lb)}\n")
        if v.ub != INF:
            out.write(f" UP bnd c{j} {_fmt(v.ub)}\n")
        elif v.kind == BINARY:
            out.write(f" UP bnd c{j} 1.0\n")
    out.write("ENDATA\n")
    return out.getvalue()


def export_lp(model: ModelInstance) -> str:
    """CPLEX LP text with the original maximisation sense."""
    out = io.StringIO()
    out.write(f"\\ {model.name}\n")
    out.write("Maximize\n obj:")
    c = model.objective_vector()
    terms = [f" {'+' if c[j] >= 0 else '-'} {_fmt(abs(c[j]))} c{j}" for j in np.flatnonzero(c)]
    out.write("".join(terms) if terms else " 0 c0")
    if model.obj_constant:
        k = model.obj_constant
        out.write(f" {'+' if k >= 0 else '-'} {_fmt(abs(k))}")
    out.write("\nSubject To\n")
    a = model.matrix()
    for i, r in enumerate(model.rows):
        start, end = a.indptr[i], a.indptr[i + 1]
        expr = "".join(
            f" {'+' if val >= 0 else '-'} {_fmt(abs(val))} c{j}"
            for j, val in zip(a.indices[start:end], a.data[start:end])
        ) or " 0 c0"
        s = r.sense
        if s == "==":
            out.write(f" r{i}:{expr} = {_fmt(r.lb)}\n")
        elif s == "<=":
            out.write(f" r{i}:{expr} <= {_fmt(r.ub)}\n")
        elif s == ">=":
            out.write(f" r{i}:{expr} >= {_fmt(r.lb)}\n")
        else:
            out.write(f" r{i}_lo:{expr} >= {_fmt(r.lb)}\n")
            out.write(f" r{i}_hi:{expr} <= {_fmt(r.ub)}\n")
    out.write("Bounds\n")
    for j, v in enumerate(model.variables):
        lo = "-inf" if v.lb == -INF else _fmt(v.lb)
        hi = "+inf" if v.ub == INF else _fmt(v.ub)
        out.write(f" {lo} <= c{j} <= {hi}\n")
    binaries = [j for j, v in enumerate(model.variables) if v.kind == BINARY]
    if binaries:
        out.write("Generals\n")
        for j in binaries:
            out.write(f" c{j}\n")
    out.write("End\n")
    return out.getvalue()


def export_model(model: ModelInstance, fmt: str = "mps") -> str:
    fmt = fmt.lower()
    if fmt == "mps":
        return export_mps(model)
    if fmt in ("lp", "lp-text"):
        return export_lp(model)
    raise ValueError(f"unsupported export format {fmt!r}")


def column_names(model: ModelInstance) -> pd.DataFrame:
    """Map of exported column ids to variable labels."""
    return pd.DataFrame(
        [(f"c{j}", v.label, v.kind) for j, v in enumerate(model.variables)],
        columns=["column", "variable", "kind"],
    )
