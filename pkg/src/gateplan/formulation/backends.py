"""Solver backends: HiGHS through highspy, and scipy's HiGHS wrappers."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    ERROR,
    FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    ModelInstance,
    SolveResult,
)

log = logging.getLogger(__name__)

BACKEND_ENV = "GATEPLAN_BACKEND"
DEFAULT_GAP = 1e-4


class SolverError(RuntimeError):
    pass


@dataclass
class SolverBackend:
    """Common settings; subclasses implement :meth:`solve`."""

    mip_gap: float = DEFAULT_GAP
    time_limit: float | None = None
    threads: int | None = 1
    verbose: bool = False
    name = "abstract"
    capabilities = ("LP", "MILP")

    def solve(self, model: ModelInstance) -> SolveResult:  # pragma: no cover
        raise NotImplementedError


class HighsBackend(SolverBackend):
    name = "highs"

    def _build(self, model: ModelInstance, relax: bool = False):
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", bool(self.verbose))
        h.setOptionValue("mip_rel_gap", float(self.mip_gap))
        h.setOptionValue("random_seed", 0)
        if self.threads:
            h.setOptionValue("threads", int(self.threads))
        if self.time_limit:
            h.setOptionValue("time_limit", float(self.time_limit))
        lp = highspy.HighsLp()
        lp.num_col_ = model.n_vars
        lp.num_row_ = model.n_rows
        # HiGHS minimises -U so the duals it reports are negated below
        lp.col_cost_ = -model.objective_vector()
        lp.offset_ = -model.obj_constant
        lb, ub = model.bounds()
        lp.col_lower_ = lb
        lp.col_upper_ = ub
        rlo, rhi = model.row_bounds()
        lp.row_lower_ = rlo
        lp.row_upper_ = rhi
        a = model.matrix().tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = a.indptr.astype(np.int32)
        lp.a_matrix_.index_ = a.indices.astype(np.int32)
        lp.a_matrix_.value_ = a.data.astype(float)
        if model.is_mip and not relax:
            lp.integrality_ = [
                highspy.HighsVarType.kInteger if k else highspy.HighsVarType.kContinuous
                for k in model.integrality()
            ]
        h.passModel(lp)
        return h

    def solve(self, model: ModelInstance) -> SolveResult:
        import highspy

        h = self._build(model)
        t0 = time.perf_counter()
        h.run()
        wall = time.perf_counter() - t0
        ms = h.getModelStatus()
        info = h.getInfo()
        sol = h.getSolution()
        has_x = info.primal_solution_status >= 1 if hasattr(info, "primal_solution_status") else True
        x = np.array(sol.col_value) if has_x and len(sol.col_value) == model.n_vars else None
        is_mip = model.is_mip
        gap = float(info.mip_gap) if is_mip else 0.0
        if not np.isfinite(gap):
            gap = float("inf")
        MS = highspy.HighsModelStatus
        if ms == MS.kOptimal:
            status = OPTIMAL
            gap = max(gap, 0.0) if is_mip else 0.0
        elif ms in (MS.kInfeasible,):
            status = INFEASIBLE
        elif ms in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
            status = UNBOUNDED
        elif x is not None and ms in (MS.kTimeLimit, MS.kIterationLimit, MS.kInterrupt, MS.kSolutionLimit):
            status = FEASIBLE
        else:
            status = ERROR
        res = SolveResult(status=status, x=x, mip_gap=max(gap, 0.0), wall_time=wall,
                          message=h.modelStatusToString(ms))
        if x is not None:
            res.objective = model.objective_value(x)
        if status == OPTIMAL and not is_mip and sol.dual_valid:
            res.row_duals = -np.array(sol.row_dual)
            res.col_duals = -np.array(sol.col_dual)
        return res


class ScipyBackend(SolverBackend):
    """scipy.optimize.milp for MILPs and linprog(method='highs') for LPs."""

    name = "scipy"

    def solve(self, model: ModelInstance) -> SolveResult:
        from scipy.optimize import Bounds, LinearConstraint, linprog, milp

        c = -model.objective_vector()
        lb, ub = model.bounds()
        a = model.matrix()
        rlo, rhi = model.row_bounds()
        t0 = time.perf_counter()
        if model.is_mip:
            opts = {"mip_rel_gap": self.mip_gap, "disp": self.verbose}
            if self.time_limit:
                opts["time_limit"] = self.time_limit
            cons = [LinearConstraint(a, rlo, rhi)] if model.n_rows else []
            r = milp(c, integrality=model.integrality(), bounds=Bounds(lb, ub),
                     constraints=cons, options=opts)
            wall = time.perf_counter() - t0
            x = r.x
            if r.status == 0:
                status = OPTIMAL
            elif r.status == 1 and x is not None:
                status = FEASIBLE
            elif r.status == 2:
                status = INFEASIBLE
            elif r.status == 3:
                status = UNBOUNDED
            else:
                status = ERROR
            gap = float(getattr(r, "mip_gap", 0.0) or 0.0)
            res = SolveResult(status=status, x=x, mip_gap=gap, wall_time=wall, message=r.message)
            if x is not None:
                res.objective = model.objective_value(x)
            return res

        eq = rlo == rhi
        le = ~eq & np.isfinite(rhi)
        ge = ~eq & np.isfinite(rlo)
        a_ub = None
        b_ub = None
        parts, rhs, signs, rows = [], [], [], []
        if le.any():
            parts.append(a[le])
            rhs.append(rhi[le])
            signs.append(np.ones(le.sum()))
            rows.append(np.flatnonzero(le))
        if ge.any():
            parts.append(-a[ge])
            rhs.append(-rlo[ge])
            signs.append(-np.ones(ge.sum()))
            rows.append(np.flatnonzero(ge))
        import scipy.sparse as sp

        if parts:
            a_ub = sp.vstack(parts).tocsr()
            b_ub = np.concatenate(rhs)
        r = linprog(
            c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=a[eq] if eq.any() else None,
            b_eq=rlo[eq] if eq.any() else None,
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        wall = time.perf_counter() - t0
        status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(r.status, ERROR)
        res = SolveResult(status=status, x=r.x, wall_time=wall, message=r.message)
        if r.x is not None:
            res.objective = model.objective_value(r.x)
        if status == OPTIMAL:
            y = np.zeros(model.n_rows)
            if eq.any():
                y[eq] = -np.asarray(r.eqlin.marginals)
            if parts:
                m = -np.asarray(r.ineqlin.marginals)
                offset = 0
                for sgn, idx in zip(signs, rows):
                    y[idx] += sgn * m[offset:offset + len(idx)]
                    offset += len(idx)
            d = -(np.asarray(r.lower.marginals) + np.asarray(r.upper.marginals))
            res.row_duals = y
            res.col_duals = d
        return res


BACKENDS = {"highs": HighsBackend, "scipy": ScipyBackend}


def get_backend(name: str | None = None, **settings) -> SolverBackend:
    """Backend by name; ``GATEPLAN_BACKEND`` selects it when no name is given."""
    name = (name or os.environ.get(BACKEND_ENV) or "highs").lower()
    if name not in BACKENDS:
        raise SolverError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}")
    if name == "highs":
        try:
            import highspy  # noqa: F401
        except ImportError:
            log.warning("highspy not installed, falling back to scipy backend")
            name = "scipy"
    return BACKENDS[name](**settings)


def solve(model: ModelInstance, backend: SolverBackend | None = None) -> SolveResult:
    backend = backend or get_backend()
    try:
        res = backend.solve(model)
    except Exception as exc:  # backend crash, not a model status
        raise SolverError(f"{backend.name} failed: {exc}") from exc
    log.debug("%s: %s obj=%.6g gap=%.2e in %.2fs", backend.name, res.status,
              res.objective, res.mip_gap, res.wall_time)
    return res


def fix_integers_and_resolve(
    model: ModelInstance,
    incumbent: SolveResult,
    backend: SolverBackend | None = None,
) -> SolveResult:
    """Fix every binary at its incumbent value and re-solve the LP for duals."""
    if incumbent.x is None:
        raise SolverError("incumbent has no primal values")
    lp = model.copy()
    for vid in lp.integer_ids:
        lp.fix(vid, round(float(incumbent.x[vid])))
    res = solve(lp, backend)
    if not res.ok:
        raise SolverError(f"fixed-binary LP is {res.status}; incumbent infeasible after fixing")
    res.extra["lp"] = lp
    return res
