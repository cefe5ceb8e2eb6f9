"""Model building layer: tables, builders and solver backends."""

from .backends import (
    BACKENDS,
    HighsBackend,
    ScipyBackend,
    SolverBackend,
    SolverError,
    fix_integers_and_resolve,
    get_backend,
    solve,
)
from .builder import (
    NODAL,
    SCOPE_ALL,
    SCOPE_INTER,
    SCOPE_INTRA,
    ZONAL,
    FixedDecisions,
    apply_fixed,
    build_balance_constraints,
    build_device_constraints,
    build_model,
    build_network_constraints,
    build_objective,
    expected_row_counts,
    new_model,
    prices_from_duals,
)
from .model import (
    BINARY,
    CONTINUOUS,
    ERROR,
    FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    ModelInstance,
    SolveResult,
    dual_objective,
    export_lp,
    export_model,
    export_mps,
)
