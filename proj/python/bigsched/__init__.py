"""Schedule space exploration for sparse tensor contractions.

Thin wrappers over the C++ core; documents come back as dicts.
"""

import json

from . import _core
from ._core import BigschedError, SolverError, UsageError, ValidationError

__all__ = [
    "BigschedError",
    "SolverError",
    "UsageError",
    "ValidationError",
    "parse_einsum",
    "enumerate_schedules",
    "prune",
    "select",
    "emit",
    "verify",
    "evaluate",
    "solver_available",
]


def parse_einsum(expr, sparse=()):
    """Canonical text of a validated contraction."""
    return _core.parse_einsum(expr, list(sparse))


def enumerate_schedules(expr, sparse=(), max_mem_depth=2, split_b=True):
    return json.loads(_core.enumerate_json(expr, list(sparse), max_mem_depth, split_b))


def _run(expr, sparse, bounds, constraints, llc_bytes, llc_fraction, mem_threshold,
         skip_stage2, stage3, solver, timeout, tie_break, max_mem_depth):
    return json.loads(_core.pipeline_json(
        expr, list(sparse),
        None if bounds is None else json.dumps(bounds),
        None if constraints is None else json.dumps(constraints),
        llc_bytes, llc_fraction, mem_threshold, skip_stage2, stage3,
        solver or "", timeout, tie_break, max_mem_depth))


def prune(expr, sparse=(), constraints=None, stage3=False, mem_threshold=2,
          skip_stage2=False, solver=None, timeout=10.0, max_mem_depth=2):
    """Compile-time stages. Stage 3 runs when constraints are given or stage3 is set."""
    return _run(expr, sparse, None, constraints, 0, 0.5, mem_threshold, skip_stage2,
                stage3, solver, timeout, "hash", max_mem_depth)


def select(expr, bounds, llc_bytes, sparse=(), constraints=None, stage3=False,
           llc_fraction=0.5, mem_threshold=2, skip_stage2=False, solver=None,
           timeout=10.0, tie_break="hash", max_mem_depth=2):
    """Every stage; `bounds` is a binding dict such as {"bounds": {"I": 8}}."""
    return _run(expr, sparse, bounds, constraints, llc_bytes, llc_fraction, mem_threshold,
                skip_stage2, stage3, solver, timeout, tie_break, max_mem_depth)


def emit(expr, schedule_id, sparse=(), format="pseudo"):
    return _core.emit(expr, list(sparse), schedule_id, format)


def verify(expr, extents, sparse=(), sparsities=(0.1, 0.3, 1.0), seed=1, schedule_id=None):
    """Checks schedules against the dense reference on random inputs."""
    return _core.verify_random(expr, list(sparse), dict(extents), list(sparsities), seed,
                               schedule_id)


def evaluate(poly, binding, expr="", sparse=()):
    return _core.evaluate(poly, json.dumps(binding), expr, list(sparse))


def solver_available(path=""):
    return _core.solver_available(path)
