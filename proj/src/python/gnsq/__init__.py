"""Python front end for the gnsq solvers.

Configs, problem specs and constants are plain dicts with the same schema as the
``gnsq`` command-line tool.
"""

import json

import numpy as np

from . import _gnsq
from ._gnsq import GnsqError

__all__ = ["GnsqError", "run", "solve", "estimate", "plan", "problem_values"]


def _result(d):
    d["trace"] = [json.loads(line) for line in d["trace"]]
    return d


def run(config, seed=0):
    """Run one seed of a full run config (``schema``, ``problem``, ``solver``)."""
    cfg = dict(config)
    cfg.setdefault("schema", 1)
    return _result(_gnsq.run(json.dumps(cfg), seed))


def solve(residual, x0, m=None, jacobian=None, solver=None, seed=0):
    """Minimize ||F(x)||/sqrt(m) for a Python residual F: R^n -> R^m.

    ``jacobian`` returns the m x n matrix; finite differences are used when it is None.
    """
    x0 = np.asarray(x0, dtype=float)
    if m is None:
        m = len(np.atleast_1d(residual(x0)))
    wrap_r = lambda x: np.asarray(residual(x), dtype=float).reshape(-1)
    wrap_j = None if jacobian is None else (
        lambda x: np.asarray(jacobian(x), dtype=float).reshape(m, -1))
    return _result(_gnsq.solve(wrap_r, wrap_j, m, x0, json.dumps(solver or {"scheme": "scheme1"}), seed))


def estimate(problem, cloud=64, radius=1.0, seed=0, batch=0):
    return json.loads(_gnsq.estimate(json.dumps(problem), cloud, radius, seed, batch))


def plan(formula, constants, **params):
    """Budgets for formula 21, 25, 28 or 31. E_g2_0 defaults to 1 as in the CLI."""
    params.setdefault("E_g2_0", 1.0)
    return json.loads(_gnsq.plan(formula, json.dumps(constants), json.dumps(params)))


def problem_values(problem, x):
    """Residual vector, f1hat and the gradient of f2hat at x."""
    F, f1, g = _gnsq.problem_values(json.dumps(problem), np.asarray(x, dtype=float))
    return F, f1, g
