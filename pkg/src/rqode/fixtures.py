"""Problem fixtures: registered oracle families plus a declarative JSON form.

A fixture bundles an :class:`IvpProblem` (evaluation and derivative oracles,
hand-coded per problem), its smoothness-class declaration, and a reference
solution where a closed form exists.  The declarative file format carries
one JSON object per fixture: ``{name, d, r, rho, D, H, p?, a, b, eta}``;
oracles are bound by name from the registry at load time.

Derivative bounds are declared on a reachable tube around the solution, not
on all of R^d; ``validate_holder`` checks them on sampled grids only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import HolderParams, IvpProblem

__all__ = [
    "Fixture",
    "get_fixture",
    "fixture_names",
    "load_fixture_file",
    "write_fixture_file",
    "default_fixture_entries",
    "reference_solver",
]


@dataclass
class Fixture:
    name: str
    problem: IvpProblem
    params: HolderParams
    reference: Optional[Callable]   # t (scalar or array) -> states
    y_star: Optional[float] = None  # endpoint value for scalar fixtures
    meta: Optional[dict] = None

    @property
    def scalar(self) -> bool:
        return self.problem.dim == 1 and self.params.p is not None


def _as_batch(y):
    y = np.asarray(y, dtype=float)
    return (y[None, :], False) if y.ndim == 1 else (y, True)


# ---------------------------------------------------------------------------
# oracle families

def _sin_f(y):
    return np.sin(y)


def _sin_derivs(k, y):
    y = np.asarray(y, dtype=float)
    if k == 0:
        return np.sin(y)
    if k == 1:
        return np.cos(y).reshape(1, 1)
    if k == 2:
        return (-np.sin(y)).reshape(1, 1, 1)
    raise ValueError("sin_flow supplies derivatives up to order 2")


def _sin_reference(eta, a):
    c = np.tan(eta / 2.0)

    def ref(t):
        t = np.asarray(t, dtype=float)
        th = 2.0 * np.arctan(c * np.exp(t - a))
        return th[..., None] if th.ndim else np.array([th])
    return ref


def _exp_f(y):
    return np.asarray(y, dtype=float)


def _exp_derivs(k, y):
    y = np.asarray(y, dtype=float)
    if k == 0:
        return y
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        return np.zeros((1, 1, 1))
    raise ValueError("exp_flow supplies derivatives up to order 2")


def _const_oracles(c):
    c = np.asarray(c, dtype=float)
    d = c.size

    def f(y):
        Y, batch = _as_batch(y)
        out = np.broadcast_to(c, Y.shape).copy()
        return out if batch else out[0]

    def derivs(k, y):
        if k == 0:
            return c.copy()
        return np.zeros((d,) * (k + 1))
    return f, derivs


def _cos_time_f(y):
    Y, batch = _as_batch(y)
    out = np.empty_like(Y)
    out[:, 0] = 1.0
    out[:, 1] = np.cos(Y[:, 0])
    return out if batch else out[0]


def _cos_time_derivs(k, y):
    y = np.asarray(y, dtype=float)
    u = float(y[0])
    if k == 0:
        return np.array([1.0, np.cos(u)])
    if k == 1:
        J = np.zeros((2, 2))
        J[1, 0] = -np.sin(u)
        return J
    if k == 2:
        T = np.zeros((2, 2, 2))
        T[1, 0, 0] = -np.cos(u)
        return T
    raise ValueError("cos_time supplies derivatives up to order 2")


def _inv1p_f(y):
    return 1.0 / (1.0 + np.asarray(y, dtype=float))


def _inv1p_derivs(k, y):
    y = np.asarray(y, dtype=float)
    base = 1.0 + y
    if k == 0:
        return 1.0 / base
    if k == 1:
        return (-(base ** -2.0)).reshape(1, 1)
    if k == 2:
        return (2.0 * base ** -3.0).reshape(1, 1, 1)
    raise ValueError("inv1p supplies derivatives up to order 2")


# ---------------------------------------------------------------------------
# registry

def _build_sin_flow(entry):
    a, b = entry["a"], entry["b"]
    eta = np.asarray(entry["eta"], dtype=float)
    problem = IvpProblem(1, _sin_f, _sin_derivs, eta, (a, b), name=entry["name"])
    return problem, _sin_reference(float(eta[0]), a), None


def _build_exp_flow(entry):
    a, b = entry["a"], entry["b"]
    eta = np.asarray(entry["eta"], dtype=float)

    def ref(t):
        t = np.asarray(t, dtype=float)
        v = eta[0] * np.exp(t - a)
        return v[..., None] if v.ndim else np.array([v])
    problem = IvpProblem(1, _exp_f, _exp_derivs, eta, (a, b), name=entry["name"])
    return problem, ref, None


def _build_constant(entry):
    a, b = entry["a"], entry["b"]
    eta = np.asarray(entry["eta"], dtype=float)
    c = np.asarray(entry.get("c", [0.7, -0.3][: len(eta)]), dtype=float)
    f, derivs = _const_oracles(c)

    def ref(t):
        t = np.asarray(t, dtype=float)
        return eta + np.multiply.outer(t - a, c)
    problem = IvpProblem(len(eta), f, derivs, eta, (a, b), name=entry["name"])
    return problem, ref, None


def _build_cos_time(entry):
    a, b = entry["a"], entry["b"]
    eta = np.asarray(entry["eta"], dtype=float)

    def ref(t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, np.sin(t)], axis=-1)
    problem = IvpProblem(2, _cos_time_f, _cos_time_derivs, eta, (a, b),
                         name=entry["name"])
    return problem, ref, None


def _build_inv1p(entry):
    a, b = entry["a"], entry["b"]
    eta = np.asarray(entry["eta"], dtype=float)

    def ref(t):
        t = np.asarray(t, dtype=float)
        v = -1.0 + np.sqrt((1.0 + eta[0]) ** 2 + 2.0 * (t - a))
        return v[..., None] if v.ndim else np.array([v])
    problem = IvpProblem(1, _inv1p_f, _inv1p_derivs, eta, (a, b),
                         name=entry["name"])
    y_star = float(-1.0 + np.sqrt((1.0 + eta[0]) ** 2 + 2.0 * (b - a)))
    return problem, ref, y_star


_BUILDERS = {
    "sin_flow": _build_sin_flow,
    "exp_flow": _build_exp_flow,
    "constant": _build_constant,
    "cos_time": _build_cos_time,
    "inv1p": _build_inv1p,
}


def default_fixture_entries() -> list:
    """The stock declarative entries shipped with the package."""
    return [
        {"name": "sin_flow", "family": "sin_flow", "d": 1, "r": 0, "rho": 1.0,
         "D": [1.0], "H": 1.0, "a": 0.0, "b": 1.0, "eta": [1.0]},
        {"name": "sin_flow_r1", "family": "sin_flow", "d": 1, "r": 1, "rho": 1.0,
         "D": [1.0, 1.0], "H": 1.0, "a": 0.0, "b": 1.0, "eta": [1.0]},
        {"name": "exp_flow", "family": "exp_flow", "d": 1, "r": 0, "rho": 1.0,
         "D": [2.0], "H": 1.0, "a": 0.0, "b": 0.5, "eta": [1.0]},
        {"name": "exp_flow_r1", "family": "exp_flow", "d": 1, "r": 1, "rho": 1.0,
         "D": [2.0, 1.0], "H": 1e-9, "a": 0.0, "b": 0.5, "eta": [1.0]},
        {"name": "constant", "family": "constant", "d": 2, "r": 0, "rho": 1.0,
         "D": [1.0], "H": 1e-30, "a": 0.0, "b": 1.0, "eta": [0.2, -0.1],
         "c": [0.7, -0.3]},
        {"name": "constant_r1", "family": "constant", "d": 1, "r": 1, "rho": 1.0,
         "D": [1.0, 1e-6], "H": 1e-30, "a": 0.0, "b": 1.0, "eta": [0.5],
         "c": [0.7]},
        {"name": "cos_time", "family": "cos_time", "d": 2, "r": 0, "rho": 1.0,
         "D": [1.0], "H": 1.0, "component_H": [0.0, 1.0],
         "a": 0.0, "b": 1.0, "eta": [0.0, 0.0]},
        {"name": "cos_time_r1", "family": "cos_time", "d": 2, "r": 1, "rho": 1.0,
         "D": [1.0, 1.0], "H": 1.0, "component_H": [0.0, 1.0],
         "a": 0.0, "b": 1.0, "eta": [0.0, 0.0]},
        {"name": "inv1p", "family": "inv1p", "d": 1, "r": 0, "rho": 1.0,
         "D": [1.0], "H": 1.0, "p": 0.4, "a": 0.0, "b": 1.5, "eta": [0.0]},
        {"name": "inv1p_r1", "family": "inv1p", "d": 1, "r": 1, "rho": 1.0,
         "D": [1.0, 1.0], "H": 2.0, "p": 0.4, "a": 0.0, "b": 1.5, "eta": [0.0]},
    ]


def _fixture_from_entry(entry: dict) -> Fixture:
    family = entry.get("family", entry["name"])
    if family == "planted":
        from .planted import planted_fixture_from_entry
        return planted_fixture_from_entry(entry)
    if family not in _BUILDERS:
        raise KeyError("unknown fixture family %r" % family)
    problem, reference, y_star = _BUILDERS[family](entry)
    cH = entry.get("component_H")
    params = HolderParams(r=int(entry["r"]), rho=float(entry["rho"]),
                          D=tuple(entry["D"]), H=float(entry["H"]),
                          p=entry.get("p"),
                          component_H=None if cH is None else tuple(cH))
    return Fixture(name=entry["name"], problem=problem, params=params,
                   reference=reference, y_star=y_star, meta=dict(entry))


_DEFAULTS = None


def _default_map() -> dict:
    global _DEFAULTS
    if _DEFAULTS is None:
        _DEFAULTS = {e["name"]: e for e in default_fixture_entries()}
    return _DEFAULTS


def fixture_names() -> list:
    return sorted(_default_map())


def get_fixture(name: str) -> Fixture:
    """Build a stock fixture by name."""
    try:
        entry = _default_map()[name]
    except KeyError:
        raise KeyError("unknown fixture %r; known: %s"
                       % (name, ", ".join(fixture_names()))) from None
    return _fixture_from_entry(entry)


def load_fixture_file(path) -> list:
    """Load fixtures from a declarative JSON file (a list of entries)."""
    with open(path) as fh:
        entries = json.load(fh)
    return [_fixture_from_entry(e) for e in entries]


def write_fixture_file(entries: list, path) -> None:
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True)
        fh.write("\n")


def reference_solver(problem: IvpProblem, rtol: float = 1e-12,
                     atol: float = 1e-13, max_step: float = np.inf,
                     self_consistency: float = 1e-9) -> Callable:
    """High-order reference integrator, tightened until self-consistent.

    Returns a callable t -> states built on a dense DOP853 solution.  The
    solve is repeated at a 100x looser tolerance and the two must agree to
    ``self_consistency``; otherwise the fixture needs a closed form instead.
    ``max_step`` guards problems with narrow features the step controller
    could otherwise skip.
    """
    def rhs(t, y):
        return np.asarray(problem.f(y), dtype=float)

    sols = []
    for scale in (10.0, 1.0):
        sol = solve_ivp(rhs, problem.interval, problem.eta, method="DOP853",
                        rtol=max(rtol * scale, 2.4e-14), atol=atol * scale,
                        max_step=max_step, dense_output=True)
        if not sol.success:
            raise RuntimeError("reference integration failed: %s" % sol.message)
        sols.append(sol)
    probe = np.linspace(problem.a, problem.b, 17)
    gap = np.max(np.abs(sols[0].sol(probe) - sols[1].sol(probe)))
    if gap > self_consistency:
        raise RuntimeError("reference integrator not self-consistent: gap %g" % gap)
    dense = sols[1].sol

    def ref(t):
        t = np.asarray(t, dtype=float)
        out = dense(t.ravel() if t.ndim else t[None])
        out = out.T
        return out if t.ndim else out[0]
    return ref
