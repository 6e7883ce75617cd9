"""Factor-graph container and a dense Levenberg-Marquardt solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..geometry import Plane, PoseSE3, SemanticClass
from .factors import (
    FACTOR_KINDS,
    PLANE,
    POINT,
    POSE,
    Factor,
    FloorCentroidFactor,
    MarkerFactor,
    OdometryFactor,
    PlaneObservationFactor,
    RoomCentroidFactor,
    Variable,
    _pose_from,
    _pose_tokens,
    retract,
)

log = logging.getLogger(__name__)


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    initial_damping: float = 1e-4
    cost_tolerance: float = 1e-9
    update_tolerance: float = 1e-8
    max_damping: float = 1e12

    def __post_init__(self):
        for name in ("max_iterations", "initial_damping", "cost_tolerance", "update_tolerance", "max_damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"solver.{name} must be positive")


@dataclass
class SolveResult:
    values: dict
    cost_trace: list[float]
    iterations: int
    converged: bool
    reason: str


@dataclass
class Problem:
    variables: dict[str, Variable] = field(default_factory=dict)
    factors: list[Factor] = field(default_factory=list)
    config: SolverConfig = field(default_factory=SolverConfig)

    def add_variable(self, kind: str, key: str, value, fixed: bool = False) -> Variable:
        if key in self.variables:
            raise ProblemError(f"duplicate variable {key!r}")
        v = Variable(kind, key, value, fixed)
        self.variables[key] = v
        return v

    def add_factor(self, factor: Factor) -> Factor:
        for k in factor.keys:
            if k not in self.variables:
                raise ProblemError(f"{factor.kind} factor references unknown variable {k!r}")
        self.factors.append(factor)
        return factor

    def values(self) -> dict:
        return {k: v.value for k, v in self.variables.items()}

    def validate(self) -> None:
        if not self.factors:
            raise ProblemError("problem has no factors")
        if not any(v.fixed for v in self.variables.values()):
            raise ProblemError("problem has no fixed gauge variable")
        used = {k for f in self.factors for k in f.keys}
        for key in sorted(self.variables):
            if key not in used:
                raise ProblemError(f"orphan variable {key!r} has no factors")

    def total_cost(self, values: dict | None = None) -> float:
        values = self.values() if values is None else values
        return float(sum(f.cost(*(values[k] for k in f.keys)) for f in self.factors))

    def _layout(self):
        offsets, n = {}, 0
        for key in sorted(self.variables):
            v = self.variables[key]
            if v.fixed:
                continue
            offsets[key] = n
            n += v.dim
        return offsets, n

    def linearize(self, values: dict, offsets: dict, n: int):
        H = np.zeros((n, n))
        g = np.zeros(n)
        for f in self.factors:
            vals = [values[k] for k in f.keys]
            r = f.residual(*vals)
            w, _ = f.robust_weights(r)
            Js = f.jacobians(*vals)
            info = w * f.information
            idx = []
            for key, J in zip(f.keys, Js):
                if key in offsets:
                    o = offsets[key]
                    idx.append((np.arange(o, o + J.shape[1]), J))
            for ia, Ja in idx:
                g[ia] += Ja.T @ info @ r
                for ib, Jb in idx:
                    H[np.ix_(ia, ib)] += Ja.T @ info @ Jb
        return H, g

    def apply(self, values: dict, offsets: dict, delta: np.ndarray) -> dict:
        out = dict(values)
        for key, o in offsets.items():
            v = self.variables[key]
            out[key] = retract(v.kind, values[key], delta[o : o + v.dim])
        return out


def solve(problem: Problem) -> SolveResult:
    """Levenberg-Marquardt with multiplicative diagonal damping.

    A step is accepted only when it lowers the total cost by more than the
    relative cost tolerance; the trace holds the initial cost followed by
    the cost after every accepted step.
    """
    problem.validate()
    cfg = problem.config
    values = problem.values()
    offsets, n = problem._layout()
    cost = problem.total_cost(values)
    trace = [cost]
    lam = cfg.initial_damping
    if cost == 0.0 or n == 0:
        return SolveResult(values, trace, 0, True, "zero cost" if cost == 0.0 else "nothing to optimize")
    reason, converged, it = "max iterations", False, 0
    for it in range(1, cfg.max_iterations + 1):
        H, g = problem.linearize(values, offsets, n)
        diag = np.maximum(np.diag(H), 1e-12)
        accepted = False
        while lam <= cfg.max_damping:
            A = H + lam * np.diag(diag)
            try:
                delta = -cho_solve(cho_factor(A), g)
            except LinAlgError:
                lam *= 10.0
                continue
            if np.linalg.norm(delta) < cfg.update_tolerance:
                reason, converged = "update below tolerance", True
                break
            trial = problem.apply(values, offsets, delta)
            new_cost = problem.total_cost(trial)
            if new_cost < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            if not converged:
                reason, converged = "no further decrease", True
            it -= 1
            break
        decrease = cost - new_cost
        if decrease <= cfg.cost_tolerance * cost:
            reason, converged = "cost decrease below tolerance", True
            it -= 1
            break
        values, cost = trial, new_cost
        trace.append(cost)
        lam = max(lam / 10.0, 1e-15)
        if np.linalg.norm(delta) < cfg.update_tolerance:
            reason, converged = "update below tolerance", True
            break
    log.info("solve: %d iterations, cost %.6g -> %.6g (%s)", it, trace[0], trace[-1], reason)
    return SolveResult(values, trace, it, converged, reason)


# --------------------------------------------------------------------------
# plain-text dump: one variable or factor per line
# --------------------------------------------------------------------------


def _fmt(xs) -> str:
    return " ".join(repr(float(x)) for x in xs)


def dump_problem(problem: Problem) -> str:
    lines = ["# scenegraph-slam factor graph"]
    for key in sorted(problem.variables):
        v = problem.variables[key]
        flag = "fixed" if v.fixed else "free"
        if v.kind == POSE:
            body = _fmt(_pose_tokens(v.value))
        elif v.kind == PLANE:
            p = v.value
            body = f"{p.cls.value} {_fmt([*p.normal, p.offset, *p.centroid])} {p.inlier_count}"
        else:
            body = _fmt(v.value)
        lines.append(f"VAR {v.kind} {key} {flag} {body}")
    for f in problem.factors:
        robust = "none" if f.robust is None else f"{f.robust[0]}:{float(f.robust[1])!r}"
        meas = f.measurement_tokens()
        lines.append(
            f"FACTOR {f.kind} {len(f.keys)} {' '.join(f.keys)} {robust} {f.dim} {_fmt(f.information.reshape(-1))} "
            f"{len(meas)} {_fmt(meas)}".rstrip()
        )
    return "\n".join(lines) + "\n"


def load_problem(text: str, config: SolverConfig | None = None) -> Problem:
    prob = Problem(config=config or SolverConfig())
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            if tok[0] == "VAR":
                kind, key, fixed = tok[1], tok[2], tok[3] == "fixed"
                if kind == POSE:
                    value = _pose_from(tok[4:16])
                elif kind == PLANE:
                    nums = [float(x) for x in tok[5:12]]
                    value = Plane(nums[:3], nums[3], SemanticClass(tok[4]), nums[4:7], int(tok[12]))
                elif kind == POINT:
                    value = np.array([float(x) for x in tok[4:7]])
                else:
                    raise ProblemError(f"unknown variable kind {kind!r}")
                prob.add_variable(kind, key, value, fixed)
            elif tok[0] == "FACTOR":
                kind, nk = tok[1], int(tok[2])
                keys = tok[3 : 3 + nk]
                pos = 3 + nk
                robust_tok = tok[pos]
                robust = None if robust_tok == "none" else (robust_tok.split(":")[0], float(robust_tok.split(":")[1]))
                dim = int(tok[pos + 1])
                info = np.array([float(x) for x in tok[pos + 2 : pos + 2 + dim * dim]]).reshape(dim, dim)
                pos += 2 + dim * dim
                nm = int(tok[pos])
                meas = [float(x) for x in tok[pos + 1 : pos + 1 + nm]]
                prob.add_factor(_make_factor(kind, keys, info, robust, meas))
            else:
                raise ProblemError(f"unknown record {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ProblemError(f"line {lineno}: {exc}") from exc
    return prob


def _make_factor(kind, keys, info, robust, meas) -> Factor:
    cls = FACTOR_KINDS.get(kind)
    if cls is None:
        raise ProblemError(f"unknown factor kind {kind!r}")
    if cls in (OdometryFactor, MarkerFactor):
        return cls(keys[0], keys[1], _pose_from(meas), info)
    if cls is PlaneObservationFactor:
        local = Plane(meas[:3], meas[3], SemanticClass.WALL, np.zeros(3))
        return cls(keys[0], keys[1], local, info, robust)
    if cls is RoomCentroidFactor:
        return cls(keys[0], keys[1:], np.reshape(meas, (-1, 3)), info)
    if cls is FloorCentroidFactor:
        return cls(keys[0], keys[1:], info)
    return cls(keys[0], keys[1], float(info[0, 0]))
