"""Convex per-grid-point subproblem of the lease planner.

For a fixed edge-capacity share and admitted-rate cap, the planner picks a
target blocking probability ``P_n`` per station by solving

    minimize    c . P  (+ const)
    subject to  sum_n alpha_n * F(P_n)   <= budget_rhs
                sum_n (1 - P_n) lambda_n <= rate_rhs
                p_min_n <= P_n <= 1

where ``F(p) = a_n (1 - p) + 1/p`` upper-bounds the number of channels a
station needs to keep blocking at ``p`` under offered load ``a_n``.  F is
strictly decreasing and convex on (0, 1], so the problem is convex.

Solved with a plain log-barrier interior-point method: damped Newton on
``t * c.P - sum_i log(-g_i)``, multiplying ``t`` by 20 per outer round
until the duality gap bound m/t drops below 1e-10.  Everything is
deterministic; a fixed index-weighted nudge on the objective breaks exact
ties the same way every run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Infeasible", "SubproblemSpec", "SubproblemSolution", "solve", "kkt_report"]

_GAP_TOL = 1e-10
_NEWTON_TOL = 1e-24
_QUAD_REGION = 0.06  # squared Newton decrement below which pure steps contract
_T_MULT = 20.0
_MAX_NEWTON = 120


class Infeasible(ValueError):
    """The budget cannot cover the channel bound even at all-local."""


@dataclass(frozen=True, eq=False)
class SubproblemSpec:
    c: np.ndarray          # objective weight per station (W per unit blocking)
    const: float           # objective offset (W)
    alpha: np.ndarray      # channel price per station
    load: np.ndarray       # offered load a_n per station
    budget_rhs: float      # budget left for channels
    rate: np.ndarray       # task arrival rate per station
    rate_rhs: float        # admitted-rate cap
    p_min: np.ndarray      # lowest reachable blocking per station

    def __post_init__(self):
        for name in ("c", "alpha", "load", "rate", "p_min"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.c.shape[0]
        for name in ("alpha", "load", "rate", "p_min"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have one entry per station")
        if np.any(self.alpha < 0) or np.any(self.load < 0):
            raise ValueError("prices and loads must be nonnegative")
        if np.any(self.rate <= 0):
            raise ValueError("arrival rates must be positive")
        if np.any((self.p_min < 0) | (self.p_min >= 1)):
            raise ValueError("p_min must lie in [0, 1)")
        if self.rate_rhs < 0:
            raise ValueError("rate_rhs must be nonnegative")

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    p: np.ndarray
    objective: float
    mode: str                    # "interior" or "vertex"
    gap: float
    newton_iters: int
    multipliers: dict = field(default_factory=dict)


def _channel_bound(spec: SubproblemSpec, p: np.ndarray) -> np.ndarray:
    return spec.load * (1.0 - p) + 1.0 / p


def _residuals(spec: SubproblemSpec, p: np.ndarray) -> tuple[float, float]:
    g_budget = float(np.dot(spec.alpha, _channel_bound(spec, p))) - spec.budget_rhs
    g_rate = float(np.dot(spec.rate, 1.0 - p)) - spec.rate_rhs
    return g_budget, g_rate


def _strictly_feasible(spec: SubproblemSpec, p: np.ndarray) -> bool:
    if np.any(p <= spec.p_min) or np.any(p >= 1.0) or np.any(p <= 0.0):
        return False
    g_budget, g_rate = _residuals(spec, p)
    tol_b = 1e-12 * max(1.0, abs(spec.budget_rhs))
    tol_r = 1e-12 * max(1.0, abs(spec.rate_rhs))
    return g_budget <= -tol_b and g_rate <= -tol_r


def _phase_one(spec: SubproblemSpec) -> np.ndarray:
    mid = 0.5 * (spec.p_min + 1.0)
    if _strictly_feasible(spec, mid):
        return mid
    # Walk toward all-ones, which satisfies both couplings in the limit.
    for k in range(1, 15):
        delta = 10.0 ** (-k)
        cand = spec.p_min + (1.0 - spec.p_min) * (1.0 - delta)
        if _strictly_feasible(spec, cand):
            return cand
    raise Infeasible("no strictly feasible blocking vector found")


def solve(spec: SubproblemSpec) -> SubproblemSolution:
    """Minimize the planned power over feasible blocking vectors."""
    total_alpha = float(np.sum(spec.alpha))
    ones = np.ones(spec.n)
    if total_alpha > spec.budget_rhs * (1.0 + 1e-12):
        raise Infeasible(
            f"channel budget {spec.budget_rhs:.6g} cannot cover the all-local "
            f"bound {total_alpha:.6g}"
        )
    # Degenerate cases pin the solution at the all-ones vertex: either the
    # rate cap admits nothing, or the budget has no slack beyond F(1)=1.
    vertex_rate = spec.rate_rhs <= 1e-12 * float(np.sum(spec.rate))
    vertex_budget = spec.budget_rhs - total_alpha <= 1e-12 * max(1.0, spec.budget_rhs)
    if vertex_rate or vertex_budget:
        return SubproblemSolution(
            p=ones,
            objective=float(np.dot(spec.c, ones)) + spec.const,
            mode="vertex",
            gap=0.0,
            newton_iters=0,
        )

    c_scale = max(1.0, float(np.max(np.abs(spec.c))))
    tie = 1e-10 * (spec.n - np.arange(spec.n)) / spec.n
    c_eff = spec.c / c_scale + tie

    p = _phase_one(spec)
    m = 2 + 2 * spec.n
    t = 1.0
    total_newton = 0

    def barrier(pt: np.ndarray, t_now: float) -> float:
        g_budget, g_rate = _residuals(spec, pt)
        return (
            t_now * float(np.dot(c_eff, pt))
            - math.log(-g_budget)
            - math.log(-g_rate)
            - float(np.sum(np.log(pt - spec.p_min)))
            - float(np.sum(np.log(1.0 - pt)))
        )

    while m / t > _GAP_TOL:
        last_dec = math.inf
        for _ in range(_MAX_NEWTON):
            total_newton += 1
            g_budget, g_rate = _residuals(spec, p)
            s_budget, s_rate = -g_budget, -g_rate
            s_lo = p - spec.p_min
            s_hi = 1.0 - p
            d_budget = spec.alpha * (-spec.load - 1.0 / p**2)
            grad = (
                t * c_eff
                + d_budget / s_budget
                - spec.rate / s_rate
                - 1.0 / s_lo
                + 1.0 / s_hi
            )
            hess = (
                np.outer(d_budget, d_budget) / s_budget**2
                + np.outer(spec.rate, spec.rate) / s_rate**2
            )
            diag = (
                spec.alpha * (2.0 / p**3) / s_budget
                + 1.0 / s_lo**2
                + 1.0 / s_hi**2
            )
            hess[np.diag_indices(spec.n)] += diag
            step = np.linalg.solve(hess, -grad)
            decrement = float(np.dot(grad, -step))
            if decrement / 2.0 <= _NEWTON_TOL:
                break
            if decrement <= _QUAD_REGION:
                # Contraction region: the value-based test below cannot
                # resolve the tiny decreases once t*c.P dwarfs them, so take
                # bare Newton steps until the decrement hits rounding noise.
                if decrement >= last_dec:
                    break
                size = 1.0
                while size > 1e-14 and not _inside(spec, p + size * step):
                    size *= 0.5
                if size <= 1e-14:
                    break
                p = p + size * step
            else:
                size = 1.0
                base = barrier(p, t)
                while size > 1e-14:
                    cand = p + size * step
                    if _inside(spec, cand) and barrier(cand, t) <= base - 0.25 * size * decrement:
                        break
                    size *= 0.5
                else:
                    break
                p = p + size * step
            last_dec = decrement
        t *= _T_MULT

    t_final = t / _T_MULT
    multipliers, gap = _recover_multipliers(spec, p, t_final, c_scale)
    p = p.copy()
    p[1.0 - p < 1e-10] = 1.0
    # A corner optimum leaves the iterate a barrier-width above the active
    # box bound.  Snap it onto the bound so downstream exact comparisons
    # (channel inversion at the full-lease floor) see the bound itself.
    lo = p - spec.p_min < 1e-8
    p[lo] = spec.p_min[lo]
    return SubproblemSolution(
        p=p,
        objective=float(np.dot(spec.c, p)) + spec.const,
        mode="interior",
        gap=gap,
        newton_iters=total_newton,
        multipliers=multipliers,
    )


def _recover_multipliers(
    spec: SubproblemSpec, p: np.ndarray, t_final: float, c_scale: float
) -> tuple[dict, float]:
    """Dual variables at the final central point.

    The barrier estimate 1/(t s_i) is only as accurate as the slack s_i,
    and for binding constraints s_i ~ 1/t sits below what one ulp of p can
    resolve.  So the estimates only pick the active set; the actual values
    come from a least-squares fit of the stationarity condition, dropping
    any column fitted nonpositive (tiny Lawson-Hanson style loop).
    """
    g_budget, g_rate = _residuals(spec, p)
    slacks = np.concatenate(
        [[-g_budget, -g_rate], p - spec.p_min, 1.0 - p]
    )
    estimate = c_scale / (t_final * slacks)
    d_budget = spec.alpha * (-spec.load - 1.0 / p**2)
    eye = np.eye(spec.n)
    grads = np.column_stack([d_budget, -spec.rate, -eye, eye])
    scale = max(1.0, float(np.max(np.abs(spec.c))))
    contrib = estimate * np.maximum(1.0, np.max(np.abs(grads), axis=0))
    order = [
        int(i)
        for i in np.argsort(-contrib, kind="stable")
        if contrib[i] >= 1e-12 * scale
    ]
    # Grow the active set greedily and keep it minimal: a spread-out
    # min-norm fit over surplus columns would charge slack constraints.
    active: list[int] = []
    best_res = float(np.max(np.abs(spec.c)))
    best_act: list[int] = []
    best_fit = np.zeros(0)
    for idx in order:
        active.append(idx)
        while active:
            fit, *_ = np.linalg.lstsq(grads[:, active], -spec.c, rcond=None)
            if np.all(fit >= 0.0):
                break
            active = [a for a, v in zip(active, fit) if v > 0.0]
        if not active:
            continue
        res = float(np.max(np.abs(spec.c + grads[:, active] @ fit)))
        if res < best_res:
            best_res, best_act, best_fit = res, list(active), fit
        if res <= 1e-12 * scale:
            break
    u = np.zeros_like(slacks)
    u[best_act] = best_fit
    gap = float(np.dot(u, slacks))
    n = spec.n
    multipliers = {
        "budget": float(u[0]),
        "rate": float(u[1]),
        "lower": u[2 : 2 + n],
        "upper": u[2 + n :],
    }
    return multipliers, gap


def _inside(spec: SubproblemSpec, p: np.ndarray) -> bool:
    if np.any(p <= spec.p_min) or np.any(p >= 1.0):
        return False
    g_budget, g_rate = _residuals(spec, p)
    return g_budget < 0.0 and g_rate < 0.0


def kkt_report(spec: SubproblemSpec, sol: SubproblemSolution) -> dict:
    """Independently check a solution against the first-order conditions.

    Rebuilds the Lagrangian gradient from the reported multipliers without
    touching solver state.  For vertex solutions only feasibility applies.
    """
    p = sol.p
    g_budget, g_rate = _residuals(spec, p)
    feas = max(
        g_budget / max(1.0, abs(spec.budget_rhs)),
        g_rate / max(1.0, abs(spec.rate_rhs)),
        float(np.max(spec.p_min - p, initial=-np.inf)),
        float(np.max(p - 1.0, initial=-np.inf)),
    )
    report = {"feasibility": feas, "mode": sol.mode}
    if sol.mode != "interior":
        report["stationarity"] = 0.0
        report["comp_slack"] = 0.0
        return report
    mult = sol.multipliers
    d_budget = spec.alpha * (-spec.load - 1.0 / p**2)
    lagr = (
        spec.c
        + mult["budget"] * d_budget
        - mult["rate"] * spec.rate
        - mult["lower"]
        + mult["upper"]
    )
    scale = max(1.0, float(np.max(np.abs(spec.c))))
    report["stationarity"] = float(np.max(np.abs(lagr))) / scale
    comp = [
        mult["budget"] * -g_budget,
        mult["rate"] * -g_rate,
        float(np.max(mult["lower"] * (p - spec.p_min))),
        float(np.max(mult["upper"] * (1.0 - p))),
    ]
    report["comp_slack"] = max(comp) / scale
    return report
