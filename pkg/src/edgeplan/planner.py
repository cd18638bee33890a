"""Grid planners that turn a scenario into a lease plan.

Both planners sweep a grid over the edge-capacity share ``y``, solve the
convex blocking subproblem at each grid point, round the resulting
blocking targets to whole channel counts, and keep the cheapest plan.
The all-local plan (no leases at all) is always a candidate, so a planner
can never return something worse than not offloading.

``gcasd`` plans for soft deadlines: admitted work must meet its deadline
with probability ``1 - eps`` per class, enforced through the largest
admissible edge arrival rate at each ``y``.

``gcahd`` plans for hard deadlines: every offloaded task also schedules a
late local backup, so instead of an admission probe it sweeps a second
grid over the edge arrival rate and charges the expected overlap/wasted
backup energy to the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import station_upload_table
from .delay import DelayModel, discretize_sojourn, feasible_lambda_star
from .erlang import erlang_b, invert_to_channels
from .power import PowerBreakdown, beyond_unit, hard_power, overlap_unit, soft_power
from .scenario import Allocation, Scenario
from .subproblem import Infeasible, SubproblemSpec, solve

__all__ = ["PlannerConfig", "PlanResult", "gcasd", "gcahd", "plan"]


@dataclass(frozen=True)
class PlannerConfig:
    y_steps: int = 100
    lambda_steps: int = 100
    accuracy: str = "standard"

    def __post_init__(self):
        if self.y_steps < 1 or self.lambda_steps < 2:
            raise ValueError("grids need at least one interior point")


@dataclass(frozen=True, eq=False)
class PlanResult:
    mode: str
    allocation: Allocation
    blocking: tuple[float, ...]
    predicted_power: float
    breakdown: PowerBreakdown
    cost: float
    lambda_star: float      # edge arrival rate the plan was built against
    lambda_achieved: float  # expected offloaded rate after channel rounding

    @property
    def all_local(self) -> bool:
        return self.allocation.es_share == 0.0 and not any(self.allocation.channels)


def _offered_loads(scenario: Scenario, uploads) -> np.ndarray:
    return np.array(
        [
            bs.arrival_rate * uploads[n].mean_slots * scenario.tau
            for n, bs in enumerate(scenario.base_stations)
        ]
    )


def _floor_blocking(scenario: Scenario, loads: np.ndarray) -> np.ndarray:
    return np.array(
        [
            erlang_b(bs.max_channels, loads[n])
            for n, bs in enumerate(scenario.base_stations)
        ]
    )


def _all_local(scenario: Scenario, uploads, mode: str) -> PlanResult:
    n_bs = len(scenario.base_stations)
    ones = np.ones(n_bs)
    bd = soft_power(scenario, ones, uploads)
    return PlanResult(
        mode=mode,
        allocation=Allocation(channels=(0,) * n_bs, es_share=0.0),
        blocking=(1.0,) * n_bs,
        predicted_power=bd.total,
        breakdown=bd,
        cost=0.0,
        lambda_star=0.0,
        lambda_achieved=0.0,
    )


def _round_plan(scenario: Scenario, loads, p_target, y: float):
    """Round blocking targets to channels, then enforce the true budget.

    Rounding picks the largest lease that keeps blocking at or above the
    target, which can only push cost and offload rate down, so the convex
    constraints stay satisfied; the explicit decrement loop is a float
    safety net and trims the priciest station first.
    """
    channels = [
        invert_to_channels(loads[n], float(p_target[n]), bs.max_channels)
        for n, bs in enumerate(scenario.base_stations)
    ]
    prices = [bs.channel_price for bs in scenario.base_stations]
    # Strict comparison against the definitional cost so returned plans
    # satisfy the budget under the same float re-check a caller would run,
    # not merely up to a tolerance.
    while (
        Allocation(tuple(channels), y).cost(scenario) > scenario.budget
        and any(channels)
    ):
        leased = [n for n, x in enumerate(channels) if x > 0]
        worst = max(leased, key=lambda n: (prices[n], -n))
        channels[worst] -= 1
    blocking = np.array(
        [erlang_b(channels[n], loads[n]) for n in range(len(channels))]
    )
    cost = Allocation(tuple(channels), y).cost(scenario)
    return tuple(channels), blocking, cost


def _offload_rate(scenario: Scenario, blocking) -> float:
    return float(
        sum(
            (1.0 - blocking[n]) * bs.arrival_rate
            for n, bs in enumerate(scenario.base_stations)
        )
    )


def gcasd(scenario: Scenario, config: PlannerConfig = PlannerConfig()) -> PlanResult:
    """Soft-deadline planner: y-grid, admission cap, convex blocking step."""
    uploads = [station_upload_table(bs, scenario.classes) for bs in scenario.base_stations]
    loads = _offered_loads(scenario, uploads)
    p_min = _floor_blocking(scenario, loads)
    rates = np.array([bs.arrival_rate for bs in scenario.base_stations])
    prices = np.array([bs.channel_price for bs in scenario.base_stations])
    mean_local = scenario.mean_local_slots()
    c = np.array(
        [
            rates[n]
            * scenario.tau
            * (scenario.p_local * mean_local - scenario.p_tx * uploads[n].mean_slots)
            for n in range(len(rates))
        ]
    )
    const = float(
        sum(
            rates[n] * scenario.tau * scenario.p_tx * uploads[n].mean_slots
            for n in range(len(rates))
        )
    )

    best = _all_local(scenario, uploads, "soft")
    for i in range(1, config.y_steps + 1):
        y = i / config.y_steps
        budget_rhs = scenario.budget - scenario.beta * y * scenario.f_es
        lam_star = feasible_lambda_star(scenario, y, uploads, accuracy=config.accuracy)
        if lam_star <= 0.0:
            continue
        spec = SubproblemSpec(
            c=c,
            const=const,
            alpha=prices,
            load=loads,
            budget_rhs=budget_rhs,
            rate=rates,
            rate_rhs=lam_star,
            p_min=p_min,
        )
        try:
            sol = solve(spec)
        except Infeasible:
            continue
        channels, blocking, cost = _round_plan(scenario, loads, sol.p, y)
        bd = soft_power(scenario, blocking, uploads)
        if bd.total < best.predicted_power - 1e-12:
            best = PlanResult(
                mode="soft",
                allocation=Allocation(channels=channels, es_share=y),
                blocking=tuple(float(b) for b in blocking),
                predicted_power=bd.total,
                breakdown=bd,
                cost=cost,
                lambda_star=lam_star,
                lambda_achieved=_offload_rate(scenario, blocking),
            )
    return best


def gcahd(scenario: Scenario, config: PlannerConfig = PlannerConfig()) -> PlanResult:
    """Hard-deadline planner: (y, edge-rate) double grid with backup costs."""
    scenario.validate_hard_mode()
    uploads = [station_upload_table(bs, scenario.classes) for bs in scenario.base_stations]
    loads = _offered_loads(scenario, uploads)
    p_min = _floor_blocking(scenario, loads)
    rates = np.array([bs.arrival_rate for bs in scenario.base_stations])
    prices = np.array([bs.channel_price for bs in scenario.base_stations])
    mean_local = scenario.mean_local_slots()
    class_probs = [k.prob for k in scenario.classes]

    best = _all_local(scenario, uploads, "hard")
    for i in range(1, config.y_steps + 1):
        y = i / config.y_steps
        budget_rhs = scenario.budget - scenario.beta * y * scenario.f_es
        if budget_rhs < float(np.sum(prices)):
            continue
        rate_cap = scenario.es_rate_cap(y)
        for k in range(1, config.lambda_steps):
            lam = rate_cap * k / config.lambda_steps
            delays = DelayModel(scenario, y=y, lam=lam, accuracy=config.accuracy)
            sojourns = [
                discretize_sojourn(delays, j, max_slots=scenario.deadline_slots(j))
                for j in range(len(scenario.classes))
            ]
            hedging = np.zeros(len(rates))
            for n in range(len(rates)):
                table = uploads[n]
                acc = 0.0
                for j in range(len(scenario.classes)):
                    for pmf, w in zip(table.pmfs[j], table.weights[j]):
                        acc += class_probs[j] * w * (
                            overlap_unit(j, pmf, sojourns[j], scenario, y)
                            + beyond_unit(j, pmf, sojourns[j], scenario)
                        )
                hedging[n] = acc
            c = np.array(
                [
                    rates[n]
                    * (
                        scenario.tau
                        * (scenario.p_local * mean_local - scenario.p_tx * uploads[n].mean_slots)
                        - hedging[n]
                    )
                    for n in range(len(rates))
                ]
            )
            const = float(
                sum(
                    rates[n]
                    * (scenario.tau * scenario.p_tx * uploads[n].mean_slots + hedging[n])
                    for n in range(len(rates))
                )
            )
            spec = SubproblemSpec(
                c=c,
                const=const,
                alpha=prices,
                load=loads,
                budget_rhs=budget_rhs,
                rate=rates,
                rate_rhs=lam,
                p_min=p_min,
            )
            try:
                sol = solve(spec)
            except Infeasible:
                continue
            channels, blocking, cost = _round_plan(scenario, loads, sol.p, y)
            bd = hard_power(scenario, blocking, uploads, sojourns, y)
            if bd.total < best.predicted_power - 1e-12:
                best = PlanResult(
                    mode="hard",
                    allocation=Allocation(channels=channels, es_share=y),
                    blocking=tuple(float(b) for b in blocking),
                    predicted_power=bd.total,
                    breakdown=bd,
                    cost=cost,
                    lambda_star=lam,
                    lambda_achieved=_offload_rate(scenario, blocking),
                )
    return best


def plan(scenario: Scenario, mode: str, config: PlannerConfig = PlannerConfig()) -> PlanResult:
    if mode == "soft":
        return gcasd(scenario, config)
    if mode == "hard":
        return gcahd(scenario, config)
    raise ValueError(f"unknown mode {mode!r}: expected 'soft' or 'hard'")
