"""Discrete-event validation of lease plans.

The simulator replays a scenario against a concrete allocation: Poisson
arrivals per station, channels held for the sampled number of upload
slots (an arrival that finds all leased channels busy runs locally), and
a single FIFO edge server at speed ``y * f^C``.  Channel upload lengths
are sampled by walking the two-state chain slot by slot (with a closed
form for single-slot-capable channels), deliberately not by inverting the
model PMFs, so simulated and computed distributions stay independent.

Energy is charged per task and averaged over the measured window, which
starts after a warmup fraction of the horizon.  In hard mode each
offloaded task also runs the late local backup, and the simulator charges
the overlap/wasted energy and checks that no task can miss its deadline.

``opt_exhaustive`` is the brute-force benchmark: it enumerates every
channel combination, spends the remaining budget on edge capacity, and
keeps the cheapest plan whose simulated violation rates pass.  Only
meant for scenarios with small channel caps.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .erlang import erlang_b
from .channel import station_upload_table, stationary_good
from .power import PowerBreakdown
from .scenario import Allocation, Scenario

__all__ = ["SimConfig", "DesStats", "OptResult", "simulate", "opt_exhaustive", "queue_waits"]


@dataclass(frozen=True)
class SimConfig:
    tasks: int = 100_000       # expected task count in the measured window
    seed: int = 0
    warmup_frac: float = 0.1
    collect_waits: bool = False
    trace_path: object = None  # str | Path: write a per-task CSV when set

    def __post_init__(self):
        if self.tasks < 1:
            raise ValueError("tasks must be positive")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must be in [0, 1)")


@dataclass(eq=False)
class DesStats:
    mode: str
    window: float                 # measured seconds
    arrivals: np.ndarray          # per station, measured window
    blocked: np.ndarray
    offloaded: np.ndarray
    class_offloaded: np.ndarray   # per class, pooled over stations
    class_violations: np.ndarray  # offloaded tasks finishing past d_j
    class_local: np.ndarray       # blocked tasks per class
    class_local_late: np.ndarray  # blocked tasks whose local run passes d_j
    group_offloaded: np.ndarray   # (station, class, channel model) counts
    group_violations: np.ndarray  # same shape; late offloads per group
    e_local: np.ndarray           # joules per station, measured window
    e_upload: np.ndarray
    e_overlap: np.ndarray
    e_beyond: np.ndarray
    waits: np.ndarray             # edge queue waits (s) if collected

    @property
    def tasks_measured(self) -> int:
        return int(np.sum(self.arrivals))

    def blocking_rate(self, n: int) -> float:
        if self.arrivals[n] == 0:
            return 0.0
        return float(self.blocked[n] / self.arrivals[n])

    def violation_rate(self, j: int) -> float:
        if self.class_offloaded[j] == 0:
            return 0.0
        return float(self.class_violations[j] / self.class_offloaded[j])

    def group_violation_rate(self, n: int, j: int, k: int) -> float:
        """Violation rate among offloads of class j at station n on model k."""
        if self.group_offloaded[n, j, k] == 0:
            return 0.0
        return float(self.group_violations[n, j, k] / self.group_offloaded[n, j, k])

    @property
    def power(self) -> PowerBreakdown:
        w = self.window
        return PowerBreakdown(
            local=self.e_local / w,
            upload=self.e_upload / w,
            overlap=self.e_overlap / w,
            beyond=self.e_beyond / w,
        )

    @property
    def total_power(self) -> float:
        return self.power.total

    def merge(self, other: "DesStats") -> "DesStats":
        if self.mode != other.mode:
            raise ValueError("cannot merge stats from different modes")
        return DesStats(
            mode=self.mode,
            window=self.window + other.window,
            arrivals=self.arrivals + other.arrivals,
            blocked=self.blocked + other.blocked,
            offloaded=self.offloaded + other.offloaded,
            class_offloaded=self.class_offloaded + other.class_offloaded,
            class_violations=self.class_violations + other.class_violations,
            class_local=self.class_local + other.class_local,
            class_local_late=self.class_local_late + other.class_local_late,
            group_offloaded=self.group_offloaded + other.group_offloaded,
            group_violations=self.group_violations + other.group_violations,
            e_local=self.e_local + other.e_local,
            e_upload=self.e_upload + other.e_upload,
            e_overlap=self.e_overlap + other.e_overlap,
            e_beyond=self.e_beyond + other.e_beyond,
            waits=np.concatenate([self.waits, other.waits]),
        )


def _sample_upload_slots(model, data_bits: float, u: np.ndarray, rng) -> np.ndarray:
    """Upload slot counts for len(u) tasks on one channel model.

    ``u`` decides the initial (stationary) channel state.  Models that
    finish any good slot and send nothing in bad slots follow the closed
    form; everything else walks the chain until the payload is done.
    """
    n = len(u)
    good = u < stationary_good(model)
    if model.bits_bad == 0.0 and data_bits <= model.bits_good:
        slots = np.ones(n, dtype=np.int64)
        bad = ~good
        if np.any(bad):
            # first slot bad, then 1 + Geom(p_bg) further slots
            slots[bad] = 1 + rng.geometric(model.p_bg, size=int(np.sum(bad)))
        return slots
    remaining = np.full(n, float(data_bits))
    slots = np.zeros(n, dtype=np.int64)
    state = good.copy()
    active = np.ones(n, dtype=bool)
    for _ in range(100_000):
        idx = np.where(active)[0]
        if idx.size == 0:
            return slots
        sent = np.where(state[idx], model.bits_good, model.bits_bad)
        remaining[idx] -= sent
        slots[idx] += 1
        done = remaining[idx] <= 1e-9
        active[idx[done]] = False
        keep = idx[~done]
        stay = np.where(state[keep], model.p_gg, model.p_bb)
        state[keep] = np.where(rng.random(keep.size) < stay, state[keep], ~state[keep])
    raise ArithmeticError("an upload did not finish within 100000 slots")


def _station_tasks(scenario: Scenario, bs, horizon: float, seed_child):
    """Vectorized per-station pre-sampling: arrival times, classes, uploads."""
    gen_arr, gen_cls, gen_mix, gen_up = (
        np.random.default_rng(s) for s in seed_child.spawn(4)
    )
    # Poisson arrivals on [0, horizon)
    block = max(64, int(bs.arrival_rate * horizon * 1.1) + 1)
    gaps = gen_arr.exponential(1.0 / bs.arrival_rate, size=block)
    times = np.cumsum(gaps)
    while times[-1] < horizon:
        gaps = gen_arr.exponential(1.0 / bs.arrival_rate, size=block)
        times = np.concatenate([times, times[-1] + np.cumsum(gaps)])
    times = times[times < horizon]
    n = len(times)

    probs = np.array([k.prob for k in scenario.classes])
    classes = gen_cls.choice(len(probs), size=n, p=probs)

    upload_slots = np.zeros(n, dtype=np.int64)
    model_idx = np.zeros(n, dtype=np.int64)
    for j in range(len(scenario.classes)):
        in_class = np.where(classes == j)[0]
        if in_class.size == 0:
            continue
        mix = bs.channel_mix[j]
        weights = np.array([p for _, p in mix])
        picks = gen_mix.choice(len(mix), size=in_class.size, p=weights)
        model_idx[in_class] = picks
        for k, (model, _) in enumerate(mix):
            sel = in_class[picks == k]
            if sel.size == 0:
                continue
            u = gen_up.random(sel.size)
            upload_slots[sel] = _sample_upload_slots(
                model, scenario.classes[j].data_bits, u, gen_up
            )
    return times, classes, upload_slots, model_idx


def simulate(
    scenario: Scenario,
    allocation: Allocation,
    mode: str = "soft",
    config: SimConfig = SimConfig(),
) -> DesStats:
    if mode not in ("soft", "hard"):
        raise ValueError(f"unknown mode {mode!r}: expected 'soft' or 'hard'")
    if mode == "hard":
        scenario.validate_hard_mode()
    allocation.validate(scenario)
    if any(allocation.channels) and allocation.es_share <= 0.0:
        raise ValueError("channels leased but no edge capacity: offloads never finish")

    n_bs = len(scenario.base_stations)
    n_cls = len(scenario.classes)
    total_rate = sum(bs.arrival_rate for bs in scenario.base_stations)
    horizon = config.tasks / ((1.0 - config.warmup_frac) * total_rate)
    t_warm = config.warmup_frac * horizon
    tau = scenario.tau

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(n_bs)

    per_bs = [
        _station_tasks(scenario, bs, horizon, children[n])
        for n, bs in enumerate(scenario.base_stations)
    ]
    station = np.concatenate(
        [np.full(len(t), n, dtype=np.int64) for n, (t, _, _, _) in enumerate(per_bs)]
    )
    times = np.concatenate([t for t, _, _, _ in per_bs])
    classes = np.concatenate([c for _, c, _, _ in per_bs])
    upload_slots = np.concatenate([w for _, _, w, _ in per_bs])
    model_idx = np.concatenate([m for _, _, _, m in per_bs])
    order = np.argsort(times, kind="stable")
    station, times, classes, upload_slots, model_idx = (
        station[order], times[order], classes[order], upload_slots[order],
        model_idx[order],
    )
    n_tasks = len(times)

    # Sequential pass: who finds a free channel?  Only blocking needs event
    # order; everything downstream is computed vectorized afterwards.
    offload = np.zeros(n_tasks, dtype=bool)
    busy = [0] * n_bs
    caps = list(allocation.channels)
    releases: list[tuple[float, int]] = []
    for i in range(n_tasks):
        t = times[i]
        while releases and releases[0][0] <= t:
            busy[heapq.heappop(releases)[1]] -= 1
        n = station[i]
        if busy[n] < caps[n]:
            busy[n] += 1
            offload[i] = True
            heapq.heappush(releases, (t + upload_slots[i] * tau, n))

    # FIFO edge server over upload completions.
    svc = np.array(
        [k.cycles / (allocation.es_share * scenario.f_es) if allocation.es_share > 0 else 0.0
         for k in scenario.classes]
    )
    off_idx = np.where(offload)[0]
    es_arrive = times[off_idx] + upload_slots[off_idx] * tau
    es_order = np.argsort(es_arrive, kind="stable")
    queued = off_idx[es_order]
    done = np.zeros(n_tasks)
    waits = np.zeros(len(queued))
    free_at = 0.0
    for pos, i in enumerate(queued):
        start = es_arrive[es_order[pos]]
        if free_at > start:
            waits[pos] = free_at - start
            start = free_at
        end = start + svc[classes[i]]
        done[i] = end
        free_at = end

    # Per-task energy and deadline accounting (vectorized).
    deadlines = np.array([k.deadline for k in scenario.classes])
    local_slots = np.array([scenario.local_exec_slots(j) for j in range(n_cls)])
    dl_slots = np.array([scenario.deadline_slots(j) for j in range(n_cls)])
    start_slots = np.array([scenario.local_start_slot(j) for j in range(n_cls)])

    e_task = np.zeros(n_tasks)
    e_kind = np.zeros(n_tasks, dtype=np.int64)  # 0 local, 1 upload (+2/+3 extra)
    e_extra = np.zeros(n_tasks)

    blocked_mask = ~offload
    e_task[blocked_mask] = (
        scenario.p_local * local_slots[classes[blocked_mask]] * tau
    )
    e_task[offload] = scenario.p_tx * upload_slots[offload] * tau
    e_kind[offload] = 1

    violation = np.zeros(n_tasks, dtype=bool)
    late_local = np.zeros(n_tasks, dtype=bool)
    late_local[blocked_mask] = (
        local_slots[classes[blocked_mask]] * tau > deadlines[classes[blocked_mask]] + 1e-9
    )
    if mode == "soft":
        violation[offload] = (
            done[offload] - times[offload] > deadlines[classes[offload]] + 1e-9
        )
    else:
        # Result lands in this slot, counted from the task's own arrival.
        slot = np.zeros(n_tasks, dtype=np.int64)
        slot[offload] = np.ceil((done[offload] - times[offload]) / tau - 1e-12).astype(
            np.int64
        )
        t_start = start_slots[classes]
        d_tilde = dl_slots[classes]
        overlap_mask = offload & (slot >= t_start) & (slot <= d_tilde)
        beyond_mask = offload & (slot > d_tilde)
        e_extra[overlap_mask] = (
            scenario.p_local * (slot[overlap_mask] - t_start[overlap_mask] + 1) * tau
        )
        e_kind[overlap_mask] = 2
        e_extra[beyond_mask] = scenario.p_local * local_slots[classes[beyond_mask]] * tau
        e_kind[beyond_mask] = 3
        completion = np.where(
            offload, np.minimum(done - times, d_tilde * tau), local_slots[classes] * tau
        )
        violation[offload] = completion[offload] > deadlines[classes[offload]] + 1e-9

    measured = times >= t_warm
    window = horizon - t_warm

    def tally(mask, values=None, length=n_bs, key=None):
        key_arr = station if key is None else key
        src = mask if values is None else values * mask
        return np.bincount(key_arr, weights=src, minlength=length)[:length]

    m_off = measured & offload
    m_blk = measured & blocked_mask
    max_models = max(
        len(bs.channel_mix[j])
        for bs in scenario.base_stations
        for j in range(n_cls)
    )
    group_key = (station * n_cls + classes) * max_models + model_idx
    group_shape = (n_bs, n_cls, max_models)

    def group_tally(mask):
        flat = np.bincount(group_key[mask], minlength=n_bs * n_cls * max_models)
        return flat[: n_bs * n_cls * max_models].reshape(group_shape)

    stats = DesStats(
        mode=mode,
        window=window,
        arrivals=tally(measured).astype(np.int64),
        blocked=tally(m_blk).astype(np.int64),
        offloaded=tally(m_off).astype(np.int64),
        class_offloaded=tally(m_off, length=n_cls, key=classes).astype(np.int64),
        class_violations=tally(measured & violation, length=n_cls, key=classes).astype(
            np.int64
        ),
        class_local=tally(m_blk, length=n_cls, key=classes).astype(np.int64),
        class_local_late=tally(
            measured & late_local, length=n_cls, key=classes
        ).astype(np.int64),
        group_offloaded=group_tally(m_off).astype(np.int64),
        group_violations=group_tally(measured & violation).astype(np.int64),
        e_local=tally(m_blk, e_task),
        e_upload=tally(m_off, e_task),
        e_overlap=tally(measured & (e_kind == 2), e_extra),
        e_beyond=tally(measured & (e_kind == 3), e_extra),
        waits=(
            waits[(times[queued] >= t_warm)] if config.collect_waits else np.zeros(0)
        ),
    )

    if config.trace_path is not None:
        _write_trace(
            config.trace_path, station, times, classes, offload, upload_slots, done,
            violation, e_task + e_extra,
        )
    return stats


def _write_trace(path, station, times, classes, offload, upload_slots, done, violation, energy):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["task", "station", "class", "arrival_s", "offloaded", "upload_slots",
             "completed_s", "violation", "energy_J"]
        )
        for i in range(len(times)):
            w.writerow(
                [
                    i,
                    int(station[i]),
                    int(classes[i]),
                    f"{times[i]:.6f}",
                    int(offload[i]),
                    int(upload_slots[i]) if offload[i] else "",
                    f"{done[i]:.6f}" if offload[i] else "",
                    int(violation[i]),
                    f"{energy[i]:.9f}",
                ]
            )


def queue_waits(lam: float, services: np.ndarray, probs: np.ndarray, n: int, seed: int = 0):
    """Waiting times of n jobs in a FIFO single-server queue (Lindley walk).

    Poisson arrivals at rate ``lam``; service times drawn from the discrete
    mix (``services``, ``probs``).  Standalone oracle for queue-level
    checks, independent of transform inversion.
    """
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / lam, size=n)
    svc = rng.choice(np.asarray(services, dtype=float), size=n, p=np.asarray(probs, dtype=float))
    waits = np.zeros(n)
    w = 0.0
    for i in range(1, n):
        w = max(0.0, w + svc[i - 1] - gaps[i])
        waits[i] = w
    return waits


@dataclass(frozen=True, eq=False)
class OptResult:
    power: float
    allocation: Allocation
    stats: DesStats
    evaluated: int
    skipped: int


def opt_exhaustive(
    scenario: Scenario,
    mode: str = "soft",
    config: SimConfig = SimConfig(tasks=20_000),
    max_combos: int = 20_000,
    sigma_slack: float = 0.0,
) -> OptResult:
    """Brute-force benchmark: try every channel combination under budget.

    For each combination the leftover budget buys edge share (more capacity
    never hurts), clearly unstable queues are skipped ahead of time, and
    the survivors are judged by simulation: soft plans must keep every
    (station, class, channel-model) group's measured violation rate at or
    below its eps (plus ``sigma_slack`` binomial standard errors, for
    callers that prefer a statistical band); hard plans must show zero
    violations.
    """
    combos = 1
    for bs in scenario.base_stations:
        combos *= bs.max_channels + 1
    if combos > max_combos:
        raise ValueError(
            f"{combos} channel combinations exceed max_combos={max_combos}; "
            "use a scenario with smaller channel caps"
        )
    uploads = [station_upload_table(bs, scenario.classes) for bs in scenario.base_stations]
    loads = [
        bs.arrival_rate * uploads[n].mean_slots * scenario.tau
        for n, bs in enumerate(scenario.base_stations)
    ]
    prices = [bs.channel_price for bs in scenario.base_stations]
    es_unit = scenario.beta * scenario.f_es

    best_power = math.inf
    best_alloc = None
    best_stats = None
    evaluated = 0
    skipped = 0
    for xs in itertools.product(*(range(bs.max_channels + 1) for bs in scenario.base_stations)):
        channel_cost = sum(a * x for a, x in zip(prices, xs))
        if channel_cost > scenario.budget + 1e-9:
            skipped += 1
            continue
        if any(xs):
            y = min(1.0, (scenario.budget - channel_cost) / es_unit) if es_unit > 0 else 1.0
            if y <= 0.0:
                skipped += 1
                continue
            offered = sum(
                (1.0 - erlang_b(x, a)) * bs.arrival_rate
                for x, a, bs in zip(xs, loads, scenario.base_stations)
            )
            if offered >= 0.9999 * scenario.es_rate_cap(y):
                skipped += 1
                continue
        else:
            y = 0.0
        alloc = Allocation(channels=xs, es_share=y)
        stats = simulate(scenario, alloc, mode=mode, config=config)
        evaluated += 1
        if mode == "hard":
            feasible = int(np.sum(stats.class_violations)) == 0
        else:
            # The deadline guarantee is owed to every (station, class,
            # channel-model) population separately, so judge each group's
            # measured rate against its own binomial band.
            feasible = True
            for j, k in enumerate(scenario.classes):
                counts = stats.group_offloaded[:, j, :]
                if not np.any(counts):
                    continue
                viol = stats.group_violations[:, j, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    rates = np.where(counts > 0, viol / np.maximum(counts, 1), 0.0)
                    bands = k.eps + sigma_slack * np.sqrt(
                        k.eps * (1.0 - k.eps) / np.maximum(counts, 1)
                    )
                if np.any((counts > 0) & (rates > bands)):
                    feasible = False
                    break
        if feasible and stats.total_power < best_power - 1e-12:
            best_power = stats.total_power
            best_alloc = alloc
            best_stats = stats
    if best_alloc is None:
        raise RuntimeError("no feasible allocation found, not even all-local")
    return OptResult(
        power=best_power,
        allocation=best_alloc,
        stats=best_stats,
        evaluated=evaluated,
        skipped=skipped,
    )
