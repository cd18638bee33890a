"""Expected device power under blocking-based offload control.

Tasks that find every channel busy run locally (probability P_B per
station); offloaded tasks spend radio power during the upload.  In hard
mode the device additionally hedges each offload with a backup local run
started at the last slot that still meets the deadline, so any overlap with
a late edge result, or a full wasted run when the result misses the
deadline slot entirely, is charged to the device as well.

Every component is affine in P_B for fixed leases and edge load, which is
what lets the planner keep its subproblem convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Pmf

__all__ = [
    "PowerBreakdown",
    "local_power",
    "upload_power",
    "overlap_power",
    "beyond_power",
    "overlap_unit",
    "beyond_unit",
    "soft_power",
    "hard_power",
]


@dataclass(frozen=True, eq=False)
class PowerBreakdown:
    """Expected power (W) per station, split by origin."""

    local: np.ndarray
    upload: np.ndarray
    overlap: np.ndarray
    beyond: np.ndarray

    def __post_init__(self):
        for name in ("local", "upload", "overlap", "beyond"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def total(self) -> float:
        return float(
            np.sum(self.local) + np.sum(self.upload) + np.sum(self.overlap) + np.sum(self.beyond)
        )

    def station_total(self, n: int) -> float:
        return float(self.local[n] + self.upload[n] + self.overlap[n] + self.beyond[n])

    def as_dict(self) -> dict:
        return {
            "local_W": float(np.sum(self.local)),
            "upload_W": float(np.sum(self.upload)),
            "overlap_W": float(np.sum(self.overlap)),
            "beyond_W": float(np.sum(self.beyond)),
            "total_W": self.total,
        }


def local_power(p_b: float, bs, scenario) -> float:
    """Power of blocked-and-local execution: P_B lambda_n p^L Lbar tau (W)."""
    return p_b * bs.arrival_rate * scenario.p_local * scenario.mean_local_slots() * scenario.tau


def upload_power(p_b: float, bs, mean_upload_slots: float, scenario) -> float:
    """Radio power of admitted offloads: (1-P_B) lambda_n p^T tbar_W tau (W)."""
    return (1.0 - p_b) * bs.arrival_rate * scenario.p_tx * mean_upload_slots * scenario.tau


def overlap_unit(j: int, upload: Pmf, sojourn: Pmf, scenario, y: float) -> float:
    """Hard-mode overlap energy per offloaded class-j task (J).

    The backup local run starts at slot ``t^L_j``; if the edge result lands
    in slot t in ``[t^L_j, dtilde_j]`` the device has burnt
    ``p^L (t - t^L_j + 1) tau`` joules on the abandoned run.  Slots are
    split as t = upload l + edge slots (t - l), with at least
    ``ceil(q_j / (y f^C tau))`` slots on the edge side.
    """
    if y <= 0:
        raise ValueError("overlap accounting needs a positive edge share")
    t_start = scenario.local_start_slot(j)
    d_slots = scenario.deadline_slots(j)
    min_es = int(math.ceil(scenario.classes[j].cycles / (y * scenario.f_es * scenario.tau) - 1e-12))
    total = 0.0
    for t in range(t_start, d_slots + 1):
        burn = scenario.p_local * (t - t_start + 1) * scenario.tau
        for l in range(1, t - min_es + 1):
            p = upload.prob(l) * sojourn.prob(t - l)
            if p > 0.0:
                total += p * burn
    return total


def beyond_unit(j: int, upload: Pmf, sojourn: Pmf, scenario) -> float:
    """Hard-mode wasted energy per offloaded class-j task (J).

    If the result arrives after the deadline slot the backup run has done
    the whole job: ``p^L L_j tau`` joules.  Truncated upload or sojourn tail
    mass counts as arriving late, which keeps the estimate conservative.
    """
    d_slots = scenario.deadline_slots(j)
    meets = 0.0
    for l in range(max(upload.first, 0), upload.last + 1):
        pl = upload.prob(l)
        if pl > 0.0:
            meets += pl * sojourn.cdf(d_slots - l)
    miss = max(0.0, 1.0 - meets)
    return miss * scenario.p_local * scenario.local_exec_slots(j) * scenario.tau


def overlap_power(p_b: float, bs, j: int, upload: Pmf, sojourn: Pmf, scenario, y: float) -> float:
    """Expected overlap power of one (station, class, channel-model) cell (W)."""
    return (1.0 - p_b) * bs.arrival_rate * overlap_unit(j, upload, sojourn, scenario, y)


def beyond_power(p_b: float, bs, j: int, upload: Pmf, sojourn: Pmf, scenario) -> float:
    """Expected wasted-backup power of one (station, class, model) cell (W)."""
    return (1.0 - p_b) * bs.arrival_rate * beyond_unit(j, upload, sojourn, scenario)


def _check_blocking(scenario, blocking) -> np.ndarray:
    b = np.asarray(blocking, dtype=float)
    if b.shape != (len(scenario.base_stations),):
        raise ValueError(
            f"need one blocking probability per station, got shape {b.shape}"
        )
    if np.any((b < 0) | (b > 1)):
        raise ValueError("blocking probabilities must lie in [0, 1]")
    return b


def soft_power(scenario, blocking, uploads) -> PowerBreakdown:
    """Soft-mode power: local execution of blocked tasks plus upload radio."""
    b = _check_blocking(scenario, blocking)
    n_bs = len(scenario.base_stations)
    local = np.zeros(n_bs)
    upload = np.zeros(n_bs)
    for n, bs in enumerate(scenario.base_stations):
        local[n] = local_power(b[n], bs, scenario)
        upload[n] = upload_power(b[n], bs, uploads[n].mean_slots, scenario)
    return PowerBreakdown(local=local, upload=upload, overlap=np.zeros(n_bs), beyond=np.zeros(n_bs))


def hard_power(scenario, blocking, uploads, sojourn_pmfs, y: float) -> PowerBreakdown:
    """Hard-mode power: soft components plus overlap and wasted backup runs.

    ``sojourn_pmfs[j]`` is the slotted edge-sojourn PMF of class j at the
    edge load the caller is accounting for.
    """
    b = _check_blocking(scenario, blocking)
    n_bs = len(scenario.base_stations)
    out = soft_power(scenario, b, uploads)
    overlap = np.zeros(n_bs)
    beyond = np.zeros(n_bs)
    for n, bs in enumerate(scenario.base_stations):
        table = uploads[n]
        acc_o = 0.0
        acc_b = 0.0
        for j, klass in enumerate(scenario.classes):
            for pmf, w in zip(table.pmfs[j], table.weights[j]):
                share = klass.prob * w
                if share == 0.0:
                    continue
                acc_o += share * overlap_unit(j, pmf, sojourn_pmfs[j], scenario, y)
                acc_b += share * beyond_unit(j, pmf, sojourn_pmfs[j], scenario)
        overlap[n] = (1.0 - b[n]) * bs.arrival_rate * acc_o
        beyond[n] = (1.0 - b[n]) * bs.arrival_rate * acc_b
    return PowerBreakdown(local=out.local, upload=out.upload, overlap=overlap, beyond=beyond)
