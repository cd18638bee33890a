"""Upload-time distributions over two-state Markov (Gilbert-Elliot) channels.

A wireless channel alternates between a good and a bad state once per time
slot, delivering ``bits_good`` resp. ``bits_bad`` bits per slot.  A task of
``s`` bits therefore needs a random whole number of slots to upload; the
planner needs that distribution (and its mean) for every base station, task
class, and channel model, with the channel state at the start of an upload
drawn from the chain's stationary distribution (Poisson arrivals see time
averages).

Distributions are represented as dense PMFs over consecutive slot counts
with an explicit truncated tail mass; construction truncates only once the
tail is below 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GilbertElliotModel",
    "Pmf",
    "stationary_good",
    "upload_pmf_onebit",
    "upload_pmf",
    "mean_upload_onebit",
    "station_upload_table",
]

PMF_TAIL = 1e-9
MAX_SLOTS = 100_000


@dataclass(frozen=True)
class GilbertElliotModel:
    """Two-state slotted Markov channel.

    Attributes:
        p_gg: P[next slot good | this slot good].
        p_bb: P[next slot bad | this slot bad].
        bits_good: bits delivered during a good slot.
        bits_bad: bits delivered during a bad slot (0 <= bits_bad <= bits_good).
    """

    p_gg: float
    p_bb: float
    bits_good: float
    bits_bad: float = 0.0

    def __post_init__(self):
        for name in ("p_gg", "p_bb"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.p_gg == 1.0 and self.p_bb == 1.0:
            raise ValueError("channel chain with p_gg = p_bb = 1 has no unique stationary state")
        if self.bits_good < 0 or self.bits_bad < 0:
            raise ValueError("per-slot bit rates must be nonnegative")
        if self.bits_bad > self.bits_good:
            raise ValueError(
                f"bad-state rate {self.bits_bad} exceeds good-state rate {self.bits_good}"
            )

    @property
    def p_gb(self) -> float:
        return 1.0 - self.p_gg

    @property
    def p_bg(self) -> float:
        return 1.0 - self.p_bb


def stationary_good(model: GilbertElliotModel) -> float:
    """Stationary probability of the good state, P_BG / (P_GB + P_BG)."""
    denom = model.p_gb + model.p_bg
    if denom == 0.0:
        raise ValueError("chain with p_gg = p_bb = 1 has no unique stationary distribution")
    return model.p_bg / denom


@dataclass(frozen=True, eq=False)
class Pmf:
    """PMF over consecutive integer slot counts ``first .. first+len(probs)-1``.

    ``tail_mass`` is the probability truncated past the last stored slot;
    mean_slots already includes a geometric-tail correction for it.
    """

    first: int
    probs: np.ndarray
    tail_mass: float
    mean_slots: float

    def __post_init__(self):
        total = float(np.sum(self.probs)) + self.tail_mass
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"PMF mass {total} differs from 1 by more than 1e-9")
        if np.any(self.probs < -1e-15):
            raise ValueError("PMF has a negative probability")

    def prob(self, slots: int) -> float:
        """P[t = slots], zero outside the stored support."""
        i = slots - self.first
        if 0 <= i < len(self.probs):
            return float(self.probs[i])
        return 0.0

    def cdf(self, slots: int) -> float:
        """P[t <= slots] over the stored support (tail mass counts as beyond)."""
        i = slots - self.first
        if i < 0:
            return 0.0
        if i >= len(self.probs):
            return float(np.sum(self.probs))
        return float(np.sum(self.probs[: i + 1]))

    @property
    def last(self) -> int:
        return self.first + len(self.probs) - 1

    def support(self) -> np.ndarray:
        return np.arange(self.first, self.first + len(self.probs))


def mean_upload_onebit(model: GilbertElliotModel) -> float:
    """Mean upload slots when one good slot finishes the task (bits_bad = 0).

    Closed form ``1 + P_GB / (P_BG^2 + P_GB P_BG)``: an upload started in the
    good state takes one slot; started in the bad state it waits a geometric
    number of bad slots before the single good slot.
    """
    p_gb, p_bg = model.p_gb, model.p_bg
    if p_bg == 0.0:
        raise ValueError("bad state is absorbing (p_bb = 1); uploads never finish")
    return 1.0 + p_gb / (p_bg * p_bg + p_gb * p_bg)


def upload_pmf_onebit(model: GilbertElliotModel) -> Pmf:
    """Upload-slot PMF in the single-good-slot regime (bits_bad = 0, s <= bits_good).

    P[t = 1] = pi_G and P[t = l] = pi_B * p_bb^(l-2) * p_bg for l >= 2:
    the upload ends at the first good slot the chain visits.
    """
    if model.bits_bad != 0.0:
        raise ValueError("single-slot closed form requires bits_bad = 0")
    p_bg, p_bb = model.p_bg, model.p_bb
    if p_bg == 0.0:
        raise ValueError("bad state is absorbing (p_bb = 1); uploads never finish")
    pi_g = stationary_good(model)
    pi_b = 1.0 - pi_g
    probs = [pi_g]
    mass = pi_g
    l = 2
    while 1.0 - mass > PMF_TAIL:
        p = pi_b * p_bb ** (l - 2) * p_bg
        probs.append(p)
        mass += p
        l += 1
        if l > MAX_SLOTS:
            raise ArithmeticError(
                f"upload PMF did not reach tail {PMF_TAIL} within {MAX_SLOTS} slots"
            )
    tail = max(0.0, 1.0 - mass)
    arr = np.asarray(probs)
    mean = float(np.dot(arr, np.arange(1, len(probs) + 1)))
    if tail > 0.0 and p_bb < 1.0:
        # remaining mass sits at slots > L with a geometric overshoot
        mean += tail * (len(probs) + 1 + p_bb / p_bg)
    return Pmf(first=1, probs=arr, tail_mass=tail, mean_slots=mean)


def upload_pmf(model: GilbertElliotModel, data_bits: float) -> Pmf:
    """Upload-slot PMF for a task of ``data_bits`` bits over ``model``.

    Dynamic program over (channel state, residual bits), with residuals
    scaled down by gcd(bits_good, bits_bad) (or bits_good when bits_bad = 0)
    so the state space stays integral and small.  The initial state is
    stationary.  Truncated once the unfinished mass drops below 1e-9;
    a chain that cannot finish within 1e5 slots raises.
    """
    if data_bits < 0:
        raise ValueError(f"data size must be >= 0 bits, got {data_bits}")
    if data_bits == 0:
        return Pmf(first=0, probs=np.asarray([1.0]), tail_mass=0.0, mean_slots=0.0)
    if model.bits_good <= 0:
        raise ValueError("channel with bits_good = 0 cannot carry a nonempty task")

    if model.bits_bad == 0.0:
        unit = model.bits_good
        good_units = 1
        bad_units = 0
    else:
        if (
            abs(model.bits_good - round(model.bits_good)) > 1e-6
            or abs(model.bits_bad - round(model.bits_bad)) > 1e-6
        ):
            raise ValueError(
                "per-slot bit rates must be whole numbers of bits when bits_bad > 0 "
                f"(got {model.bits_good}, {model.bits_bad})"
            )
        unit = float(math.gcd(int(round(model.bits_good)), int(round(model.bits_bad))))
        good_units = int(round(model.bits_good / unit))
        bad_units = int(round(model.bits_bad / unit))
    target = int(math.ceil(data_bits / unit - 1e-12))

    pi_g = stationary_good(model)
    # residual-units distribution per state, indices 1..target
    good = np.zeros(target + 1)
    bad = np.zeros(target + 1)
    good[target] = pi_g
    bad[target] = 1.0 - pi_g

    probs = []
    done = 0.0
    mean = 0.0
    slot = 0
    while True:
        slot += 1
        if slot > MAX_SLOTS:
            raise ArithmeticError(
                f"upload of {data_bits} bits did not reach tail {PMF_TAIL} "
                f"within {MAX_SLOTS} slots (check the channel model)"
            )
        # bits delivered this slot per current state
        finish = float(np.sum(good[1 : good_units + 1]))
        if bad_units > 0:
            finish += float(np.sum(bad[1 : bad_units + 1]))
        new_good = np.zeros(target + 1)
        new_bad = np.zeros(target + 1)
        if good_units < target:
            new_good[1 : target + 1 - good_units] += good[good_units + 1 :] * model.p_gg
            new_bad[1 : target + 1 - good_units] += good[good_units + 1 :] * model.p_gb
        if bad_units > 0:
            if bad_units < target:
                new_good[1 : target + 1 - bad_units] += bad[bad_units + 1 :] * model.p_bg
                new_bad[1 : target + 1 - bad_units] += bad[bad_units + 1 :] * model.p_bb
        else:
            new_good[1:] += bad[1:] * model.p_bg
            new_bad[1:] += bad[1:] * model.p_bb
        probs.append(finish)
        done += finish
        mean += finish * slot
        good, bad = new_good, new_bad
        if 1.0 - done <= PMF_TAIL:
            break

    tail = max(0.0, 1.0 - done)
    if tail > 0.0:
        # expected remaining slots from the truncation point, bounded by the
        # worst case of draining the full residual through bad slots
        residual = float(np.sum((good + bad) * np.arange(target + 1)))
        if bad_units > 0:
            per_slot = bad_units
        else:
            per_slot = good_units * max(model.p_bg, 1e-12)
        mean += tail * slot + residual / per_slot
    return Pmf(first=1, probs=np.asarray(probs), tail_mass=tail, mean_slots=mean)


@dataclass(frozen=True)
class StationUploads:
    """Upload distributions for one base station.

    ``pmfs[j][k]`` is the upload PMF for task class j over channel model k,
    ``weights[j][k]`` the probability an offload from class j sees model k,
    and ``mean_slots`` the station-level mean upload time (slots) mixing both
    the class distribution and the channel-model mix.
    """

    pmfs: list
    weights: list
    mean_slots: float
    class_mean_slots: list = field(default_factory=list)


def station_upload_table(bs, classes) -> StationUploads:
    """Build per-(class, model) upload PMFs and the station mean for ``bs``.

    ``bs.channel_mix[j]`` lists (model, probability) pairs for class j; the
    station mean weighs PMF means by class probability and model probability.
    """
    pmfs = []
    weights = []
    class_means = []
    mean = 0.0
    for j, klass in enumerate(classes):
        row_pmfs = []
        row_w = []
        class_mean = 0.0
        for model, w in bs.channel_mix[j]:
            pmf = upload_pmf(model, klass.data_bits)
            row_pmfs.append(pmf)
            row_w.append(w)
            class_mean += w * pmf.mean_slots
        pmfs.append(row_pmfs)
        weights.append(row_w)
        class_means.append(class_mean)
        mean += klass.prob * class_mean
    return StationUploads(
        pmfs=pmfs, weights=weights, mean_slots=mean, class_mean_slots=class_means
    )
