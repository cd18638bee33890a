"""Erlang-B blocking probabilities and channel-count inversion.

A base station with ``x`` leased channels serving offload requests that
arrive Poisson with offered load ``a`` erlangs behaves as an M/G/x/x loss
system, so the probability that a request finds every channel busy is the
Erlang-B formula.  Blocking depends on the upload-time distribution only
through its mean (insensitivity), which is what lets the planner drive the
whole loss model from mean upload times.

The planner works in the opposite direction as well: given a target blocking
probability it needs the channel count that achieves it, plus a smooth upper
bound on that count usable inside a convex program.
"""

from __future__ import annotations

import math

__all__ = [
    "erlang_b",
    "erlang_b_direct",
    "min_blocking",
    "invert_to_channels",
    "channel_bound",
]


def erlang_b(channels: int, load: float) -> float:
    """Blocking probability of an ``M/G/x/x`` loss system (Erlang-B).

    Uses the standard forward recursion
    ``E(0) = 1,  E(x) = a E(x-1) / (x + a E(x-1))``,
    which is numerically stable for large loads where the closed form's
    factorials overflow.

    Args:
        channels: number of channels x >= 0.
        load: offered load a = lambda / mu in erlangs, >= 0.
    """
    if channels < 0 or channels != int(channels):
        raise ValueError(f"channel count must be a nonnegative integer, got {channels}")
    if load < 0 or not math.isfinite(load):
        raise ValueError(f"offered load must be finite and >= 0, got {load}")
    e = 1.0
    for x in range(1, int(channels) + 1):
        e = load * e / (x + load * e)
    return e


def erlang_b_direct(channels: int, load: float) -> float:
    """Erlang-B via the closed form ``(a^x / x!) / sum_r a^r / r!``.

    Evaluated in the log domain with the largest term factored out, so it
    stays accurate where naive factorials would overflow.  Kept as an
    independent cross-check of :func:`erlang_b`; the recursion is the one
    the rest of the package calls.
    """
    if channels < 0 or channels != int(channels):
        raise ValueError(f"channel count must be a nonnegative integer, got {channels}")
    if load < 0 or not math.isfinite(load):
        raise ValueError(f"offered load must be finite and >= 0, got {load}")
    if load == 0.0:
        return 1.0 if channels == 0 else 0.0
    x = int(channels)
    log_terms = [r * math.log(load) - math.lgamma(r + 1) for r in range(x + 1)]
    top = max(log_terms)
    denom = sum(math.exp(t - top) for t in log_terms)
    return math.exp(log_terms[x] - top) / denom


def min_blocking(max_channels: int, load: float) -> float:
    """Smallest blocking probability reachable with at most ``max_channels``.

    Blocking is strictly decreasing in the channel count (for load > 0), so
    this is just Erlang-B at the full channel budget.  It is the natural
    lower box bound for the per-station blocking variables in the planner's
    convex subproblem.
    """
    return erlang_b(max_channels, load)


def invert_to_channels(load: float, target: float, max_channels: int) -> int:
    """Largest channel count in ``[0, max_channels]`` with blocking >= target.

    This is the rounding step that turns a fractional blocking decision into
    an integral channel lease: picking the largest x whose blocking still
    sits at or above the target keeps the realised blocking conservative
    (never below what the optimizer planned for).  If even the full budget
    cannot reach the target, i.e. ``target < min_blocking``, the result
    clamps to ``max_channels``.

    Binary search over the strictly decreasing sequence E(0..max_channels).
    """
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target blocking must be in (0, 1], got {target}")
    if max_channels < 0 or max_channels != int(max_channels):
        raise ValueError(f"max_channels must be a nonnegative integer, got {max_channels}")
    if load < 0 or not math.isfinite(load):
        raise ValueError(f"offered load must be finite and >= 0, got {load}")
    if erlang_b(max_channels, load) >= target:
        return int(max_channels)
    # invariant: E(lo) >= target, E(hi) < target
    lo, hi = 0, int(max_channels)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if erlang_b(mid, load) >= target:
            lo = mid
        else:
            hi = mid
    return lo


def channel_bound(load: float, blocking: float) -> float:
    """Convex upper bound ``F(p) = a (1 - p) + 1 / p`` on the channel count.

    For any integral x, ``F(erlang_b(x, a)) >= x``, so replacing the exact
    (integer, non-convex) channel count with F in the leasing-budget
    constraint yields a convex restriction: any blocking vector feasible for
    the F-budget can be rounded down to channel counts that still fit the
    true budget.  Decreasing and convex in p on (0, 1]; F(1) = 1, which is
    what makes the restriction conservative even for stations left at one
    nominal channel's worth of budget.
    """
    if not 0.0 < blocking <= 1.0:
        raise ValueError(f"blocking probability must be in (0, 1], got {blocking}")
    if load < 0 or not math.isfinite(load):
        raise ValueError(f"offered load must be finite and >= 0, got {load}")
    return load * (1.0 - blocking) + 1.0 / blocking
