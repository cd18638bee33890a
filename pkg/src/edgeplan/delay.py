"""Edge-server queueing delay: waiting-time CDFs and the feasible-rate search.

Offloaded tasks from every base station merge into one FIFO queue in front
of the leased edge-server share ``y``, modelled as an M/G/1 queue whose
service time is discrete: a class-j task needs ``q_j / (y f^C)`` seconds.
Two evaluation routes exist on purpose:

* :func:`md1_wait_cdf` - the classical single-class (deterministic service)
  waiting-time CDF as a finite alternating sum, evaluated in the log domain
  and switched to high-precision arithmetic where float64 cancellation would
  drown the result;
* :func:`mg1_wait_cdf` - the general discrete-service case via the
  Pollaczek-Khinchine transform inverted numerically.

The planner itself always evaluates delays through the transform route (so
one and several classes share a code path); the closed form stays as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Pmf
from .laplace import invert_cdf

__all__ = [
    "md1_wait_cdf",
    "pk_wait_cdf",
    "mg1_wait_cdf",
    "EsServiceModel",
    "DelayModel",
    "total_delay_prob",
    "discretize_sojourn",
    "feasible_lambda_star",
]

# beyond this lambda*t the float64 alternating sum loses more than ~1e-8
_MD1_FLOAT_LIMIT = 12.0
_MAX_SOJOURN_SLOTS = 100_000


def md1_wait_cdf(lam: float, mu: float, t) -> float:
    """P[wait <= t] in an M/D/1 queue (arrival rate lam, service 1/mu).

    Finite alternating sum ``(1 - rho) * sum_{z=0}^{floor(t mu)}
    [lam (z/mu - t)]^z / z! * exp(-lam (z/mu - t))``.  The terms grow like
    exp(lam t) while the sum stays below 1/(1 - rho), so beyond
    ``lam * t > 12`` the evaluation switches to multi-precision arithmetic
    sized to the cancellation (error ~2e-9 at the handover); below it,
    log-domain float64 terms suffice.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"arrival rate must be finite and >= 0, got {lam}")
    if mu <= 0 or not math.isfinite(mu):
        raise ValueError(f"service rate must be finite and > 0, got {mu}")
    rho = lam / mu
    if rho >= 1.0:
        raise ValueError(f"unstable queue: utilization {rho} >= 1")
    t = float(t)
    if t < 0.0:
        return 0.0
    if lam == 0.0:
        return 1.0
    zmax = int(math.floor(t * mu + 1e-12))
    if lam * t <= _MD1_FLOAT_LIMIT:
        z = np.arange(zmax + 1)
        c = np.maximum(lam * (t - z / mu), 0.0)
        lgam = np.array([math.lgamma(zz + 1) for zz in z])
        with np.errstate(divide="ignore", invalid="ignore"):
            logc = np.where(c > 0, np.log(np.where(c > 0, c, 1.0)), -np.inf)
            logmag = np.where(z == 0, c, z * logc - lgam + c)
        mag = np.exp(logmag)
        mag[(z > 0) & (c == 0.0)] = 0.0
        total = float(np.sum(mag * (-1.0) ** z))
    else:
        import mpmath

        digits = 30 + int(math.ceil(0.87 * lam * t))
        with mpmath.workdps(digits):
            lam_m, mu_m, t_m = mpmath.mpf(lam), mpmath.mpf(mu), mpmath.mpf(t)
            acc = mpmath.mpf(0)
            for z in range(zmax + 1):
                c = lam_m * (t_m - z / mu_m)
                if c < 0:
                    c = mpmath.mpf(0)
                acc += (-c) ** z / mpmath.factorial(z) * mpmath.e**c
            total = float(acc)
    return min(1.0, max(0.0, (1.0 - rho) * total))


@dataclass(frozen=True, eq=False)
class EsServiceModel:
    """Discrete edge-service distribution: class-j tasks take ``seconds[j]``.

    Built from a scenario and a leased share y: seconds[j] = q_j / (y f^C).
    """

    seconds: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.seconds, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "seconds", s)
        object.__setattr__(self, "weights", w)
        if len(s) != len(w) or len(s) == 0:
            raise ValueError("service model needs matching, nonempty atom arrays")
        if np.any(s <= 0):
            raise ValueError("service times must be > 0")
        if np.any(w < 0) or not math.isclose(float(np.sum(w)), 1.0, abs_tol=1e-12):
            raise ValueError("service weights must be nonnegative and sum to 1")

    @classmethod
    def from_scenario(cls, scenario, y: float) -> "EsServiceModel":
        if y <= 0:
            raise ValueError(f"edge share must be > 0 to define service times, got {y}")
        secs = np.array([k.cycles / (y * scenario.f_es) for k in scenario.classes])
        w = np.array([k.prob for k in scenario.classes])
        return cls(seconds=secs, weights=w)

    @property
    def mean(self) -> float:
        return float(np.dot(self.seconds, self.weights))

    def lst(self, s: np.ndarray) -> np.ndarray:
        """Laplace-Stieltjes transform sum_j w_j exp(-s b_j)."""
        s = np.asarray(s)
        flat = s.reshape(-1)
        out = np.zeros(flat.shape, dtype=complex)
        for w, b in zip(self.weights, self.seconds):
            out = out + w * np.exp(-b * flat)
        return out.reshape(s.shape)


def pk_wait_cdf(lam: float, mean_service: float, lst, t, accuracy: str = "standard"):
    """Waiting-time CDF of an M/G/1 queue from its service transform.

    Inverts ``(1 - lam b) / (s - lam (1 - g(s)))`` (the Pollaczek-Khinchine
    waiting-time transform divided by s).  ``lst`` must accept a complex
    ndarray.  Stable queues only.
    """
    if lam < 0:
        raise ValueError(f"arrival rate must be >= 0, got {lam}")
    rho = lam * mean_service
    if rho >= 1.0:
        raise ValueError(f"unstable queue: utilization {rho} >= 1")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t_arr)
    out[t_arr >= 0] = 1.0 - rho
    if lam == 0.0:
        out[t_arr >= 0] = 1.0
    else:
        pos = t_arr > 0

        def fhat(s):
            return (1.0 - rho) / (s - lam * (1.0 - lst(s)))

        if np.any(pos):
            out[pos] = invert_cdf(fhat, t_arr[pos], accuracy=accuracy)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out[0])
    return out


def mg1_wait_cdf(lam: float, service: EsServiceModel, t, accuracy: str = "standard"):
    """Waiting-time CDF with the package's discrete edge-service model."""
    return pk_wait_cdf(lam, service.mean, service.lst, t, accuracy=accuracy)


@dataclass(frozen=True, eq=False)
class DelayModel:
    """Sojourn-time evaluator for one (scenario, y, lambda) combination.

    ``wait_cdf`` is the M/G/1 waiting-time CDF at aggregate offload rate
    ``lam``; class-j sojourn time adds the deterministic service
    ``q_j/(y f^C)``.  A saturated queue (rho >= 1) is represented with a
    waiting CDF identically zero: delays are almost surely unbounded, which
    is exactly how the planner treats the top of its rate grid.
    """

    scenario: object
    y: float
    lam: float
    accuracy: str = "standard"
    service: EsServiceModel = field(init=False)
    rho: float = field(init=False)

    def __post_init__(self):
        service = EsServiceModel.from_scenario(self.scenario, self.y)
        object.__setattr__(self, "service", service)
        object.__setattr__(self, "rho", self.lam * service.mean)
        if self.lam < 0:
            raise ValueError(f"arrival rate must be >= 0, got {self.lam}")

    @property
    def saturated(self) -> bool:
        return self.rho >= 1.0

    def wait_cdf(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if self.saturated:
            out = np.zeros_like(t_arr)
        else:
            out = pk_wait_cdf(
                self.lam, self.service.mean, self.service.lst, t_arr, accuracy=self.accuracy
            )
        if np.isscalar(t) or np.ndim(t) == 0:
            return float(np.atleast_1d(out)[0])
        return out

    def service_seconds(self, j: int) -> float:
        return float(self.service.seconds[j])

    def sojourn_cdf(self, j: int, t):
        """P[service-plus-wait of a class-j task <= t]."""
        return self.wait_cdf(np.asarray(t, dtype=float) - self.service_seconds(j))


def total_delay_prob(upload: Pmf, j: int, delays: DelayModel) -> float:
    """P[upload + edge sojourn meets the class-j deadline].

    Sums ``P[t_w = l] * P[t_c <= d_j - l tau]`` over the upload support; the
    number of slots that can possibly fit is ``floor((d_j - b_j)/tau)``,
    beyond which the sojourn CDF argument goes negative and contributes 0.
    Upload tail mass past the stored support counts as a miss.
    """
    scen = delays.scenario
    klass = scen.classes[j]
    b_j = delays.service_seconds(j)
    l_max = int(math.floor((klass.deadline - b_j) / scen.tau + 1e-12))
    if l_max < 1:
        return 0.0
    hi = min(l_max, upload.last)
    if upload.first > hi:
        return 0.0
    slots = np.arange(max(upload.first, 0), hi + 1)
    probs = np.array([upload.prob(int(l)) for l in slots])
    if delays.saturated:
        return 0.0
    targets = klass.deadline - slots * scen.tau - b_j
    cdf = delays.wait_cdf(targets)
    return float(np.dot(probs, cdf))


def discretize_sojourn(
    delays: DelayModel,
    j: int,
    tail: float = 1e-9,
    max_slots: int | None = None,
) -> Pmf:
    """Slot-level PMF of the class-j edge sojourn time.

    ``P[t~ = b] = P[t_c <= b tau] - P[t_c <= (b-1) tau]``; construction stops
    once the remaining tail is below ``tail`` or ``max_slots`` is reached
    (the remainder is recorded as tail mass).  The CDF samples are forced
    monotone before differencing so inversion noise cannot produce negative
    cell probabilities.
    """
    if delays.saturated:
        raise ValueError(f"cannot discretize a saturated queue (rho = {delays.rho:.4f})")
    tau = delays.scenario.tau
    cap = max_slots if max_slots is not None else _MAX_SOJOURN_SLOTS
    if cap < 1:
        raise ValueError(f"max_slots must be >= 1, got {cap}")
    block, cdf_vals, b = 64, [0.0], 0
    while True:
        lo = b + 1
        hi = min(b + block, cap)
        ts = np.arange(lo, hi + 1) * tau
        vals = delays.sojourn_cdf(j, ts)
        cdf_vals.extend(np.atleast_1d(vals).tolist())
        b = hi
        block = min(block * 2, 4096)
        if 1.0 - cdf_vals[-1] <= tail:
            break
        if max_slots is not None and b >= cap:
            break
        if b >= _MAX_SOJOURN_SLOTS:
            raise ArithmeticError(
                f"sojourn PMF for class {j} did not reach tail {tail} "
                f"within {_MAX_SOJOURN_SLOTS} slots"
            )
    cdf = np.maximum.accumulate(np.clip(np.asarray(cdf_vals), 0.0, 1.0))
    probs = np.diff(cdf)
    tail_mass = float(1.0 - cdf[-1])
    slots = np.arange(1, len(probs) + 1)
    mean = float(np.dot(slots, probs)) + tail_mass * (len(probs) + 1)
    return Pmf(first=1, probs=probs, tail_mass=tail_mass, mean_slots=mean)


def feasible_lambda_star(
    scenario,
    y: float,
    uploads,
    accuracy: str = "standard",
    max_iters: int = 40,
) -> float:
    """Largest aggregate offload rate that keeps every delay constraint met.

    For every station n, class j, and channel model k the soft-mode
    constraint ``P[upload + sojourn <= d_j] >= 1 - eps_j`` must hold.  The
    left side is nonincreasing in the aggregate rate (heavier edge load can
    only slow everyone down), so bisection over ``[0, y f^C / mean cycles]``
    finds the threshold to within ``1e-4`` of the cap.  Returns 0 when even
    an idle edge server cannot meet some constraint (or y = 0).
    """
    if y <= 0.0:
        return 0.0
    mu_max = scenario.es_rate_cap(y)

    def feasible(lam: float) -> bool:
        dm = DelayModel(scenario, y, lam, accuracy=accuracy)
        for n, bs in enumerate(scenario.base_stations):
            table = uploads[n]
            for j in range(len(scenario.classes)):
                eps = scenario.classes[j].eps
                for pmf in table.pmfs[j]:
                    if total_delay_prob(pmf, j, dm) < 1.0 - eps:
                        return False
        return True

    if not feasible(0.0):
        return 0.0
    if feasible(mu_max):
        return mu_max
    lo, hi = 0.0, mu_max
    tol = 1e-4 * mu_max
    for _ in range(max_iters):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
