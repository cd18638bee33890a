"""Scenario and allocation types plus the JSON config format.

A scenario bundles everything the planner and the simulator need: slot
length, device power draws, leasing prices, the edge-server speed, the task
classes with their delay requirements, and per base station the arrival
rate, channel budget, price, and the Gilbert-Elliot channel mix each task
class sees.

Configs are versioned JSON documents (see ``load_scenario``); ``set1.cfg``
and ``set2.cfg`` under ``edgeplan/data`` carry the two reference parameter
sets used throughout the tests.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .channel import GilbertElliotModel

__all__ = [
    "ConfigError",
    "TaskClass",
    "BaseStation",
    "Scenario",
    "Allocation",
    "load_scenario",
    "loads_scenario",
    "save_scenario",
    "scenario_to_dict",
    "bundled_config_path",
]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Raised when a config file or scenario value violates an invariant."""


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class TaskClass:
    """One task class: size, work, deadline, popularity, and delay tolerance.

    Attributes:
        data_bits: input size s uploaded to the edge server (bits).
        cycles: CPU work q (cycles), identical locally and at the edge.
        deadline: completion deadline d (seconds).
        prob: probability an arriving task belongs to this class.
        eps: soft-mode violation tolerance; P[delay > d] <= eps.
    """

    data_bits: float
    cycles: float
    deadline: float
    prob: float
    eps: float = 0.05

    def __post_init__(self):
        _require(self.data_bits > 0, f"task class data_bits must be > 0, got {self.data_bits}")
        _require(self.cycles > 0, f"task class cycles must be > 0, got {self.cycles}")
        _require(self.deadline > 0, f"task class deadline must be > 0, got {self.deadline}")
        _require(0.0 <= self.prob <= 1.0, f"task class prob must be in [0, 1], got {self.prob}")
        _require(0.0 < self.eps <= 1.0, f"task class eps must be in (0, 1], got {self.eps}")


@dataclass(frozen=True)
class BaseStation:
    """One base station: demand, channel budget and price, channel mix.

    ``channel_mix[j]`` lists ``(model, prob)`` pairs for task class j: the
    channel model an offload drawn from class j experiences.
    """

    arrival_rate: float
    max_channels: int
    channel_price: float
    channel_mix: tuple

    def __post_init__(self):
        _require(self.arrival_rate > 0, f"arrival_rate must be > 0, got {self.arrival_rate}")
        _require(
            self.max_channels >= 0 and self.max_channels == int(self.max_channels),
            f"max_channels must be a nonnegative integer, got {self.max_channels}",
        )
        _require(self.channel_price >= 0, f"channel_price must be >= 0, got {self.channel_price}")
        mix = tuple(
            tuple((model, float(p)) for model, p in per_class) for per_class in self.channel_mix
        )
        object.__setattr__(self, "channel_mix", mix)
        for j, per_class in enumerate(mix):
            _require(len(per_class) > 0, f"channel_mix for class {j} is empty")
            total = sum(p for _, p in per_class)
            _require(
                math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12),
                f"channel_mix for class {j} sums to {total}, expected 1",
            )
            for model, p in per_class:
                _require(p >= 0, f"channel_mix probability must be >= 0, got {p}")
                _require(
                    isinstance(model, GilbertElliotModel),
                    "channel_mix entries must pair a GilbertElliotModel with a probability",
                )


@dataclass(frozen=True)
class Scenario:
    """Full planning instance.

    Attributes:
        tau: slot length (seconds).
        p_local: device CPU power while executing locally (W).
        p_tx: device radio power while uploading (W).
        beta: edge-server price per (cycle/second) leased.
        f_es: edge-server speed f^C (cycles/second).
        f_local: device speed f (cycles per slot).
        budget: leasing budget per planning period.
        classes: task classes, probabilities summing to 1.
        base_stations: stations; every channel_mix must cover all classes.
    """

    tau: float
    p_local: float
    p_tx: float
    beta: float
    f_es: float
    f_local: float
    budget: float
    classes: tuple
    base_stations: tuple

    def __post_init__(self):
        _require(self.tau > 0, f"tau must be > 0, got {self.tau}")
        _require(self.p_local > 0, f"p_local must be > 0, got {self.p_local}")
        _require(self.p_tx >= 0, f"p_tx must be >= 0, got {self.p_tx}")
        _require(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        _require(self.f_es > 0, f"f_es must be > 0, got {self.f_es}")
        _require(self.f_local > 0, f"f_local must be > 0, got {self.f_local}")
        _require(self.budget >= 0, f"budget must be >= 0, got {self.budget}")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "base_stations", tuple(self.base_stations))
        _require(len(self.classes) > 0, "scenario needs at least one task class")
        _require(len(self.base_stations) > 0, "scenario needs at least one base station")
        total = sum(k.prob for k in self.classes)
        _require(
            math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12),
            f"task class probabilities sum to {total}, expected 1",
        )
        for n, bs in enumerate(self.base_stations):
            _require(
                len(bs.channel_mix) == len(self.classes),
                f"base station {n} has {len(bs.channel_mix)} channel-mix rows "
                f"for {len(self.classes)} classes",
            )

    # -- derived slot quantities -------------------------------------------------

    def local_exec_slots(self, j: int) -> int:
        """Slots a class-j task runs on the device: ceil(q_j / f_local)."""
        return int(math.ceil(self.classes[j].cycles / self.f_local - 1e-12))

    def deadline_slots(self, j: int) -> int:
        """Deadline in whole slots: floor(d_j / tau)."""
        return int(math.floor(self.classes[j].deadline / self.tau + 1e-12))

    def local_start_slot(self, j: int) -> int:
        """Latest local start slot that still meets the deadline (hard mode)."""
        return self.deadline_slots(j) - self.local_exec_slots(j) + 1

    def mean_local_slots(self) -> float:
        """Class-averaged local execution time (slots)."""
        return sum(k.prob * self.local_exec_slots(j) for j, k in enumerate(self.classes))

    def mean_es_cycles(self) -> float:
        """Class-averaged edge work per task (cycles)."""
        return sum(k.prob * k.cycles for k in self.classes)

    def es_rate_cap(self, y: float) -> float:
        """Edge-server service rate mu^C = y f^C / mean cycles (tasks/second)."""
        return y * self.f_es / self.mean_es_cycles()

    def all_local_power(self) -> float:
        """Mean device power when every task executes locally (W)."""
        return sum(
            bs.arrival_rate * self.p_local * self.mean_local_slots() * self.tau
            for bs in self.base_stations
        )

    def validate_hard_mode(self):
        """Hard mode needs room to start a backup local run: t_j^L >= 1."""
        for j in range(len(self.classes)):
            _require(
                self.local_start_slot(j) >= 1,
                f"class {j}: deadline ({self.deadline_slots(j)} slots) leaves no room "
                f"for a local backup run of {self.local_exec_slots(j)} slots",
            )

    def scaled(self, *, budget=None, lambda_scale=None, f_es=None, eps=None) -> "Scenario":
        """Copy with sweep overrides applied."""
        out = self
        if budget is not None:
            out = replace(out, budget=float(budget))
        if f_es is not None:
            out = replace(out, f_es=float(f_es))
        if lambda_scale is not None:
            stations = tuple(
                replace(bs, arrival_rate=bs.arrival_rate * float(lambda_scale))
                for bs in out.base_stations
            )
            out = replace(out, base_stations=stations)
        if eps is not None:
            classes = tuple(replace(k, eps=float(eps)) for k in out.classes)
            out = replace(out, classes=classes)
        return out


@dataclass(frozen=True)
class Allocation:
    """A leasing decision: channels per station and an edge-server share."""

    channels: tuple
    es_share: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(x) for x in self.channels))
        for x in self.channels:
            _require(x >= 0, f"channel counts must be >= 0, got {x}")
        _require(0.0 <= self.es_share <= 1.0, f"es_share must be in [0, 1], got {self.es_share}")

    def cost(self, scenario: Scenario) -> float:
        """Leasing cost: sum(alpha_n x_n) + beta f^C y."""
        channel_cost = sum(
            bs.channel_price * x for bs, x in zip(scenario.base_stations, self.channels)
        )
        return channel_cost + scenario.beta * scenario.f_es * self.es_share

    def validate(self, scenario: Scenario, budget_slack: float = 1e-9):
        _require(
            len(self.channels) == len(scenario.base_stations),
            f"allocation covers {len(self.channels)} stations, scenario has "
            f"{len(scenario.base_stations)}",
        )
        for n, (bs, x) in enumerate(zip(scenario.base_stations, self.channels)):
            _require(x <= bs.max_channels, f"station {n}: {x} channels exceeds cap {bs.max_channels}")
        cost = self.cost(scenario)
        _require(
            cost <= scenario.budget + budget_slack,
            f"allocation cost {cost} exceeds budget {scenario.budget}",
        )


# -- JSON config format ---------------------------------------------------------


def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing field '{key}' in {where}")
    return obj[key]


def _parse_model(raw: dict, where: str) -> GilbertElliotModel:
    try:
        return GilbertElliotModel(
            p_gg=float(_get(raw, "p_gg", where)),
            p_bb=float(_get(raw, "p_bb", where)),
            bits_good=float(_get(raw, "bits_good", where)),
            bits_bad=float(raw.get("bits_bad", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse a JSON scenario document (see README for the schema)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(
            f"{source}: unsupported config version {version!r} (expected {CONFIG_VERSION})"
        )

    models = {}
    for name, m in _get(raw, "channel_models", source).items():
        models[name] = _parse_model(m, f"{source}: channel model '{name}'")

    classes = []
    for j, c in enumerate(_get(raw, "classes", source)):
        where = f"{source}: class {j}"
        try:
            classes.append(
                TaskClass(
                    data_bits=float(_get(c, "data_bits", where)),
                    cycles=float(_get(c, "cycles", where)),
                    deadline=float(_get(c, "deadline", where)),
                    prob=float(_get(c, "prob", where)),
                    eps=float(c.get("eps", 0.05)),
                )
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    def parse_mix(entries, where):
        out = []
        for e in entries:
            name = _get(e, "model", where)
            if name not in models:
                raise ConfigError(f"{where}: unknown channel model '{name}'")
            out.append((models[name], float(_get(e, "prob", where))))
        return tuple(out)

    stations = []
    for n, b in enumerate(_get(raw, "base_stations", source)):
        where = f"{source}: base station {n}"
        mix_raw = _get(b, "channel_mix", where)
        if mix_raw and isinstance(mix_raw[0], dict):
            # one row shared by every class
            row = parse_mix(mix_raw, where)
            mix = tuple(row for _ in classes)
        else:
            mix = tuple(
                parse_mix(row, f"{where}, class {j} mix") for j, row in enumerate(mix_raw)
            )
        try:
            stations.append(
                BaseStation(
                    arrival_rate=float(_get(b, "arrival_rate", where)),
                    max_channels=int(_get(b, "max_channels", where)),
                    channel_price=float(_get(b, "channel_price", where)),
                    channel_mix=mix,
                )
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    try:
        return Scenario(
            tau=float(_get(raw, "tau", source)),
            p_local=float(_get(raw, "p_local", source)),
            p_tx=float(_get(raw, "p_tx", source)),
            beta=float(_get(raw, "beta", source)),
            f_es=float(_get(raw, "f_es", source)),
            f_local=float(_get(raw, "f_local", source)),
            budget=float(_get(raw, "budget", source)),
            classes=tuple(classes),
            base_stations=tuple(stations),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_scenario(path) -> Scenario:
    """Load a scenario from a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return loads_scenario(text, source=str(p))


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize back to the JSON document structure (round-trip stable)."""
    models = {}
    names = {}

    def model_name(m: GilbertElliotModel) -> str:
        if m not in names:
            name = f"model_{len(names) + 1}"
            names[m] = name
            models[name] = {
                "p_gg": m.p_gg,
                "p_bb": m.p_bb,
                "bits_good": m.bits_good,
                "bits_bad": m.bits_bad,
            }
        return names[m]

    stations = []
    for bs in scenario.base_stations:
        mix = [
            [{"model": model_name(m), "prob": p} for m, p in per_class]
            for per_class in bs.channel_mix
        ]
        stations.append(
            {
                "arrival_rate": bs.arrival_rate,
                "max_channels": bs.max_channels,
                "channel_price": bs.channel_price,
                "channel_mix": mix,
            }
        )
    return {
        "version": CONFIG_VERSION,
        "tau": scenario.tau,
        "p_local": scenario.p_local,
        "p_tx": scenario.p_tx,
        "beta": scenario.beta,
        "f_es": scenario.f_es,
        "f_local": scenario.f_local,
        "budget": scenario.budget,
        "channel_models": models,
        "classes": [dataclasses.asdict(k) for k in scenario.classes],
        "base_stations": stations,
    }


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def bundled_config_path(name: str) -> Path:
    """Path of a packaged reference config, e.g. ``set1`` or ``set1.cfg``."""
    if not name.endswith(".cfg"):
        name = name + ".cfg"
    ref = resources.files("edgeplan").joinpath("data", name)
    with resources.as_file(ref) as p:
        return Path(p)
