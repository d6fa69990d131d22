"""Deterministic index schedules and the convergence-series container.

A gap schedule assigns a nonnegative integer to every index n >= 1, an
error schedule a nonnegative real.  Both are either closed-form rules or
explicit tables, and both serialize to JSON.  ConvergenceSeries holds a
normalized sequence sampled on an increasing index grid together with
tail diagnostics.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ScheduleRangeError, ValidationError

_GAP_RULES = ("constant", "ceil_power", "ceil_log", "table")
_ERROR_RULES = ("constant", "scaled_power", "table")


def _as_index_array(ns) -> np.ndarray:
    arr = np.asarray(ns, dtype=np.int64)
    if arr.size and arr.min() < 1:
        raise ScheduleRangeError("schedule indices start at 1")
    return arr


@dataclasses.dataclass(frozen=True)
class GapSchedule:
    """Nonnegative integer schedule n -> sigma_n.

    rule is one of "constant", "ceil_power" (ceil(scale * n**alpha) with
    0 < alpha < 1), "ceil_log" (ceil(log2(1 + n))), or "table".
    """

    rule: str
    params: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in _GAP_RULES:
            raise ConfigError(f"unknown gap rule {self.rule!r}")
        if self.rule == "constant":
            v = self.params.get("value")
            if not isinstance(v, int) or v < 0:
                raise ConfigError("constant gap needs a nonnegative integer 'value'")
        elif self.rule == "ceil_power":
            alpha = self.params.get("alpha")
            if not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
                raise ConfigError("ceil_power needs 0 < alpha < 1")
            scale = self.params.get("scale", 1.0)
            if scale <= 0:
                raise ConfigError("ceil_power scale must be positive")
        elif self.rule == "table":
            vals = self.params.get("values")
            if not vals or any((not isinstance(v, int)) or v < 0 for v in vals):
                raise ConfigError("table gap needs nonnegative integer 'values'")

    @classmethod
    def zero(cls) -> "GapSchedule":
        return cls("constant", {"value": 0})

    @classmethod
    def constant(cls, value: int) -> "GapSchedule":
        return cls("constant", {"value": int(value)})

    @classmethod
    def from_table(cls, values: Sequence[int]) -> "GapSchedule":
        return cls("table", {"values": [int(v) for v in values]})

    def value(self, n: int) -> int:
        return int(self.values(np.asarray([n], dtype=np.int64))[0])

    def values(self, ns) -> np.ndarray:
        """Vectorized evaluation on an array of indices (all >= 1)."""
        arr = _as_index_array(ns)
        if self.rule == "constant":
            return np.full(arr.shape, self.params["value"], dtype=np.int64)
        if self.rule == "ceil_power":
            scale = float(self.params.get("scale", 1.0))
            out = np.ceil(scale * np.power(arr.astype(np.float64), self.params["alpha"]))
            return out.astype(np.int64)
        if self.rule == "ceil_log":
            return np.ceil(np.log2(1.0 + arr.astype(np.float64))).astype(np.int64)
        table = self.params["values"]
        if arr.size and arr.max() > len(table):
            raise ScheduleRangeError(
                f"gap table covers n <= {len(table)}, asked for n = {int(arr.max())}"
            )
        return np.asarray(table, dtype=np.int64)[arr - 1]

    def max_over_multiples(self, r: int, K: int) -> int:
        """max of sigma_{k r} over k = 1..K."""
        ks = np.arange(1, K + 1, dtype=np.int64) * int(r)
        return int(self.values(ks).max())

    def to_json(self) -> dict:
        return {"rule": self.rule, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "GapSchedule":
        if not isinstance(obj, dict) or "rule" not in obj:
            raise ConfigError("gap schedule JSON needs a 'rule' field")
        return cls(obj["rule"], dict(obj.get("params", {})))


@dataclasses.dataclass(frozen=True)
class ErrorSchedule:
    """Nonnegative real schedule n -> rho_n.

    Closed-form rules: "constant", "scaled_power" (scale * n**alpha with
    alpha < 1, so the schedule stays sublinear), "table".  A schedule may
    instead wrap a plain function or a position-dependent hook; those are
    not serializable and to_json refuses.

    The hook signature is hook(symbols, j, n) -> float, evaluated on a
    window of length n starting at offset j.  Position-free users call
    value()/values() and never see the hook.
    """

    rule: str
    params: dict = dataclasses.field(default_factory=dict)
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    hook: Callable[..., float] | None = None
    label: str = ""

    def __post_init__(self):
        if self.fn is not None or self.hook is not None:
            return
        if self.rule not in _ERROR_RULES:
            raise ConfigError(f"unknown error rule {self.rule!r}")
        if self.rule == "constant":
            v = self.params.get("value")
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError("constant error needs a nonnegative 'value'")
        elif self.rule == "scaled_power":
            alpha = self.params.get("alpha")
            if not isinstance(alpha, (int, float)) or alpha >= 1.0:
                raise ConfigError("scaled_power needs alpha < 1")
            if self.params.get("scale", 1.0) < 0:
                raise ConfigError("scaled_power scale must be nonnegative")
        elif self.rule == "table":
            vals = self.params.get("values")
            if vals is None or any(v < 0 for v in vals):
                raise ConfigError("table error needs nonnegative 'values'")

    @classmethod
    def zero(cls) -> "ErrorSchedule":
        return cls("constant", {"value": 0.0})

    @classmethod
    def constant(cls, value: float) -> "ErrorSchedule":
        return cls("constant", {"value": float(value)})

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "ErrorSchedule":
        return cls("table", {"values": [float(v) for v in values]})

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], label: str = "") -> "ErrorSchedule":
        return cls("function", {}, fn=fn, label=label)

    @classmethod
    def from_hook(cls, hook: Callable[..., float], label: str = "") -> "ErrorSchedule":
        return cls("hook", {}, hook=hook, label=label)

    @property
    def position_dependent(self) -> bool:
        return self.hook is not None

    def value(self, n: int) -> float:
        return float(self.values(np.asarray([n], dtype=np.int64))[0])

    def values(self, ns) -> np.ndarray:
        arr = _as_index_array(ns)
        if self.hook is not None:
            raise ConfigError("position-dependent error schedule has no position-free value")
        if self.fn is not None:
            out = np.asarray(self.fn(arr), dtype=np.float64)
            if out.shape != arr.shape:
                raise ValidationError("error schedule function returned a wrong shape")
            return out
        if self.rule == "constant":
            return np.full(arr.shape, float(self.params["value"]))
        if self.rule == "scaled_power":
            scale = float(self.params.get("scale", 1.0))
            return scale * np.power(arr.astype(np.float64), self.params["alpha"])
        table = self.params["values"]
        if arr.size and arr.max() > len(table):
            raise ScheduleRangeError(
                f"error table covers n <= {len(table)}, asked for n = {int(arr.max())}"
            )
        return np.asarray(table, dtype=np.float64)[arr - 1]

    def to_json(self) -> dict:
        if self.fn is not None or self.hook is not None:
            raise ConfigError("function-backed error schedule is not serializable")
        return {"rule": self.rule, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "ErrorSchedule":
        if not isinstance(obj, dict) or "rule" not in obj:
            raise ConfigError("error schedule JSON needs a 'rule' field")
        return cls(obj["rule"], dict(obj.get("params", {})))


@dataclasses.dataclass(frozen=True)
class SublinearityReport:
    max_ratio: float
    argmax_n: int
    window: tuple[int, int]
    threshold: float
    looks_sublinear: bool


def sublinearity_report(
    schedule: GapSchedule | ErrorSchedule, N: int, threshold: float = 0.1
) -> SublinearityReport:
    """Scan s_n / n over the window [ceil(N/2), N].

    Advisory only: a small max ratio over the window suggests o(n) decay
    but proves nothing.  Constant schedules trivially pass for large N.
    """
    if N < 2:
        raise ConfigError("sublinearity window needs N >= 2")
    lo = math.ceil(N / 2)
    ns = np.arange(lo, N + 1, dtype=np.int64)
    ratios = schedule.values(ns).astype(np.float64) / ns
    i = int(np.argmax(ratios))
    mx = float(ratios[i])
    return SublinearityReport(
        max_ratio=mx,
        argmax_n=int(ns[i]),
        window=(lo, N),
        threshold=float(threshold),
        looks_sublinear=bool(mx <= threshold),
    )


class ConvergenceSeries:
    """A sampled normalized sequence v_n on a strictly increasing grid.

    Values live in [-inf, inf); +inf and nan are rejected at build time.
    """

    def __init__(self, ns, values, label: str = "", meta: dict | None = None):
        self.ns = np.asarray(ns, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.label = label
        self.meta = dict(meta or {})
        if self.ns.ndim != 1 or self.values.shape != self.ns.shape:
            raise ValidationError("series needs matching 1-d index and value arrays")
        if self.ns.size == 0:
            raise ValidationError("series cannot be empty")
        if self.ns[0] < 1 or (self.ns.size > 1 and (np.diff(self.ns) <= 0).any()):
            raise ValidationError("series indices must be strictly increasing and >= 1")
        if np.isnan(self.values).any():
            raise ValidationError("series values cannot be nan")
        if (self.values == np.inf).any():
            raise ValidationError("series values cannot be +inf")

    def __len__(self) -> int:
        return int(self.ns.size)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.values)

    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.values)

    def tail_oscillation(self) -> float | None:
        """max - min of values with n >= (last n) / 2; None if fewer than two."""
        cut = self.ns[-1] / 2
        tail = self.values[self.ns >= cut]
        if tail.size < 2:
            return None
        hi, lo = float(tail.max()), float(tail.min())
        if hi == lo:
            # covers the all-(-inf) tail, where the difference would be nan
            return 0.0
        return hi - lo

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("n,value\n")
            for n, v in zip(self.ns.tolist(), self.values.tolist()):
                fh.write(f"{n},{v!r}\n")

    @classmethod
    def from_csv(cls, path, label: str = "") -> "ConvergenceSeries":
        ns: list[int] = []
        vals: list[float] = []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "n,value":
                raise ConfigError(f"unexpected series header {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                a, b = line.split(",")
                ns.append(int(a))
                vals.append(float(b))
        return cls(ns, vals, label=label)


def geometric_grid(N: int, ratio: float = 1.2, start: int = 1) -> np.ndarray:
    """Distinct integer grid ceil(start * ratio**j), clipped and capped at N.

    N itself is always the last entry so that series built on the grid
    terminate at the full horizon.
    """
    if N < 1:
        raise ConfigError("grid horizon must be >= 1")
    if ratio <= 1.0:
        raise ConfigError("geometric grid ratio must exceed 1")
    points = []
    x = float(start)
    while True:
        n = math.ceil(x)
        if n >= N:
            break
        points.append(n)
        x *= ratio
    points.append(N)
    return np.unique(np.asarray(points, dtype=np.int64))


def linear_grid(N: int, step: int) -> np.ndarray:
    """Grid {step, 2 step, ...} capped at N, with N appended if missing."""
    if step < 1 or N < 1:
        raise ConfigError("linear grid needs positive step and horizon")
    pts = np.arange(step, N + 1, step, dtype=np.int64)
    if pts.size == 0 or pts[-1] != N:
        pts = np.append(pts, np.int64(N))
    return pts
