"""Gapped subadditivity checks and limit identification for real sequences.

A sequence F_1, F_2, ... with values in [-inf, inf) is gapped subadditive
for a gap schedule sigma and error schedule rho when

    F_{n + sigma_n + m} <= F_n + rho_n + F_m        for all n, m >= 1.

Under that inequality (with sublinear schedules) F_n / n converges to
inf_n (F_n + rho_n) / (n + sigma_n), which the functions here locate and
cross-check at finite horizons.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np

from .errors import CapExceededError, ConfigError, GapLiftError, ValidationError
from .schedules import ConvergenceSeries, ErrorSchedule, GapSchedule


class RealSequence:
    """Lazy 1-indexed sequence with values in [-inf, inf).

    Wraps a callable evaluated on int64 index arrays.  Values are cached,
    so repeated checks at growing horizons pay only for the extension.
    +inf and nan are rejected.
    """

    def __init__(self, fn: Callable, name: str = "custom", vectorized: bool = True):
        self._fn = fn
        self.name = name
        self._vectorized = vectorized
        self._cache = np.empty(0, dtype=np.float64)

    def values(self, N: int) -> np.ndarray:
        """Array [F_1, ..., F_N]; entry i holds F_{i+1}."""
        if N < 1:
            raise ConfigError("sequence horizon must be >= 1")
        if self._cache.size < N:
            ns = np.arange(1, N + 1, dtype=np.int64)
            if self._vectorized:
                vals = np.asarray(self._fn(ns), dtype=np.float64)
                if vals.shape != ns.shape:
                    raise ValidationError(f"sequence {self.name!r} returned a wrong shape")
            else:
                vals = np.fromiter(
                    (float(self._fn(int(n))) for n in ns), dtype=np.float64, count=N
                )
            if np.isnan(vals).any():
                raise ValidationError(f"sequence {self.name!r} produced nan")
            if (vals == np.inf).any():
                raise ValidationError(f"sequence {self.name!r} produced +inf")
            self._cache = vals
        return self._cache[:N]

    def __call__(self, n: int) -> float:
        return float(self.values(n)[n - 1])


def _builtin(name: str, params: dict) -> Callable[[np.ndarray], np.ndarray]:
    if name == "linear":
        a = float(params.get("slope", 1.0))
        return lambda ns: a * ns.astype(np.float64)
    if name == "affine_sqrt":
        a = float(params.get("slope", 1.0))
        b = float(params.get("sqrt_coeff", 1.0))
        return lambda ns: a * ns + b * np.sqrt(ns.astype(np.float64))
    if name == "sqrt":
        s = float(params.get("scale", 1.0))
        return lambda ns: s * np.sqrt(ns.astype(np.float64))
    if name == "neg_nlogn":
        s = float(params.get("scale", 1.0))
        return lambda ns: -s * ns * np.log(ns.astype(np.float64))
    if name == "square":
        s = float(params.get("scale", 1.0))
        return lambda ns: s * ns.astype(np.float64) ** 2
    if name == "log":
        s = float(params.get("scale", 1.0))
        return lambda ns: s * np.log1p(ns.astype(np.float64))
    if name == "neg_inf_from":
        start = int(params.get("start", 2))
        a = float(params.get("slope", 0.0))
        return lambda ns: np.where(ns >= start, -np.inf, a * ns.astype(np.float64))
    raise ConfigError(f"unknown sequence family {name!r}")


def sequence_from_spec(obj: dict) -> RealSequence:
    """Build a RealSequence from {"name": ..., "params": {...}} JSON.

    "table" takes explicit values; every other name is a closed form.
    """
    if not isinstance(obj, dict) or "name" not in obj:
        raise ConfigError("sequence spec needs a 'name' field")
    name = obj["name"]
    params = dict(obj.get("params", {}))
    if name == "table":
        vals = np.asarray(params.get("values", []), dtype=np.float64)
        if vals.size == 0:
            raise ConfigError("table sequence needs nonempty 'values'")

        def fn(ns: np.ndarray) -> np.ndarray:
            if ns.max() > vals.size:
                raise ConfigError(f"table sequence covers n <= {vals.size}")
            return vals[ns - 1]

        return RealSequence(fn, name="table")
    return RealSequence(_builtin(name, params), name=name)


@dataclasses.dataclass(frozen=True)
class Violation:
    n: int
    m: int
    excess: float


@dataclasses.dataclass(frozen=True)
class SubadditivityCheck:
    ok: bool
    violations: tuple[Violation, ...]
    violation_count: int
    horizon: int
    tol: float

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violation_count": self.violation_count,
            "horizon": self.horizon,
            "tol": self.tol,
            "violations": [dataclasses.asdict(v) for v in self.violations],
        }


def check_gapped_subadditivity(
    F: RealSequence,
    sigma: GapSchedule,
    rho: ErrorSchedule,
    N: int,
    tol: float = 1e-12,
    cap: int = 5000,
    max_report: int = 200,
) -> SubadditivityCheck:
    """Exhaustively test F_{n+sigma_n+m} <= F_n + rho_n + F_m + tol.

    Covers every pair with n + sigma_n + m <= N, one vectorized sweep per
    n, so the cost is O(N^2) values.  The cap guards against accidental
    huge horizons; raise it explicitly if the quadratic cost is intended.

    Infinite values follow the extended-real reading: a finite left side
    against a -inf right side is a violation, -inf against anything is
    not, and two -inf sides cancel to "no violation".
    """
    if N > cap:
        raise CapExceededError(
            f"pairwise check at N = {N} exceeds cap {cap}; pass cap >= N to allow"
        )
    Fv = F.values(N)
    ns = np.arange(1, N + 1, dtype=np.int64)
    sig = sigma.values(ns)
    rh = rho.values(ns)
    found: list[Violation] = []
    total = 0
    for n in range(1, N + 1):
        base = n + int(sig[n - 1])
        m_max = N - base
        if m_max < 1:
            continue
        lhs = Fv[base : base + m_max]
        with np.errstate(invalid="ignore"):
            excess = lhs - (Fv[n - 1] + rh[n - 1]) - Fv[:m_max]
            bad = np.flatnonzero(excess > tol)
        total += bad.size
        for i in bad:
            if len(found) < max_report:
                found.append(Violation(n=n, m=int(i) + 1, excess=float(excess[i])))
    return SubadditivityCheck(
        ok=(total == 0),
        violations=tuple(found),
        violation_count=total,
        horizon=N,
        tol=tol,
    )


@dataclasses.dataclass(frozen=True)
class FeketeReport:
    """Finite-horizon summary of the limit identification.

    infimum is min over n <= horizon of (F_n + rho_n) / (n + sigma_n);
    argmin_n the smallest index attaining it; limit_proxy is F_N / N; gap
    their absolute difference (0 when both are -inf).
    """

    infimum: float
    argmin_n: int
    limit_proxy: float
    gap: float
    horizon: int

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def fekete_infimum(
    F: RealSequence, sigma: GapSchedule, rho: ErrorSchedule, N: int
) -> FeketeReport:
    """Locate inf_n (F_n + rho_n) / (n + sigma_n) over n <= N."""
    Fv = F.values(N)
    ns = np.arange(1, N + 1, dtype=np.int64)
    denom = (ns + sigma.values(ns)).astype(np.float64)
    ratios = (Fv + rho.values(ns)) / denom
    i = int(np.argmin(ratios))
    inf_val = float(ratios[i])
    proxy = float(Fv[N - 1] / N)
    if inf_val == -np.inf and proxy == -np.inf:
        gap = 0.0
    else:
        gap = abs(proxy - inf_val)
    return FeketeReport(
        infimum=inf_val, argmin_n=i + 1, limit_proxy=proxy, gap=float(gap), horizon=N
    )


@dataclasses.dataclass(frozen=True)
class LimitEstimate:
    report: FeketeReport
    series: ConvergenceSeries


def fekete_limit_estimate(
    F: RealSequence,
    sigma: GapSchedule,
    rho: ErrorSchedule,
    N: int,
    stride: int | None = None,
) -> LimitEstimate:
    """F_n / n on a stride grid next to the finite-horizon infimum.

    For a gapped subadditive F with sublinear schedules the series tail
    and the infimum bracket the same limit, so their gap at N is the
    honest convergence diagnostic.
    """
    if stride is None:
        stride = max(1, N // 200)
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    Fv = F.values(N)
    grid = np.arange(stride, N + 1, stride, dtype=np.int64)
    if grid.size == 0 or grid[-1] != N:
        grid = np.append(grid, np.int64(N))
    series = ConvergenceSeries(
        grid,
        Fv[grid - 1] / grid,
        label=f"ratio({F.name})",
        meta={"stride": int(stride), "horizon": int(N)},
    )
    return LimitEstimate(report=fekete_infimum(F, sigma, rho, N), series=series)


@dataclasses.dataclass(frozen=True)
class LiftedTriple:
    """A plainly subadditive F repackaged with gaps and matching errors."""

    sequence: RealSequence
    sigma: GapSchedule
    rho: ErrorSchedule
    probe_N: int


def gap_lift(
    F: RealSequence, sigma: GapSchedule, probe_N: int = 200, tol: float = 1e-12
) -> LiftedTriple:
    """Lift a plainly subadditive sequence into the gapped setting.

    Chooses rho_n = max(F_{sigma_n}, 0) (zero when sigma_n = 0), which
    makes the gapped inequality follow from two applications of plain
    subadditivity.  Plain subadditivity itself is only probed up to
    probe_N; a probe violation raises GapLiftError instead of lifting.
    """
    probe = check_gapped_subadditivity(
        F, GapSchedule.zero(), ErrorSchedule.zero(), probe_N, tol=tol
    )
    if not probe.ok:
        first = probe.violations[0]
        raise GapLiftError(
            f"{F.name!r} is not plainly subadditive up to {probe_N}: "
            f"first violation at (n, m) = ({first.n}, {first.m}), excess {first.excess:.3g} "
            f"({probe.violation_count} total)"
        )

    def rho_fn(ns: np.ndarray) -> np.ndarray:
        sv = sigma.values(ns)
        out = np.zeros(ns.shape, dtype=np.float64)
        mask = sv >= 1
        if mask.any():
            Fv = F.values(int(sv.max()))
            out[mask] = np.maximum(Fv[sv[mask] - 1], 0.0)
        return out

    rho = ErrorSchedule.from_function(rho_fn, label=f"lift({F.name})")
    return LiftedTriple(sequence=F, sigma=sigma, rho=rho, probe_N=probe_N)
