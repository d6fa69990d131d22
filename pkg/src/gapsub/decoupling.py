"""Upper-decoupling audits for shift measures.

A measure Q upper-decouples with gap schedule tau and constants c_n when
for all words a (length n) and b (length m),

    Q(a * b) <= exp(c_n) Q(a) Q(b),

where a * b ranges over all joints of a and b separated by tau_n free
symbols (the gap block is summed out).  The audit computes the smallest
such constants exactly by enumeration; the Markov shortcut bounds them
in closed form through the (tau+1)-step kernel.

These constants are exactly what the limit theory consumes: along a
sampled trajectory the functional f_n = log Q_n becomes gapped almost
subadditive with error rho_n = max(c_n, 0) and gap sigma_n = tau_n.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import CapExceededError, ConfigError, DecouplingFailure, ValidationError
from .logspace import log_sum_exp
from .measures import IIDMeasure, MarkovMeasure, ShiftMeasure
from .sampling import Trajectory, log_prefixes, window_logprob
from .schedules import ErrorSchedule, GapSchedule


def _word_of_index(idx: int, k: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(idx % k)
        idx //= k
    return tuple(reversed(out))


@dataclasses.dataclass(frozen=True)
class PositivityFailure:
    """A joint word with positive mass whose halves have none."""

    n: int
    m: int
    a: tuple[int, ...]
    b: tuple[int, ...]


@dataclasses.dataclass(frozen=True)
class WorstPair:
    n: int
    m: int
    a: tuple[int, ...]
    b: tuple[int, ...]
    defect: float


@dataclasses.dataclass(frozen=True)
class DecouplingReport:
    measure_label: str
    n_values: tuple[int, ...]
    constants: tuple[float, ...]
    tau: GapSchedule
    m_max: int
    worst_pairs: tuple[WorstPair, ...]
    positivity_failures: tuple[PositivityFailure, ...]
    method: str = "enumeration"

    @property
    def failed(self) -> bool:
        return bool(self.positivity_failures) or any(
            not np.isfinite(c) for c in self.constants
        )

    @property
    def max_constant(self) -> float:
        return float(max(self.constants))

    def constant(self, n: int) -> float:
        return float(self.constants[self.n_values.index(n)])

    def to_json(self) -> dict:
        return {
            "measure": self.measure_label,
            "tau": self.tau.to_json(),
            "m_max": self.m_max,
            "n_values": list(self.n_values),
            "constants": list(self.constants),
            "failed": self.failed,
            "method": self.method,
            "worst_pairs": [dataclasses.asdict(w) for w in self.worst_pairs],
            "positivity_failures": [
                dataclasses.asdict(p) for p in self.positivity_failures
            ],
        }


class _LevelCache:
    def __init__(self, Q: ShiftMeasure, cap: int):
        self.Q = Q
        self.cap = cap
        self._levels: dict[int, np.ndarray] = {}

    def get(self, n: int) -> np.ndarray:
        if n not in self._levels:
            self._levels[n] = self.Q.log_marginals_level(n, cap=self.cap)
        return self._levels[n]


def _joint_table(cache: _LevelCache, k: int, n: int, tau: int, m: int) -> np.ndarray:
    """log Q(a * b) over all (a, b), gap of tau symbols summed out."""
    full = cache.get(n + tau + m)
    if tau == 0:
        return full.reshape(k**n, k**m)
    cube = full.reshape(k**n, k**tau, k**m)
    return log_sum_exp(cube, axis=1)


def minimal_decoupling_constants(
    Q: ShiftMeasure,
    n_max: int,
    m_max: int,
    tau: GapSchedule,
    cap: int = 10**7,
    product_shortcut: bool = True,
) -> DecouplingReport:
    """Exact smallest c_n over all word pairs up to the given lengths.

    c_n = max over m <= m_max and words (a, b) of
    log Q(a * b) - log Q(a) - log Q(b), skipping pairs where both sides
    vanish.  A pair with Q(a * b) > 0 but Q(a) Q(b) = 0 admits no finite
    constant; it is recorded and the report flags failure.

    For a product measure Q(a * b) = Q(a) Q(b) is an identity, so the
    minimal constant is 0 with no float association noise; the shortcut
    reports that exact value for iid inputs.  Pass
    product_shortcut=False to force the enumeration (its constants then
    agree with 0 only to rounding).
    """
    if n_max < 1 or m_max < 1:
        raise ConfigError("n_max and m_max must be >= 1")
    k = Q.alphabet.size
    taus = [tau.value(n) for n in range(1, n_max + 1)]
    if product_shortcut and isinstance(Q, IIDMeasure):
        return DecouplingReport(
            measure_label=Q.label,
            n_values=tuple(range(1, n_max + 1)),
            constants=tuple(0.0 for _ in range(n_max)),
            tau=tau,
            m_max=m_max,
            worst_pairs=(),
            positivity_failures=(),
            method="product-identity",
        )
    worst_len = max(n + t + m_max for n, t in zip(range(1, n_max + 1), taus))
    if k**worst_len > cap:
        raise CapExceededError(
            f"audit needs {k**worst_len} words at length {worst_len}, cap is {cap}"
        )
    cache = _LevelCache(Q, cap)
    constants: list[float] = []
    worst: list[WorstPair] = []
    failures: list[PositivityFailure] = []
    for n in range(1, n_max + 1):
        t = taus[n - 1]
        A = cache.get(n)
        best = -np.inf
        best_at: tuple[int, int, int] | None = None
        had_positivity_failure = False
        for m in range(1, m_max + 1):
            B = cache.get(m)
            J = _joint_table(cache, k, n, t, m)
            with np.errstate(invalid="ignore"):
                D = J - A[:, None] - B[None, :]
            pos_fail = np.isfinite(J) & ~np.isfinite(A[:, None] + B[None, :])
            if pos_fail.any():
                had_positivity_failure = True
                for ai, bi in zip(*np.nonzero(pos_fail)):
                    if len(failures) < 20:
                        failures.append(
                            PositivityFailure(
                                n=n,
                                m=m,
                                a=_word_of_index(int(ai), k, n),
                                b=_word_of_index(int(bi), k, m),
                            )
                        )
            finite = np.isfinite(D)
            if finite.any():
                flat = np.where(finite, D, -np.inf)
                ai, bi = np.unravel_index(int(np.argmax(flat)), D.shape)
                cand = float(flat[ai, bi])
                if cand > best:
                    best = cand
                    best_at = (int(ai), int(bi), m)
        constants.append(float("inf") if had_positivity_failure else float(best))
        if best_at is not None:
            ai, bi, m = best_at
            worst.append(
                WorstPair(
                    n=n,
                    m=m,
                    a=_word_of_index(ai, k, n),
                    b=_word_of_index(bi, k, m),
                    defect=float(best),
                )
            )
    return DecouplingReport(
        measure_label=Q.label,
        n_values=tuple(range(1, n_max + 1)),
        constants=tuple(constants),
        tau=tau,
        m_max=m_max,
        worst_pairs=tuple(worst),
        positivity_failures=tuple(failures),
    )


def decoupling_defect(
    Q: ShiftMeasure, a, b, tau_n: int, cap: int = 10**7
) -> float:
    """log Q(a * b) - log Q(a) - log Q(b) for one word pair.

    Needs Q(a) > 0 and Q(b) > 0; the gap block of tau_n symbols is
    summed out.  This is the per-pair quantity whose maximum the audit
    reports.
    """
    a = Q.alphabet.validate_word(a)
    b = Q.alphabet.validate_word(b)
    if tau_n < 0:
        raise ConfigError("gap must be >= 0")
    la = Q.log_marginal(a)
    lb = Q.log_marginal(b)
    if la == -np.inf or lb == -np.inf:
        raise ValidationError("decoupling defect needs both halves positive")
    if tau_n == 0:
        joint = Q.log_marginal(np.concatenate([a, b]))
    else:
        k = Q.alphabet.size
        if k**tau_n > cap:
            raise CapExceededError(f"gap enumeration needs {k**tau_n} words")
        pieces = np.empty(k**tau_n, dtype=np.float64)
        for i, g in enumerate(Q.alphabet.words(tau_n)):
            pieces[i] = Q.log_marginal(
                np.concatenate([a, np.asarray(g, dtype=np.int64), b])
            )
        joint = log_sum_exp(pieces)
    return float(joint - la - lb)


def markov_decoupling_bound(Q: MarkovMeasure, tau_n: int) -> float:
    """Closed-form decoupling constant for a stationary chain.

    Conditioning on the state entering the second block gives

        Q(a * b) = Q(a) P^{tau+1}(a_n, b_1) / pi(b_1) Q(b),

    so c = max_{i,j} [log P^{tau+1}(i, j) - log pi(j)] works for every n
    and m at gap tau_n.  The difference of logs (never a log of a ratio)
    keeps the constant exact when the kernel row equals pi, as it does
    for an iid chain, where the bound is exactly 0.
    """
    if not isinstance(Q, MarkovMeasure):
        raise ConfigError("closed-form bound applies to Markov measures only")
    if not Q.stationary_start:
        raise ValidationError("closed-form bound needs the stationary start")
    if tau_n < 0:
        raise ConfigError("gap must be >= 0")
    pi = Q.start
    if (pi <= 0).any():
        raise ValidationError("closed-form bound needs pi > 0 everywhere")
    if tau_n == 0:
        log_kernel = Q.log_P
    else:
        kernel = np.linalg.matrix_power(Q.P, tau_n + 1)
        with np.errstate(divide="ignore"):
            log_kernel = np.log(kernel)
    log_pi = np.log(pi)
    return float(np.max(log_kernel - log_pi[None, :]))


@dataclasses.dataclass(frozen=True)
class TheoremData:
    """Error and gap schedules ready for the limit machinery."""

    rho: ErrorSchedule
    sigma: GapSchedule
    source: str


def decoupling_to_theorem_data(
    source: DecouplingReport | float,
    tau: GapSchedule | int | None = None,
) -> TheoremData:
    """Package audited or bounded constants as (rho, sigma) schedules.

    rho_n = max(c_n, 0): the subadditivity defect must be nonnegative
    even when the audited constant is negative.  From a report the rho
    table covers exactly the audited n range; from a scalar bound both
    schedules are constant.  A failed report is refused.
    """
    if isinstance(source, DecouplingReport):
        if source.failed:
            raise DecouplingFailure(
                "cannot build theorem schedules from a failed audit",
                witnesses=[dataclasses.astuple(p) for p in source.positivity_failures],
            )
        rho = ErrorSchedule.from_table([max(c, 0.0) for c in source.constants])
        return TheoremData(rho=rho, sigma=source.tau, source="audit")
    c = float(source)
    if not np.isfinite(c):
        raise DecouplingFailure("cannot build theorem schedules from an infinite constant")
    if tau is None:
        raise ConfigError("a scalar constant needs an explicit gap")
    sigma = tau if isinstance(tau, GapSchedule) else GapSchedule.constant(int(tau))
    return TheoremData(
        rho=ErrorSchedule.constant(max(c, 0.0)), sigma=sigma, source="bound"
    )


@dataclasses.dataclass(frozen=True)
class TrajectoryViolation:
    n: int
    m: int
    excess: float


@dataclasses.dataclass(frozen=True)
class TrajectoryCheck:
    ok: bool
    violations: tuple[TrajectoryViolation, ...]
    violation_count: int
    horizon: int
    tol: float
    max_excess: float

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violation_count": self.violation_count,
            "horizon": self.horizon,
            "tol": self.tol,
            "max_excess": self.max_excess,
            "violations": [dataclasses.asdict(v) for v in self.violations],
        }


def check_trajectory_subadditivity(
    x: Trajectory | np.ndarray,
    Q: ShiftMeasure,
    rho: ErrorSchedule,
    sigma: GapSchedule,
    N: int | None = None,
    tol: float = 1e-10,
    slow_cap: int = 500,
    max_report: int = 200,
) -> TrajectoryCheck:
    """Test f_{n+sigma_n+m}(x) <= f_n(x) + rho_n + f_m(shifted x) pairwise.

    f_n = log Q_n along the given path; the second block is evaluated
    after shifting by n + sigma_n.  All pairs with n + sigma_n + m <= N
    are covered.  iid and Markov run on prefix sums (O(N^2) arithmetic);
    other families recompute windows and are capped at slow_cap symbols.

    tol is an absolute slack for float cancellation: exact ties like a
    deterministic transition evaluate to excess 0 up to rounding.
    """
    symbols = x.symbols if isinstance(x, Trajectory) else np.asarray(x, dtype=np.int64)
    if N is None:
        N = symbols.size
    if N > symbols.size:
        raise ConfigError(f"horizon {N} exceeds trajectory length {symbols.size}")
    wl = window_logprob(Q, symbols[:N])
    if wl is None and N > slow_cap:
        raise CapExceededError(
            f"family {Q.family!r} has no fast window path; cap is {slow_cap} symbols"
        )
    ns = np.arange(1, N + 1, dtype=np.int64)
    sig = sigma.values(ns)
    rh = rho.values(ns)
    if wl is not None:
        pre = wl.suffix(0, N)
    else:
        pre = log_prefixes(Q, symbols[:N])
    found: list[TrajectoryViolation] = []
    total = 0
    max_excess = -np.inf
    for n in range(1, N + 1):
        j = n + int(sig[n - 1])
        m_max = N - j
        if m_max < 1:
            continue
        if wl is not None:
            shifted = wl.suffix(j, m_max)
        else:
            shifted = log_prefixes(Q, symbols[j : j + m_max])
        lhs = pre[j : j + m_max]
        with np.errstate(invalid="ignore"):
            excess = lhs - (pre[n - 1] + rh[n - 1]) - shifted
            bad = np.flatnonzero(excess > tol)
        defined = excess[~np.isnan(excess)]
        if defined.size:
            cur = float(defined.max())
            if cur > max_excess:
                max_excess = cur
        total += bad.size
        for i in bad:
            if len(found) < max_report:
                found.append(
                    TrajectoryViolation(n=n, m=int(i) + 1, excess=float(excess[i]))
                )
    return TrajectoryCheck(
        ok=(total == 0),
        violations=tuple(found),
        violation_count=total,
        horizon=int(N),
        tol=tol,
        max_excess=float(max_excess),
    )
