"""Interval decomposition of an orbit segment, Steele style, with gaps.

Given a window functional f (think log-marginals along one path), a
candidate limit value, a block scale r and depth K, offsets split into
"bad" ones, where every normalized block value up to depth K overshoots
the limit by more than eps, and "good" ones, where some depth works.
Walking the segment [1, n-1] greedily from the left tiles it by

    good intervals: length k r + sigma_{k r}, k the smallest depth
                    whose normalized value is within eps of the limit;
    bad intervals:  length r + sigma_r.

The tiling gives a sandwich on the good mass and an upper representation
of f at the full horizon by block values plus a boundary tail; both are
re-verified here exactly (the cover counts in integers) or to float
tolerance (the representation).  The Birkhoff average of the bad-offset
functional is the knob that shrinks as K grows, which is what makes the
construction useful.
"""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .errors import ConfigError, ValidationError
from .measures import ShiftMeasure
from .sampling import Trajectory, window_logprob
from .schedules import ErrorSchedule, GapSchedule


def _zero_rho(j: int, n: int) -> float:
    return 0.0


@dataclasses.dataclass
class ProofContext:
    """Everything the decomposition needs about one path.

    f(j, n) is the functional on the length-n window at offset j; rho
    the error allowance for splitting at that offset; limit_value the
    candidate limit.  horizon bounds j + n over all evaluations.

    sigma_1 = 0 is required by default: the walk must be free to advance
    one base block without leaving an uncovered gap at depth one.  When
    the functional is known to decrease under extension-by-one (log
    marginals do), that requirement can be waived with
    assume_shift_monotone=True.

    Only the convention where the gap trails the first block is
    implemented; gap_convention exists so the unsupported trailing-
    second-block variant fails loudly instead of silently computing
    something else.
    """

    f: Callable[[int, int], float]
    limit_value: float
    sigma: GapSchedule
    r: int
    K: int
    eps: float
    horizon: int
    rho: Callable[[int, int], float] = _zero_rho
    f_batch: Callable[[np.ndarray, int], np.ndarray] | None = None
    rho_batch: Callable[[np.ndarray, int], np.ndarray] | None = None
    assume_shift_monotone: bool = False
    gap_convention: str = "first_block"

    def __post_init__(self):
        if self.r < 1 or self.K < 1:
            raise ConfigError("block scale r and depth K must be >= 1")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.limit_value == np.inf or np.isnan(self.limit_value):
            raise ConfigError("limit value must lie in [-inf, inf)")
        if self.gap_convention != "first_block":
            raise ConfigError(
                f"gap convention {self.gap_convention!r} is not supported; only "
                "'first_block' (gap after the leading block) is implemented"
            )
        if self.sigma.value(1) != 0 and not self.assume_shift_monotone:
            raise ValidationError(
                "sigma_1 must be 0 unless the functional is extension-monotone "
                "(set assume_shift_monotone=True to waive)"
            )

    @property
    def threshold(self) -> float:
        """Bad-set cutoff: max(limit, -1/eps) + eps."""
        return max(self.limit_value, -1.0 / self.eps) + self.eps

    @property
    def sigma_bar(self) -> int:
        """max sigma_{k r} over depths k <= K."""
        return self.sigma.max_over_multiples(self.r, self.K)

    def block_length(self, k: int) -> int:
        return k * self.r + self.sigma.value(k * self.r)

    def _need(self, j: int, n: int) -> None:
        if j < 0 or n < 1 or j + n > self.horizon:
            raise ConfigError(
                f"evaluation f({j}, {n}) exceeds the context horizon {self.horizon}"
            )

    def eval_f(self, j: int, n: int) -> float:
        self._need(j, n)
        return float(self.f(j, n))

    def eval_rho(self, j: int, n: int) -> float:
        v = float(self.rho(j, n))
        if v < 0 or not np.isfinite(v):
            raise ValidationError("rho values must be finite and >= 0")
        return v


def depth_value(ctx: ProofContext, j: int, k: int) -> float:
    """Normalized depth-k block value at offset j."""
    n = k * ctx.r
    return (ctx.eval_f(j, n) + ctx.eval_rho(j, n)) / (n + ctx.sigma.value(n))


def bad_set_member(ctx: ProofContext, j: int) -> bool:
    """True when every depth k <= K overshoots the threshold at offset j."""
    thr = ctx.threshold
    for k in range(1, ctx.K + 1):
        if depth_value(ctx, j, k) <= thr:
            return False
    return True


def bad_indicator(ctx: ProofContext, count: int) -> np.ndarray:
    """Membership for offsets 0 .. count-1 as a bool array."""
    if count < 1:
        raise ConfigError("need at least one offset")
    # the batch path cannot apply a rho it has no batch hook for
    batchable = ctx.f_batch is not None and (
        ctx.rho_batch is not None or ctx.rho is _zero_rho
    )
    if not batchable:
        return np.fromiter(
            (bad_set_member(ctx, j) for j in range(count)), dtype=bool, count=count
        )
    js = np.arange(count, dtype=np.int64)
    if count - 1 + ctx.K * ctx.r > ctx.horizon:
        raise ConfigError("offsets exceed the context horizon at depth K")
    thr = ctx.threshold
    member = np.ones(count, dtype=bool)
    for k in range(1, ctx.K + 1):
        n = k * ctx.r
        denom = n + ctx.sigma.value(n)
        vals = ctx.f_batch(js, n)
        if ctx.rho_batch is not None:
            vals = vals + ctx.rho_batch(js, n)
        member &= (vals / denom) > thr
        if not member.any():
            break
    return member


def birkhoff_bad_average(ctx: ProofContext, count: int) -> float:
    """Average over offsets j < count of 1_bad(j) (1 + f(j, r)_+ + rho(j, r)).

    This dominates the per-length loss the bad intervals can cause in
    the upper representation; it shrinks as the depth K grows because
    deeper inspection clears more offsets.
    """
    member = bad_indicator(ctx, count)
    if not member.any():
        return 0.0
    js = np.flatnonzero(member)
    if ctx.f_batch is not None:
        f_r = ctx.f_batch(js.astype(np.int64), ctx.r)
        if ctx.rho_batch is not None:
            rho_r = ctx.rho_batch(js.astype(np.int64), ctx.r)
        else:
            rho_r = np.asarray([ctx.eval_rho(int(j), ctx.r) for j in js])
    else:
        f_r = np.asarray([ctx.eval_f(int(j), ctx.r) for j in js])
        rho_r = np.asarray([ctx.eval_rho(int(j), ctx.r) for j in js])
    terms = 1.0 + np.maximum(f_r, 0.0) + rho_r
    return float(terms.sum() / count)


@dataclasses.dataclass(frozen=True)
class Interval:
    """One tile [lo, hi] (1-indexed, inclusive); offset = lo - 1."""

    index: int
    lo: int
    hi: int
    kind: str
    k: int | None

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1

    @property
    def offset(self) -> int:
        return self.lo - 1


@dataclasses.dataclass(frozen=True)
class SteeleDecomposition:
    """Greedy tiling of [1, n-1] plus the uncovered boundary tail."""

    n: int
    intervals: tuple[Interval, ...]
    covered: int  # M: last index covered by a tile
    r: int
    K: int
    eps: float
    sigma_bar: int

    @property
    def good_intervals(self) -> tuple[Interval, ...]:
        return tuple(iv for iv in self.intervals if iv.kind == "good")

    @property
    def bad_intervals(self) -> tuple[Interval, ...]:
        return tuple(iv for iv in self.intervals if iv.kind == "bad")

    @property
    def good_mass(self) -> int:
        return sum(iv.length for iv in self.good_intervals)

    @property
    def bad_mass(self) -> int:
        return sum(iv.length for iv in self.bad_intervals)

    @property
    def good_coverage(self) -> float:
        return self.good_mass / self.n

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "K": self.K,
            "eps": self.eps,
            "sigma_bar": self.sigma_bar,
            "covered": self.covered,
            "good_mass": self.good_mass,
            "bad_mass": self.bad_mass,
            "good_coverage": self.good_coverage,
            "intervals": [dataclasses.asdict(iv) for iv in self.intervals],
        }


def steele_decompose(ctx: ProofContext, n: int) -> SteeleDecomposition:
    """Tile [1, n-1] greedily from the left.

    At the current boundary offset m: a bad offset contributes a bad
    tile of length r + sigma_r; a good offset contributes a good tile of
    length k r + sigma_{k r} for the smallest admissible depth k.  The
    walk stops when the next tile would poke past n - 1; that tile is
    not emitted, leaving the tail (covered, n] to the boundary term.

    Needs horizon >= n + K r so membership stays evaluable at every
    reachable offset.  n smaller than the first tile yields the
    degenerate decomposition with no tiles and covered = 0.
    """
    if n < 1:
        raise ConfigError("horizon n must be >= 1")
    if ctx.horizon < n + ctx.K * ctx.r:
        raise ConfigError(
            f"context horizon {ctx.horizon} cannot provision n + K r = {n + ctx.K * ctx.r}"
        )
    thr = ctx.threshold
    intervals: list[Interval] = []
    m = 0
    while m < n - 1:
        # smallest admissible depth doubles as the membership test: no
        # admissible depth up to K is exactly the bad-set condition
        chosen_k: int | None = None
        for k in range(1, ctx.K + 1):
            if depth_value(ctx, m, k) <= thr:
                chosen_k = k
                break
        base = chosen_k * ctx.r if chosen_k is not None else ctx.r
        length = base + ctx.sigma.value(base)
        if m + length > n - 1:
            break
        intervals.append(
            Interval(
                index=len(intervals) + 1,
                lo=m + 1,
                hi=m + length,
                kind="bad" if chosen_k is None else "good",
                k=chosen_k,
            )
        )
        m += length
    return SteeleDecomposition(
        n=int(n),
        intervals=tuple(intervals),
        covered=m,
        r=ctx.r,
        K=ctx.K,
        eps=ctx.eps,
        sigma_bar=ctx.sigma_bar,
    )


@dataclasses.dataclass(frozen=True)
class CoverBounds:
    ok: bool
    upper_ok: bool
    lower_ok: bool
    upper_slack: int
    lower_slack: int
    bad_offset_count: int

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def verify_cover_bounds(d: SteeleDecomposition, ctx: ProofContext) -> CoverBounds:
    """Check the integer sandwich on the good mass.

    Upper: the good tiles sit disjointly inside [1, n-1], so their mass
    is at most n - 1; the slack is the distance from a full tiling.
    Lower: every bad tile spends r + sigma_r on a bad offset and at most
    one partial tile of length at most K r + sigma_bar is lost at the
    boundary, so

        good_mass >= n - (r + sigma_r) B - K r - sigma_bar,

    with B the number of bad offsets among 0 .. n (inclusive, matching
    the Birkhoff count the limit argument divides by).  Both sides are
    integers; no tolerance is involved.
    """
    n = d.n
    sg = d.good_mass
    upper_slack = (n - 1) - sg
    B = int(bad_indicator(ctx, n + 1).sum())
    r_len = ctx.r + ctx.sigma.value(ctx.r)
    lower = n - r_len * B - ctx.K * ctx.r - d.sigma_bar
    lower_slack = sg - lower
    return CoverBounds(
        ok=(upper_slack >= 0 and lower_slack >= 0),
        upper_ok=(upper_slack >= 0),
        lower_ok=(lower_slack >= 0),
        upper_slack=int(upper_slack),
        lower_slack=int(lower_slack),
        bad_offset_count=B,
    )


@dataclasses.dataclass(frozen=True)
class UpperRepresentation:
    ok: bool
    lhs: float
    rhs: float
    residual: float
    tol: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def verify_ub_rep(
    d: SteeleDecomposition, ctx: ProofContext, tol_scale: float = 1e-8
) -> UpperRepresentation:
    """Check f(0, n) against the tile-sum upper bound.

    rhs sums f + rho over the good tiles at their depth-k lengths and
    the bad tiles at the base length, each evaluated at the tile's left
    offset, plus the positive part of the boundary tail.  Gapped almost
    subadditivity makes rhs an upper bound for f(0, n) in exact
    arithmetic; the check allows residual >= -tol with
    tol = tol_scale * n for float cancellation.

    A -inf lhs is trivially dominated and verifies regardless of rhs.
    """
    n = d.n
    rhs = 0.0
    for iv in d.intervals:
        base = (iv.k * ctx.r) if iv.kind == "good" else ctx.r
        rhs += ctx.eval_f(iv.offset, base) + ctx.eval_rho(iv.offset, base)
    tail = n - d.covered
    if tail >= 1:
        rhs += max(ctx.eval_f(d.covered, tail), 0.0)
    lhs = ctx.eval_f(0, n)
    tol = tol_scale * n
    if lhs == -np.inf:
        return UpperRepresentation(ok=True, lhs=lhs, rhs=rhs, residual=np.inf, tol=tol)
    residual = rhs - lhs
    return UpperRepresentation(
        ok=bool(residual >= -tol), lhs=lhs, rhs=rhs, residual=float(residual), tol=tol
    )


@dataclasses.dataclass(frozen=True)
class DepthAudit:
    ok: bool
    first_failure: tuple[int, str] | None

    def to_json(self) -> dict:
        return {"ok": self.ok, "first_failure": self.first_failure}


def verify_depths(d: SteeleDecomposition, ctx: ProofContext) -> DepthAudit:
    """Re-derive every tile's classification and depth from scratch.

    Good tiles must fail the threshold at all depths below their k and
    pass at k; bad tiles must fail at every depth up to K.
    """
    thr = ctx.threshold
    for iv in d.intervals:
        j = iv.offset
        if iv.kind == "good":
            for k in range(1, iv.k):
                if depth_value(ctx, j, k) <= thr:
                    return DepthAudit(
                        ok=False,
                        first_failure=(iv.index, f"depth {k} already admits at offset {j}"),
                    )
            if depth_value(ctx, j, iv.k) > thr:
                return DepthAudit(
                    ok=False,
                    first_failure=(iv.index, f"declared depth {iv.k} fails at offset {j}"),
                )
        else:
            for k in range(1, ctx.K + 1):
                if depth_value(ctx, j, k) <= thr:
                    return DepthAudit(
                        ok=False,
                        first_failure=(iv.index, f"bad tile admits depth {k} at offset {j}"),
                    )
    return DepthAudit(ok=True, first_failure=None)


def trajectory_context(
    x: Trajectory | np.ndarray,
    Q: ShiftMeasure,
    rho: ErrorSchedule,
    sigma: GapSchedule,
    limit_value: float,
    r: int,
    K: int,
    eps: float,
) -> ProofContext:
    """ProofContext for f = per-window log-marginals of Q along x.

    iid and Markov paths get O(1) window evaluation and vector hooks;
    other families fall back to direct (quadratic) evaluation, which is
    only sensible at small horizons.  Log-marginals decrease under
    extension, so the sigma_1 = 0 requirement is waived.
    """
    symbols = x.symbols if isinstance(x, Trajectory) else np.asarray(x, dtype=np.int64)
    wl = window_logprob(Q, symbols)
    if wl is not None:
        f = wl.single
        f_batch = wl.many
    else:

        def f(j: int, n: int) -> float:
            return Q.log_marginal(symbols[j : j + n])

        f_batch = None
    if rho.position_dependent:

        def rho_fn(j: int, n: int) -> float:
            return float(rho.hook(symbols, j, n))

        rho_batch = None
    else:

        def rho_fn(j: int, n: int) -> float:
            return rho.value(n)

        def rho_batch(js: np.ndarray, n: int) -> np.ndarray:
            return np.full(js.shape, rho.value(n))
    return ProofContext(
        f=f,
        limit_value=float(limit_value),
        sigma=sigma,
        r=int(r),
        K=int(K),
        eps=float(eps),
        horizon=int(symbols.size),
        rho=rho_fn,
        f_batch=f_batch,
        rho_batch=rho_batch,
        assume_shift_monotone=True,
    )
