"""Shift-invariant measure families on finite-alphabet sequence space.

Each family exposes exact log-marginals log Q_n(w) for finite words w,
with -inf encoding probability zero, plus forward sampling driven by a
caller-supplied generator.  Families: iid products, stationary Markov
chains (optionally with a non-invariant start, for negative tests),
hidden-Markov observation processes, and finite mixtures of any of
these.

Log-marginal evaluation order is pinned: iid and Markov accumulate
per-symbol increments with a running sum (np.cumsum, which matches a
sequential left-to-right sum bit for bit), so streaming evaluators can
reproduce the same floats exactly.
"""
from __future__ import annotations

import abc
import dataclasses
import itertools
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, ConfigError, ValidationError
from .logspace import log_sum_exp, safe_log

_STOCH_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class Alphabet:
    """Finite alphabet {0, ..., size - 1}."""

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ConfigError("alphabet needs at least two symbols")

    def validate_word(self, word: np.ndarray) -> np.ndarray:
        w = np.asarray(word, dtype=np.int64)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("a word is a nonempty 1-d symbol array")
        if w.min() < 0 or w.max() >= self.size:
            raise ValidationError(f"symbols must lie in [0, {self.size})")
        return w

    def words(self, n: int) -> Iterator[tuple[int, ...]]:
        """All words of length n in lexicographic order."""
        return itertools.product(range(self.size), repeat=n)

    def word_count(self, n: int) -> int:
        return self.size**n


def _check_rows(mat: np.ndarray, name: str, tol: float = _STOCH_TOL) -> np.ndarray:
    if mat is None:
        raise ValidationError(f"{name} is missing")
    try:
        m = np.asarray(mat, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not numeric: {exc}") from exc
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"{name} must be a 2-d matrix")
    if (m < 0).any():
        raise ValidationError(f"{name} has negative entries")
    err = np.abs(m.sum(axis=1) - 1.0).max()
    if err > tol:
        raise ValidationError(f"{name} rows must sum to 1 (off by {err:.3g})")
    return m


def _check_prob_vector(vec, name: str, tol: float = _STOCH_TOL) -> np.ndarray:
    if vec is None:
        raise ValidationError(f"{name} is missing")
    try:
        v = np.asarray(vec, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not numeric: {exc}") from exc
    if v.ndim != 1 or v.size < 1:
        raise ValidationError(f"{name} must be a 1-d probability vector")
    if (v < 0).any():
        raise ValidationError(f"{name} has negative entries")
    err = abs(float(v.sum()) - 1.0)
    if err > tol:
        raise ValidationError(f"{name} must sum to 1 (off by {err:.3g})")
    return v


def stationary_distribution(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unique stationary law of a row-stochastic matrix.

    Solved through the SVD nullspace of (P^T - I).  A second vanishing
    singular value means the chain is reducible with several invariant
    laws, which is rejected.  A power-iteration fallback on the lazy
    chain (P + I)/2 covers the rare case where the nullspace vector is
    numerically unusable.
    """
    P = _check_rows(P, "transition matrix")
    k = P.shape[0]
    if P.shape[1] != k:
        raise ValidationError("transition matrix must be square")
    if (P == P[0]).all():
        # identical rows: the row itself is stationary, bit for bit, and
        # downstream exactness arguments (iid decoupling constant 0) rely
        # on pi not picking up SVD rounding
        return P[0].copy()
    A = P.T - np.eye(k)
    _, s, vh = np.linalg.svd(A)
    if k >= 2 and s[-2] < 1e-8:
        raise ValidationError("chain has no unique stationary law (reducible)")
    v = vh[-1]
    total = v.sum()
    pi = None
    if abs(total) > 1e-12:
        cand = v / total
        cand = np.clip(cand, 0.0, None)
        cand = cand / cand.sum()
        if np.abs(cand @ P - cand).sum() <= tol:
            pi = cand
    if pi is None:
        lazy = 0.5 * (P + np.eye(k))
        cand = np.full(k, 1.0 / k)
        for _ in range(100000):
            nxt = cand @ lazy
            nxt = nxt / nxt.sum()
            if np.abs(nxt - cand).sum() <= 1e-15:
                cand = nxt
                break
            cand = nxt
        resid = float(np.abs(cand @ P - cand).sum())
        if resid > tol:
            raise ValidationError(
                f"stationary distribution did not converge (residual {resid:.3g})"
            )
        pi = cand
    return pi


class ShiftMeasure(abc.ABC):
    """Common contract for measure families.

    Subclasses provide exact log-marginals at every word length, a level
    enumerator for audits, and forward sampling.  log_marginal must
    return values in [-inf, inf).
    """

    alphabet: Alphabet

    @property
    @abc.abstractmethod
    def family(self) -> str: ...

    @property
    @abc.abstractmethod
    def label(self) -> str: ...

    @abc.abstractmethod
    def log_marginal(self, word) -> float:
        """log Q_n(word) for a length-n symbol array."""

    @abc.abstractmethod
    def to_spec(self) -> dict: ...

    @abc.abstractmethod
    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        """log Q_n over all k^n words, indexed base-k, most significant first.

        The default walks the words one by one; subclasses override with
        a vectorized dynamic program.
        """
        self._guard_level(n, cap)
        out = np.empty(self.alphabet.word_count(n), dtype=np.float64)
        for i, w in enumerate(self.alphabet.words(n)):
            out[i] = self.log_marginal(np.asarray(w, dtype=np.int64))
        return out

    def _guard_level(self, n: int, cap: int) -> None:
        if n < 1:
            raise ConfigError("level must be >= 1")
        if self.alphabet.word_count(n) > cap:
            raise CapExceededError(
                f"level {n} needs {self.alphabet.word_count(n)} words, cap is {cap}"
            )


def _draw_from_cum(cum: np.ndarray, u) -> np.ndarray | int:
    """Index of the bucket containing u: #{j : cum_j <= u}, clipped.

    cum is an inclusive cumulative row; the clip absorbs the float case
    where the final entry lands a hair under 1.
    """
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, cum.size - 1)


class IIDMeasure(ShiftMeasure):
    """Product measure with a fixed symbol law p."""

    def __init__(self, p):
        self.p = _check_prob_vector(p, "symbol law")
        self.alphabet = Alphabet(self.p.size)
        self.log_p = safe_log(self.p)
        self._cum = np.cumsum(self.p)

    @property
    def family(self) -> str:
        return "iid"

    @property
    def label(self) -> str:
        return f"iid(k={self.alphabet.size})"

    def log_marginal(self, word) -> float:
        w = self.alphabet.validate_word(word)
        return float(np.cumsum(self.log_p[w])[-1])

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        self._guard_level(n, cap)
        lv = self.log_p.copy()
        for _ in range(n - 1):
            lv = (lv[:, None] + self.log_p[None, :]).ravel()
        return lv

    def to_spec(self) -> dict:
        return {"family": "iid", "p": self.p.tolist()}

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(_draw_from_cum(self._cum, rng.random(n)), dtype=np.int64)


class MarkovMeasure(ShiftMeasure):
    """Stationary finite Markov chain, or one started off-equilibrium.

    The default start is the unique stationary law, making the process
    shift-invariant.  An explicit non-invariant start is allowed so the
    validators have something real to reject; stationary_start records
    which case this is.
    """

    def __init__(self, P, start=None):
        self.P = _check_rows(P, "transition matrix")
        if self.P.shape[0] != self.P.shape[1]:
            raise ValidationError("transition matrix must be square")
        self.alphabet = Alphabet(self.P.shape[0])
        if start is None:
            self.start = stationary_distribution(self.P)
            self.stationary_start = True
        else:
            self.start = _check_prob_vector(start, "start law")
            if self.start.size != self.P.shape[0]:
                raise ValidationError("start law size must match the matrix")
            self.stationary_start = bool(
                np.abs(self.start @ self.P - self.start).max() <= 1e-12
            )
        self.log_P = safe_log(self.P)
        self.log_start = safe_log(self.start)
        self._cum_rows = np.cumsum(self.P, axis=1)
        self._cum_start = np.cumsum(self.start)

    @property
    def family(self) -> str:
        return "markov"

    @property
    def label(self) -> str:
        tag = "" if self.stationary_start else ", non-invariant start"
        return f"markov(k={self.alphabet.size}{tag})"

    def increments(self, word: np.ndarray) -> np.ndarray:
        """Per-symbol log increments; their running sum is log Q_n."""
        w = self.alphabet.validate_word(word)
        out = np.empty(w.size, dtype=np.float64)
        out[0] = self.log_start[w[0]]
        if w.size > 1:
            out[1:] = self.log_P[w[:-1], w[1:]]
        return out

    def log_marginal(self, word) -> float:
        return float(np.cumsum(self.increments(word))[-1])

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        self._guard_level(n, cap)
        k = self.alphabet.size
        lv = self.log_start.copy()
        last = np.arange(k, dtype=np.int64)
        for _ in range(n - 1):
            lv = (lv[:, None] + self.log_P[last, :]).ravel()
            last = np.tile(np.arange(k, dtype=np.int64), last.size)
        return lv

    def to_spec(self) -> dict:
        spec = {"family": "markov", "P": self.P.tolist()}
        if not self.stationary_start:
            spec["start"] = self.start.tolist()
        return spec

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        x = np.empty(n, dtype=np.int64)
        x[0] = _draw_from_cum(self._cum_start, u[0])
        rows = self._cum_rows
        prev = int(x[0])
        for i in range(1, n):
            prev = int(_draw_from_cum(rows[prev], u[i]))
            x[i] = prev
        return x


class HiddenMarkovMeasure(ShiftMeasure):
    """Observed layer of a stationary hidden Markov chain.

    A is the hidden transition matrix, E the per-state emission matrix
    (hidden states by observed symbols).  Marginals come from the
    forward recursion in log space.
    """

    def __init__(self, A, E, start=None):
        self.A = _check_rows(A, "hidden transition matrix")
        if self.A.shape[0] != self.A.shape[1]:
            raise ValidationError("hidden transition matrix must be square")
        self.E = _check_rows(E, "emission matrix")
        if self.E.shape[0] != self.A.shape[0]:
            raise ValidationError("emission rows must match hidden states")
        self.alphabet = Alphabet(self.E.shape[1])
        self.hidden_size = self.A.shape[0]
        if start is None:
            self.start = stationary_distribution(self.A)
        else:
            self.start = _check_prob_vector(start, "hidden start law")
            if self.start.size != self.hidden_size:
                raise ValidationError("hidden start size must match the matrix")
        self.log_A = safe_log(self.A)
        self.log_E = safe_log(self.E)
        self.log_start = safe_log(self.start)
        self._cum_A = np.cumsum(self.A, axis=1)
        self._cum_E = np.cumsum(self.E, axis=1)
        self._cum_start = np.cumsum(self.start)

    @property
    def family(self) -> str:
        return "hmm"

    @property
    def label(self) -> str:
        return f"hmm(hidden={self.hidden_size}, k={self.alphabet.size})"

    def forward_state(self, word: np.ndarray) -> np.ndarray:
        """Log forward vector alpha_n over hidden states after the word."""
        w = self.alphabet.validate_word(word)
        alpha = self.log_start + self.log_E[:, w[0]]
        for s in w[1:]:
            alpha = log_sum_exp(alpha[:, None] + self.log_A, axis=0) + self.log_E[:, s]
        return alpha

    def log_marginal(self, word) -> float:
        return float(log_sum_exp(self.forward_state(word)))

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        if self.alphabet.word_count(n) * self.hidden_size > cap:
            raise CapExceededError(
                f"level {n} forward table exceeds cap {cap}"
            )
        self._guard_level(n, cap)
        k = self.alphabet.size
        # ALPHA[w, i]: forward value of word w in hidden state i
        alpha = self.log_start[None, :] + self.log_E.T
        for _ in range(n - 1):
            moved = log_sum_exp(alpha[:, :, None] + self.log_A[None, :, :], axis=1)
            alpha = (moved[:, None, :] + self.log_E.T[None, :, :]).reshape(
                -1, self.hidden_size
            )
        return log_sum_exp(alpha, axis=1)

    def to_spec(self) -> dict:
        return {"family": "hmm", "A": self.A.tolist(), "E": self.E.tolist()}

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u_hidden = rng.random(n)
        z = np.empty(n, dtype=np.int64)
        z[0] = _draw_from_cum(self._cum_start, u_hidden[0])
        prev = int(z[0])
        for i in range(1, n):
            prev = int(_draw_from_cum(self._cum_A[prev], u_hidden[i]))
            z[i] = prev
        u_emit = rng.random(n)
        cum = self._cum_E[z]
        idx = (cum <= u_emit[:, None]).sum(axis=1)
        return np.minimum(idx, self.alphabet.size - 1).astype(np.int64)


class MixtureMeasure(ShiftMeasure):
    """Finite convex mixture of shift measures on one alphabet.

    Not ergodic for distinct components: a sampled path follows a single
    component forever, so path functionals converge to per-component
    limits, not to the mixture average.
    """

    def __init__(self, components: Sequence[ShiftMeasure], weights):
        comps = list(components)
        if len(comps) < 2:
            raise ConfigError("a mixture needs at least two components")
        sizes = {c.alphabet.size for c in comps}
        if len(sizes) != 1:
            raise ValidationError("mixture components must share one alphabet")
        self.components = comps
        self.weights = _check_prob_vector(weights, "mixture weights")
        if self.weights.size != len(comps):
            raise ValidationError("one weight per component required")
        if (self.weights <= 0).any():
            raise ValidationError("mixture weights must be strictly positive")
        self.alphabet = comps[0].alphabet
        self.log_weights = safe_log(self.weights)
        self._cum_w = np.cumsum(self.weights)

    @property
    def family(self) -> str:
        return "mixture"

    @property
    def label(self) -> str:
        inner = ", ".join(c.label for c in self.components)
        return f"mixture({inner})"

    def log_marginal(self, word) -> float:
        w = self.alphabet.validate_word(word)
        vals = np.asarray(
            [lw + c.log_marginal(w) for lw, c in zip(self.log_weights, self.components)]
        )
        return float(log_sum_exp(vals))

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        self._guard_level(n, cap)
        stack = np.stack(
            [
                lw + c.log_marginals_level(n, cap=cap)
                for lw, c in zip(self.log_weights, self.components)
            ]
        )
        return log_sum_exp(stack, axis=0)

    def to_spec(self) -> dict:
        return {
            "family": "mixture",
            "weights": self.weights.tolist(),
            "components": [c.to_spec() for c in self.components],
        }

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        j = int(_draw_from_cum(self._cum_w, rng.random()))
        return self.components[j]._sample(n, rng)


@dataclasses.dataclass(frozen=True)
class MeasureValidation:
    ok: bool
    levels_checked: int
    normalization_error: dict[int, float]
    consistency_error: dict[int, float]
    problems: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "levels_checked": self.levels_checked,
            "normalization_error": {str(k): v for k, v in self.normalization_error.items()},
            "consistency_error": {str(k): v for k, v in self.consistency_error.items()},
            "problems": list(self.problems),
        }


def validate_measure(
    Q: ShiftMeasure, n_max: int = 4, tol: float = 1e-9, cap: int = 10**7
) -> MeasureValidation:
    """Audit normalization and two-sided marginal consistency by brute force.

    For each level n <= n_max the k^n marginals must sum to 1, and the
    level-(n+1) table must reduce to the level-n table when the last or
    the first coordinate is summed out.  The first-coordinate reduction
    is the shift-invariance witness: it fails for a chain started off
    its stationary law.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    norm_err: dict[int, float] = {}
    cons_err: dict[int, float] = {}
    problems: list[str] = []
    k = Q.alphabet.size
    levels: dict[int, np.ndarray] = {}
    for n in range(1, n_max + 1):
        lv = Q.log_marginals_level(n, cap=cap)
        levels[n] = lv
        err = abs(float(np.exp(log_sum_exp(lv))) - 1.0)
        norm_err[n] = err
        if err > tol:
            problems.append(f"level {n} marginals sum off 1 by {err:.3g}")
    for n in range(1, n_max):
        probs_n = np.exp(levels[n])
        right = np.exp(log_sum_exp(levels[n + 1].reshape(-1, k), axis=1))
        left = np.exp(log_sum_exp(levels[n + 1].reshape(k, -1), axis=0))
        err = max(
            float(np.abs(right - probs_n).max()), float(np.abs(left - probs_n).max())
        )
        cons_err[n] = err
        if err > tol:
            problems.append(f"levels {n} and {n + 1} are marginal-inconsistent by {err:.3g}")
    return MeasureValidation(
        ok=(not problems),
        levels_checked=n_max,
        normalization_error=norm_err,
        consistency_error=cons_err,
        problems=tuple(problems),
    )


def measure_from_spec(obj: dict) -> ShiftMeasure:
    """Build a measure from its JSON spec; inverse of to_spec."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise ConfigError("measure spec needs a 'family' field")
    family = obj["family"]
    if family == "iid":
        return IIDMeasure(obj.get("p"))
    if family == "markov":
        return MarkovMeasure(obj.get("P"), start=obj.get("start"))
    if family == "hmm":
        return HiddenMarkovMeasure(obj.get("A"), obj.get("E"), start=obj.get("start"))
    if family == "mixture":
        comps = obj.get("components")
        if not isinstance(comps, list):
            raise ConfigError("mixture spec needs a 'components' list")
        return MixtureMeasure(
            [measure_from_spec(c) for c in comps], obj.get("weights")
        )
    raise ConfigError(f"unknown measure family {family!r}")
