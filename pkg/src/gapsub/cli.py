"""Command-line front end.

Every run writes its artifacts plus a manifest.json into --outdir.  The
manifest embeds the fully resolved configuration (including the measure
and sequence specs, not just their file names), so `gapsub rerun
--manifest <path>` reproduces the artifacts byte for byte with no other
inputs.  Nothing written here contains timestamps or machine state.

Exit codes: 0 success, 2 bad configuration or schema, 3 failed numeric
validation, 4 enumeration cap exceeded, 5 decoupling failure, 1 other
errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .decoupling import (
    check_trajectory_subadditivity,
    decoupling_to_theorem_data,
    markov_decoupling_bound,
    minimal_decoupling_constants,
)
from .errors import (
    CapExceededError,
    ConfigError,
    DecouplingFailure,
    GapLiftError,
    GapsubError,
    SchemaError,
    ScheduleRangeError,
    ValidationError,
)
from .estimators import (
    as_markov,
    closed_form_entropy_rate,
    closed_form_kl_rate,
    cross_entropy_estimate,
    mean_convergence_series,
    relative_entropy_estimate,
)
from .fekete import (
    check_gapped_subadditivity,
    fekete_limit_estimate,
    gap_lift,
    sequence_from_spec,
)
from .measures import IIDMeasure, MarkovMeasure, ShiftMeasure, measure_from_spec, validate_measure
from .sampling import Trajectory, sample_trajectory
from .schedules import ErrorSchedule, GapSchedule, geometric_grid, linear_grid
from .steele import (
    birkhoff_bad_average,
    steele_decompose,
    trajectory_context,
    verify_cover_bounds,
    verify_depths,
    verify_ub_rep,
)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one run; JSON round-trippable."""

    subcommand: str
    params: dict

    def to_json(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict) or "subcommand" not in obj or "params" not in obj:
            raise ConfigError("run config needs 'subcommand' and 'params'")
        return cls(subcommand=obj["subcommand"], params=obj["params"])


# ---------------------------------------------------------------------------
# schema validation with JSON-pointer paths


def _ptr(*parts) -> str:
    return "/" + "/".join(str(p) for p in parts) if parts else ""


def _check_matrix(obj, base: str, name: str, problems: list, square: bool):
    mat = obj.get(name)
    here = _ptr(name) if not base else base + _ptr(name)
    if mat is None:
        problems.append((here, "missing"))
        return
    if not isinstance(mat, list) or not mat or not all(isinstance(r, list) for r in mat):
        problems.append((here, "must be a list of rows"))
        return
    width = len(mat[0])
    for i, row in enumerate(mat):
        rp = here + _ptr(i)
        if len(row) != width:
            problems.append((rp, "ragged row"))
            continue
        if not all(isinstance(v, (int, float)) for v in row):
            problems.append((rp, "non-numeric entry"))
            continue
        if any(v < 0 for v in row):
            problems.append((rp, "negative entry"))
            continue
        s = float(sum(row))
        if abs(s - 1.0) > 1e-9:
            problems.append((rp, f"row sums to {s!r}, expected 1"))
    if square and len(mat) != width:
        problems.append((here, "must be square"))


def _check_vector(obj, base: str, name: str, problems: list, required: bool):
    vec = obj.get(name)
    here = _ptr(name) if not base else base + _ptr(name)
    if vec is None:
        if required:
            problems.append((here, "missing"))
        return
    if not isinstance(vec, list) or not vec:
        problems.append((here, "must be a nonempty list"))
        return
    if not all(isinstance(v, (int, float)) for v in vec):
        problems.append((here, "non-numeric entry"))
        return
    if any(v < 0 for v in vec):
        problems.append((here, "negative entry"))
        return
    s = float(sum(vec))
    if abs(s - 1.0) > 1e-9:
        problems.append((here, f"sums to {s!r}, expected 1"))


def _schema_measure(obj, base: str, problems: list):
    if not isinstance(obj, dict):
        problems.append((base or "/", "must be an object"))
        return
    family = obj.get("family")
    if family not in ("iid", "markov", "hmm", "mixture"):
        problems.append(
            ((base + _ptr("family")) if base else _ptr("family"), f"unknown family {family!r}")
        )
        return
    if family == "iid":
        _check_vector(obj, base, "p", problems, required=True)
    elif family == "markov":
        _check_matrix(obj, base, "P", problems, square=True)
        _check_vector(obj, base, "start", problems, required=False)
    elif family == "hmm":
        _check_matrix(obj, base, "A", problems, square=True)
        _check_matrix(obj, base, "E", problems, square=False)
        _check_vector(obj, base, "start", problems, required=False)
    else:
        _check_vector(obj, base, "weights", problems, required=True)
        comps = obj.get("components")
        here = (base + _ptr("components")) if base else _ptr("components")
        if not isinstance(comps, list) or len(comps) < 2:
            problems.append((here, "needs a list of at least two components"))
            return
        for i, c in enumerate(comps):
            _schema_measure(c, here + _ptr(i), problems)


def _schema_schedule(obj, base: str, problems: list):
    # gap and error schedules share the layout; integer-ness of gap
    # values is enforced at construction, not here
    if not isinstance(obj, dict) or "rule" not in obj:
        problems.append((base or "/", "needs a 'rule' field"))
        return
    rule = obj["rule"]
    params = obj.get("params", {})
    known = ("constant", "ceil_power", "ceil_log", "scaled_power", "table")
    if rule not in known:
        problems.append((base + _ptr("rule"), f"unknown rule {rule!r}"))
        return
    if rule == "constant":
        v = params.get("value")
        if not isinstance(v, (int, float)) or v < 0:
            problems.append((base + _ptr("params", "value"), "needs a nonnegative value"))
    if rule == "table":
        vals = params.get("values")
        if not isinstance(vals, list) or not vals:
            problems.append((base + _ptr("params", "values"), "needs nonempty values"))
        elif any(not isinstance(v, (int, float)) or v < 0 for v in vals):
            problems.append((base + _ptr("params", "values"), "entries must be numbers >= 0"))


def _schema_sequence(obj, base: str, problems: list):
    if not isinstance(obj, dict) or "name" not in obj:
        problems.append((base or "/", "needs a 'name' field"))
        return
    known = ("linear", "affine_sqrt", "sqrt", "neg_nlogn", "square", "log", "neg_inf_from", "table")
    if obj["name"] not in known:
        problems.append((base + _ptr("name"), f"unknown sequence {obj['name']!r}"))
        return
    if obj["name"] == "table":
        vals = obj.get("params", {}).get("values")
        here = base + _ptr("params", "values")
        if not isinstance(vals, list) or not vals:
            problems.append((here, "needs nonempty values"))
        elif any(not isinstance(v, (int, float)) for v in vals):
            problems.append((here, "non-numeric entry"))


def schema_validate(obj, kind: str = "auto") -> list[tuple[str, str]]:
    """Structural check of a JSON document; returns (pointer, message) pairs.

    kind "auto" sniffs: 'family' means measure, 'name' sequence, 'rule'
    schedule.  Row-sum and normalization checks run here too, so a bad
    stochastic matrix is caught before any construction starts.
    """
    problems: list[tuple[str, str]] = []
    if kind == "auto":
        if isinstance(obj, dict) and "family" in obj:
            kind = "measure"
        elif isinstance(obj, dict) and "name" in obj:
            kind = "sequence"
        elif isinstance(obj, dict) and "rule" in obj:
            kind = "schedule"
        else:
            return [("", "cannot infer document kind (no family/name/rule field)")]
    if kind == "measure":
        _schema_measure(obj, "", problems)
    elif kind == "sequence":
        _schema_sequence(obj, "", problems)
    elif kind == "schedule":
        _schema_schedule(obj, "", problems)
    else:
        raise ConfigError(f"unknown schema kind {kind!r}")
    return problems


# ---------------------------------------------------------------------------
# artifact plumbing


def _atomic_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _series_bytes(series) -> bytes:
    lines = ["n,value"]
    for n, v in zip(series.ns.tolist(), series.values.tolist()):
        lines.append(f"{n},{v!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _load_measure_spec(path: str) -> dict:
    obj = _load_json(path)
    problems = schema_validate(obj, "measure")
    if problems:
        raise SchemaError(problems)
    return obj


def _grid_from_spec(spec: str, N: int) -> np.ndarray:
    if spec == "geometric":
        return geometric_grid(N)
    if spec.startswith("geometric:"):
        return geometric_grid(N, ratio=float(spec.split(":", 1)[1]))
    if spec.startswith("linear:"):
        return linear_grid(N, step=int(spec.split(":", 1)[1]))
    raise ConfigError(f"unknown grid spec {spec!r}")


def _schedule_pair(params: dict) -> tuple[GapSchedule, ErrorSchedule]:
    sigma = GapSchedule.from_json(params["sigma"]) if params.get("sigma") else GapSchedule.zero()
    rho = ErrorSchedule.from_json(params["rho"]) if params.get("rho") else ErrorSchedule.zero()
    return sigma, rho


# ---------------------------------------------------------------------------
# runners: each takes resolved params, returns {filename: artifact}
# where artifact is ("json", obj), ("csv", series) or ("text", str)


def _run_fekete_check(p: dict) -> dict:
    F = sequence_from_spec(p["sequence"])
    sigma, rho = _schedule_pair(p)
    check = check_gapped_subadditivity(
        F, sigma, rho, int(p["N"]), tol=float(p.get("tol", 1e-12)),
        cap=int(p.get("cap", 5000)),
    )
    return {"check.json": ("json", check.to_json())}


def _run_fekete_limit(p: dict) -> dict:
    F = sequence_from_spec(p["sequence"])
    sigma, rho = _schedule_pair(p)
    est = fekete_limit_estimate(
        F, sigma, rho, int(p["N"]), stride=p.get("stride")
    )
    return {
        "report.json": ("json", est.report.to_json()),
        "series.csv": ("csv", est.series),
    }


def _run_fekete_lift(p: dict) -> dict:
    F = sequence_from_spec(p["sequence"])
    sigma = GapSchedule.from_json(p["sigma"])
    probe_N = int(p.get("probe_N", 200))
    table_N = int(p.get("table_N", 256))
    lifted = gap_lift(F, sigma, probe_N=probe_N)
    ns = np.arange(1, table_N + 1, dtype=np.int64)
    table = lifted.rho.values(ns)
    rho_json = {"rule": "table", "params": {"values": table.tolist()}}
    summary = {
        "sequence": p["sequence"],
        "sigma": sigma.to_json(),
        "probe_N": probe_N,
        "plainly_subadditive_up_to": probe_N,
        "rho_table_length": table_N,
    }
    return {
        "rho.json": ("json", rho_json),
        "lift.json": ("json", summary),
    }


def _run_sample(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    x = sample_trajectory(Q, int(p["N"]), int(p["seed"]), stream=int(p.get("stream", 0)))
    text = " ".join(map(str, x.symbols.tolist())) + "\n"
    summary = {
        "measure": Q.label,
        "N": int(p["N"]),
        "seed": int(p["seed"]),
        "stream": int(p.get("stream", 0)),
        "alphabet": Q.alphabet.size,
    }
    return {"trajectory.txt": ("text", text), "sample.json": ("json", summary)}


def _resolve_flags(p: dict) -> dict:
    return {"assume_decoupled": bool(p.get("assume_decoupled", False))}


def _run_series(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    P = measure_from_spec(p["sample_from"]) if p.get("sample_from") else Q
    N = int(p["N"])
    offset = int(p.get("offset", 0))
    grid = _grid_from_spec(p.get("grid", "geometric"), N)
    est = cross_entropy_estimate(
        P, Q, N, int(p["seed"]), grid=grid, offset=offset, **_resolve_flags(p)
    )
    summary = est.to_json()
    summary["tail_oscillation"] = est.series.tail_oscillation()
    return {"series.csv": ("csv", est.series), "summary.json": ("json", summary)}


def _oracle_rates(P: ShiftMeasure, Q: ShiftMeasure) -> dict:
    """Closed-form rates when both measures admit them."""
    out: dict = {}
    closed = isinstance(P, (IIDMeasure, MarkovMeasure)) and isinstance(
        Q, (IIDMeasure, MarkovMeasure)
    )
    if closed and as_markov(P).stationary_start:
        out["entropy_rate_p"] = closed_form_entropy_rate(P)
        out["kl_rate"] = closed_form_kl_rate(P, Q)
        cross = out["kl_rate"] + out["entropy_rate_p"] if np.isfinite(out["kl_rate"]) else float("inf")
        out["cross_entropy_rate"] = cross
    return out


def _run_estimate(p: dict, mode: str) -> dict:
    P = measure_from_spec(p["p"])
    Q = measure_from_spec(p["q"])
    N = int(p["N"])
    grid = _grid_from_spec(p.get("grid", "geometric"), N)
    seed = int(p["seed"])
    flags = _resolve_flags(p)
    if mode == "cross":
        est = cross_entropy_estimate(
            P, Q, N, seed, grid=grid, offset=int(p.get("offset", 0)), **flags
        )
    else:
        est = relative_entropy_estimate(
            P, Q, N, seed, grid=grid, offset=int(p.get("offset", 0)), **flags
        )
    summary = est.to_json()
    oracles = _oracle_rates(P, Q)
    if oracles:
        summary["oracles"] = oracles
        if mode == "relent" and np.isfinite(est.rate) and np.isfinite(oracles["kl_rate"]):
            summary["rate_minus_oracle"] = est.rate - oracles["kl_rate"]
    return {"series.csv": ("csv", est.series), "summary.json": ("json", summary)}


def _run_estimate_mean(p: dict) -> dict:
    P = measure_from_spec(p["p"])
    Q = measure_from_spec(p["q"])
    N = int(p["N"])
    grid = _grid_from_spec(p.get("grid", "geometric"), N)
    res = mean_convergence_series(
        P, Q, N, int(p["trials"]), int(p["seed"]), grid=grid, **_resolve_flags(p)
    )
    lines = ["trial,terminal"]
    for t, v in enumerate(res.trial_terminals.tolist()):
        lines.append(f"{t},{v!r}")
    terminals = "\n".join(lines) + "\n"
    summary = res.to_json()
    summary["oracles"] = _oracle_rates(P, Q)
    return {
        "series.csv": ("csv", res.series),
        "terminals.csv": ("text", terminals),
        "summary.json": ("json", summary),
    }


def _run_decouple_audit(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    tau = GapSchedule.from_json(p["tau"]) if isinstance(p.get("tau"), dict) else GapSchedule.constant(int(p.get("tau", 0)))
    report = minimal_decoupling_constants(
        Q, int(p["n_max"]), int(p["m_max"]), tau, cap=int(p.get("cap", 10**7))
    )
    return {"report.json": ("json", report.to_json())}


def _run_decouple_bound(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    if not isinstance(Q, (MarkovMeasure, IIDMeasure)):
        raise ConfigError("the closed-form bound needs an iid or Markov measure")
    tau = int(p.get("tau", 0))
    c = markov_decoupling_bound(as_markov(Q), tau)
    data = decoupling_to_theorem_data(c, tau)
    return {
        "bound.json": (
            "json",
            {
                "measure": Q.label,
                "tau": tau,
                "constant": c,
                "rho": data.rho.to_json(),
                "sigma": data.sigma.to_json(),
            },
        )
    }


def _run_steele(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    n = int(p["n"])
    r = int(p["r"])
    K = int(p["K"])
    eps = float(p["eps"])
    tau = int(p.get("tau", 0))
    horizon = n + K * r
    x = sample_trajectory(Q, horizon, int(p["seed"]), stream=int(p.get("stream", 0)))
    if "rho_const" in p and p["rho_const"] is not None:
        rho_c = float(p["rho_const"])
    elif isinstance(Q, (MarkovMeasure, IIDMeasure)):
        rho_c = max(markov_decoupling_bound(as_markov(Q), tau), 0.0)
    else:
        raise ConfigError("pass --rho-const for families without a closed-form bound")
    if p.get("limit") is not None:
        limit_value = float(p["limit"])
    elif isinstance(Q, (MarkovMeasure, IIDMeasure)):
        limit_value = -closed_form_entropy_rate(as_markov(Q))
    else:
        raise ConfigError("pass --limit for families without a closed-form rate")
    ctx = trajectory_context(
        x, Q, ErrorSchedule.constant(rho_c), GapSchedule.constant(tau),
        limit_value, r, K, eps,
    )
    d = steele_decompose(ctx, n)
    cover = verify_cover_bounds(d, ctx)
    ub = verify_ub_rep(d, ctx)
    depths = verify_depths(d, ctx)
    psi = birkhoff_bad_average(ctx, n)
    verification = {
        "cover": cover.to_json(),
        "ub_rep": ub.to_json(),
        "depths": depths.to_json(),
        "bad_birkhoff_average": psi,
        "limit_value": limit_value,
        "rho_const": rho_c,
        "tau": tau,
    }
    return {
        "decomposition.json": ("json", d.to_json()),
        "verification.json": ("json", verification),
    }


def _run_traj_check(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    tau = int(p.get("tau", 0))
    if "rho_const" in p and p["rho_const"] is not None:
        rho_c = float(p["rho_const"])
    elif isinstance(Q, (MarkovMeasure, IIDMeasure)):
        rho_c = max(markov_decoupling_bound(as_markov(Q), tau), 0.0)
    else:
        raise ConfigError("pass --rho-const for families without a closed-form bound")
    x = sample_trajectory(Q, int(p["N"]), int(p["seed"]), stream=int(p.get("stream", 0)))
    check = check_trajectory_subadditivity(
        x, Q, ErrorSchedule.constant(rho_c), GapSchedule.constant(tau),
        tol=float(p.get("tol", 1e-10)),
    )
    out = check.to_json()
    out["rho_const"] = rho_c
    out["tau"] = tau
    return {"check.json": ("json", out)}


def _run_validate_measure(p: dict) -> dict:
    Q = measure_from_spec(p["measure"])
    report = validate_measure(
        Q, n_max=int(p.get("n_max", 4)), tol=float(p.get("tol", 1e-9)),
        cap=int(p.get("cap", 10**7)),
    )
    out = report.to_json()
    out["measure"] = Q.label
    if not report.ok:
        raise _ValidationWithArtifacts(out)
    return {"validation.json": ("json", out)}


class _ValidationWithArtifacts(ValidationError):
    def __init__(self, report: dict):
        self.report = report
        problems = "; ".join(report.get("problems", []))
        super().__init__(f"measure validation failed: {problems}")


_RUNNERS = {
    "fekete.check": _run_fekete_check,
    "fekete.limit": _run_fekete_limit,
    "fekete.lift": _run_fekete_lift,
    "sample": _run_sample,
    "series": _run_series,
    "estimate.cross": lambda p: _run_estimate(p, "cross"),
    "estimate.relent": lambda p: _run_estimate(p, "relent"),
    "estimate.mean": _run_estimate_mean,
    "decouple.audit": _run_decouple_audit,
    "decouple.bound": _run_decouple_bound,
    "decouple.check": _run_traj_check,
    "steele.run": _run_steele,
    "validate.measure": _run_validate_measure,
}


def run(config: RunConfig, outdir: str | Path = ".") -> dict:
    """Execute a resolved configuration; returns the manifest object.

    Artifacts and the manifest are written atomically into outdir.
    Rerunning the same config always reproduces the same bytes.
    """
    if config.subcommand not in _RUNNERS:
        raise ConfigError(f"unknown subcommand {config.subcommand!r}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = _RUNNERS[config.subcommand](config.params)
    written = []
    for name, (kind, payload) in sorted(artifacts.items()):
        path = out / name
        if kind == "json":
            data = _json_bytes(payload)
        elif kind == "csv":
            data = _series_bytes(payload)
        else:
            data = payload.encode("utf-8") if isinstance(payload, str) else payload
        _atomic_bytes(path, data)
        written.append(name)
    manifest = {
        "tool": "gapsub",
        "version": __version__,
        "config": config.to_json(),
        "outputs": written,
    }
    _atomic_bytes(out / "manifest.json", _json_bytes(manifest))
    return manifest


# ---------------------------------------------------------------------------
# argument parsing


def _add_outdir(sp):
    sp.add_argument("--outdir", default=".", help="directory for artifacts (default .)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gapsub",
        description="Gapped subadditive limits, decoupling audits, entropy estimation.",
    )
    ap.add_argument("--version", action="version", version=f"gapsub {__version__}")
    top = ap.add_subparsers(dest="command", required=True)

    fk = top.add_parser("fekete", help="deterministic sequence tools")
    fks = fk.add_subparsers(dest="subcommand", required=True)
    for name, hlp in (
        ("check", "exhaustive gapped-subadditivity check"),
        ("limit", "limit series and finite-horizon infimum"),
        ("lift", "derive an error schedule for a plainly subadditive sequence"),
    ):
        sp = fks.add_parser(name, help=hlp)
        sp.add_argument("--spec", required=True, help="JSON file with sequence/schedules/N")
        _add_outdir(sp)

    sp = top.add_parser("sample", help="draw a seeded trajectory")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--N", required=True, type=int)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--stream", type=int, default=0)
    _add_outdir(sp)

    sp = top.add_parser("series", help="normalized log-marginal series along a path")
    sp.add_argument("--measure", required=True, help="measure evaluated along the path")
    sp.add_argument("--sample-from", help="measure the path is drawn from (default: --measure)")
    sp.add_argument("--N", required=True, type=int)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--offset", type=int, default=0)
    sp.add_argument("--grid", default="geometric")
    sp.add_argument("--assume-decoupled", action="store_true")
    _add_outdir(sp)

    dc = top.add_parser("decouple", help="decoupling audits and bounds")
    dcs = dc.add_subparsers(dest="subcommand", required=True)
    sp = dcs.add_parser("audit", help="exact minimal constants by enumeration")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--n-max", required=True, type=int)
    sp.add_argument("--m-max", required=True, type=int)
    sp.add_argument("--tau", type=int, default=0)
    sp.add_argument("--cap", type=int, default=10**7)
    _add_outdir(sp)
    sp = dcs.add_parser("bound", help="closed-form Markov constant")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--tau", type=int, default=0)
    _add_outdir(sp)
    sp = dcs.add_parser("check", help="pairwise split inequality along a sampled path")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--N", required=True, type=int)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--tau", type=int, default=0)
    sp.add_argument("--rho-const", type=float)
    sp.add_argument("--tol", type=float, default=1e-10)
    _add_outdir(sp)

    es = top.add_parser("estimate", help="entropy-rate estimators")
    ess = es.add_subparsers(dest="subcommand", required=True)
    for name, hlp in (
        ("cross", "cross entropy rate along one path"),
        ("relent", "relative entropy rate along one path"),
    ):
        sp = ess.add_parser(name, help=hlp)
        sp.add_argument("--p", required=True, help="sampling measure spec")
        sp.add_argument("--q", required=True, help="evaluated measure spec")
        sp.add_argument("--N", required=True, type=int)
        sp.add_argument("--seed", required=True, type=int)
        sp.add_argument("--offset", type=int, default=0)
        sp.add_argument("--grid", default="geometric")
        sp.add_argument("--assume-decoupled", action="store_true")
        _add_outdir(sp)
    sp = ess.add_parser("mean", help="trial-averaged series")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--N", required=True, type=int)
    sp.add_argument("--trials", required=True, type=int)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--grid", default="geometric")
    sp.add_argument("--assume-decoupled", action="store_true")
    _add_outdir(sp)

    st = top.add_parser("steele", help="interval decomposition on a sampled path")
    sts = st.add_subparsers(dest="subcommand", required=True)
    sp = sts.add_parser("run", help="decompose and verify")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--n", required=True, type=int)
    sp.add_argument("--r", required=True, type=int)
    sp.add_argument("--K", required=True, type=int)
    sp.add_argument("--eps", required=True, type=float)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--tau", type=int, default=0)
    sp.add_argument("--rho-const", type=float)
    sp.add_argument("--limit", type=float)
    _add_outdir(sp)

    sp = top.add_parser("validate", help="validate a JSON document")
    sp.add_argument("--file", required=True)
    sp.add_argument("--kind", default="auto", choices=("auto", "measure", "sequence", "schedule"))
    sp.add_argument("--semantic", action="store_true",
                    help="for measures: also run the brute-force level audit")
    sp.add_argument("--n-max", type=int, default=4)
    _add_outdir(sp)

    sp = top.add_parser("rerun", help="reproduce a previous run from its manifest")
    sp.add_argument("--manifest", required=True)
    _add_outdir(sp)
    return ap


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    if cmd == "fekete":
        spec = _load_json(args.spec)
        if not isinstance(spec, dict) or "sequence" not in spec:
            raise ConfigError("fekete spec needs a 'sequence' field")
        seq_problems = schema_validate(spec["sequence"], "sequence")
        if seq_problems:
            raise SchemaError([(_ptr("sequence") + p, m) for p, m in seq_problems])
        params = dict(spec)
        if args.subcommand in ("check", "limit") and "N" not in params:
            raise ConfigError("fekete spec needs 'N'")
        if args.subcommand == "lift" and "sigma" not in params:
            raise ConfigError("fekete lift spec needs 'sigma'")
        return RunConfig(f"fekete.{args.subcommand}", params)
    if cmd == "sample":
        return RunConfig(
            "sample",
            {
                "measure": _load_measure_spec(args.measure),
                "N": args.N,
                "seed": args.seed,
                "stream": args.stream,
            },
        )
    if cmd == "series":
        params = {
            "measure": _load_measure_spec(args.measure),
            "N": args.N,
            "seed": args.seed,
            "offset": args.offset,
            "grid": args.grid,
            "assume_decoupled": args.assume_decoupled,
        }
        if args.sample_from:
            params["sample_from"] = _load_measure_spec(args.sample_from)
        return RunConfig("series", params)
    if cmd == "decouple":
        if args.subcommand == "audit":
            return RunConfig(
                "decouple.audit",
                {
                    "measure": _load_measure_spec(args.measure),
                    "n_max": args.n_max,
                    "m_max": args.m_max,
                    "tau": args.tau,
                    "cap": args.cap,
                },
            )
        if args.subcommand == "bound":
            return RunConfig(
                "decouple.bound",
                {"measure": _load_measure_spec(args.measure), "tau": args.tau},
            )
        return RunConfig(
            "decouple.check",
            {
                "measure": _load_measure_spec(args.measure),
                "N": args.N,
                "seed": args.seed,
                "stream": args.stream,
                "tau": args.tau,
                "rho_const": args.rho_const,
                "tol": args.tol,
            },
        )
    if cmd == "estimate":
        if args.subcommand == "mean":
            return RunConfig(
                "estimate.mean",
                {
                    "p": _load_measure_spec(args.p),
                    "q": _load_measure_spec(args.q),
                    "N": args.N,
                    "trials": args.trials,
                    "seed": args.seed,
                    "grid": args.grid,
                    "assume_decoupled": args.assume_decoupled,
                },
            )
        return RunConfig(
            f"estimate.{args.subcommand}",
            {
                "p": _load_measure_spec(args.p),
                "q": _load_measure_spec(args.q),
                "N": args.N,
                "seed": args.seed,
                "offset": args.offset,
                "grid": args.grid,
                "assume_decoupled": args.assume_decoupled,
            },
        )
    if cmd == "steele":
        return RunConfig(
            "steele.run",
            {
                "measure": _load_measure_spec(args.measure),
                "n": args.n,
                "r": args.r,
                "K": args.K,
                "eps": args.eps,
                "seed": args.seed,
                "stream": args.stream,
                "tau": args.tau,
                "rho_const": args.rho_const,
                "limit": args.limit,
            },
        )
    if cmd == "validate":
        obj = _load_json(args.file)
        problems = schema_validate(obj, args.kind)
        if problems:
            raise SchemaError(problems)
        if isinstance(obj, dict) and "family" in obj and args.semantic:
            return RunConfig("validate.measure", {"measure": obj, "n_max": args.n_max})
        return RunConfig("noop", {})
    raise ConfigError(f"unknown command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "rerun":
            manifest = _load_json(args.manifest)
            if not isinstance(manifest, dict) or "config" not in manifest:
                raise ConfigError("manifest lacks a 'config' section")
            config = RunConfig.from_json(manifest["config"])
        else:
            config = _config_from_args(args)
        if config.subcommand == "noop":
            print(json.dumps({"ok": True, "kind": "schema-only"}))
            return 0
        run(config, args.outdir)
    except _ValidationWithArtifacts as exc:
        print(json.dumps(exc.report, indent=2, sort_keys=True), file=sys.stderr)
        return 3
    except SchemaError as exc:
        for ptr, msg in exc.problems:
            print(f"schema: {ptr or '/'}: {msg}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ScheduleRangeError, GapLiftError) as exc:
        print(f"validation: {exc}", file=sys.stderr)
        return 3
    except CapExceededError as exc:
        print(f"cap: {exc}", file=sys.stderr)
        return 4
    except DecouplingFailure as exc:
        print(f"decoupling: {exc}", file=sys.stderr)
        return 5
    except GapsubError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
