"""Experiment configs, orchestration over seed panels, and artifact writing.

A config is a JSON object::

    {
      "schema_version": 1,
      "kind": "merge",
      "component": {"family": "war"},
      "predictor": {"kind": "war_bayes"},
      "N": 100000,
      "seeds": [1, 2, 3],
      "epsilon": 0.05,
      "tail_fraction": 0.5
    }

Each kind writes per-seed CSV files plus one ``summary.json`` into the output
directory.  Files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION, __version__
from .bayes_predictors import PREDICTOR_KINDS, build_decomposition, build_predictor
from .components import FAMILIES, PATH_STREAM, PRNG_NAME, build_component, make_rng
from .decisions import DecisionProblem, paired_run
from .empirical import block_frequencies, identify_component, max_block_gap
from .errors import ConfigError, DomainError
from .merging_lab import (
    DEFAULT_EPSILON,
    DEFAULT_RECORD_THRESHOLD,
    DEFAULT_TAIL_FRACTION,
    calibration_from_report,
    dirac_witness_experiment,
    run_merging_experiment,
)

KINDS = ("merge", "calibrate", "freq", "decide", "dirac-witness", "simulate")
THREADS_ENV = "ERGOLEARN_THREADS"

REPORT_COLUMNS = [
    "kind", "truth", "predictor", "N", "seed", "final_cesaro_mean",
    "weak", "strong", "record_count", "gap",
]


@dataclass
class ExperimentConfig:
    kind: str
    N: int
    seeds: list
    component: dict | None = None
    predictor: dict | None = None
    epsilon: float = DEFAULT_EPSILON
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    record_threshold: float = DEFAULT_RECORD_THRESHOLD
    bin_width: float = 0.1
    max_block_length: int = 3
    decomposition: dict | None = None
    problem: dict | None = None
    output: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "N": self.N,
            "seeds": list(self.seeds),
            "epsilon": self.epsilon,
            "tail_fraction": self.tail_fraction,
            "record_threshold": self.record_threshold,
        }
        for key in ("component", "predictor", "decomposition", "problem"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.kind == "calibrate":
            out["bin_width"] = self.bin_width
        if self.kind == "freq":
            out["max_block_length"] = self.max_block_length
        return out


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_component(spec, errors, field_name="component"):
    if not isinstance(spec, dict):
        errors.append((field_name, "must be an object with 'family' and 'parameters'"))
        return None
    if spec.get("family") not in FAMILIES:
        errors.append((f"{field_name}.family", f"must be one of {list(FAMILIES)}"))
        return None
    try:
        return build_component(spec, seed=0)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        errors.append((f"{field_name}.parameters", str(exc)))
        return None


def _check_predictor(spec, truth, errors, field_name="predictor"):
    if not isinstance(spec, dict):
        errors.append((field_name, "must be an object with a 'kind'"))
        return
    if spec.get("kind") not in PREDICTOR_KINDS:
        errors.append((f"{field_name}.kind", f"must be one of {list(PREDICTOR_KINDS)}"))
        return
    try:
        pred = build_predictor(spec, truth, 0 if truth is not None and truth.family == "war" else None)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        errors.append((field_name, str(exc)))
        return
    if truth is not None:
        m = len(pred.predict())
        if m != len(truth.alphabet):
            errors.append((field_name, f"predicts over {m} symbols but the component has {len(truth.alphabet)}"))


def validate_config(data) -> ExperimentConfig:
    """Check a config object; raise :class:`ConfigError` listing every bad field."""
    errors = []
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    version = data.get("schema_version")
    if version is None:
        errors.append(("schema_version", "is required"))
    elif version != SCHEMA_VERSION:
        errors.append(("schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}"))
    kind = data.get("kind")
    if kind not in KINDS:
        errors.append(("kind", f"must be one of {list(KINDS)}"))
    N = data.get("N")
    if not _is_int(N) or N < 1:
        errors.append(("N", "must be a positive integer"))
    seeds = data.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        errors.append(("seeds", "must be a nonempty list of nonnegative integers"))
    elif not all(_is_int(s) and s >= 0 for s in seeds):
        errors.append(("seeds", "every seed must be a nonnegative integer"))
    elif len(set(seeds)) != len(seeds):
        errors.append(("seeds", "seeds must be distinct"))
    eps = data.get("epsilon", DEFAULT_EPSILON)
    if not _is_real(eps) or eps <= 0:
        errors.append(("epsilon", "must be a positive number"))
    tail = data.get("tail_fraction", DEFAULT_TAIL_FRACTION)
    if not _is_real(tail) or not 0 < tail < 1:
        errors.append(("tail_fraction", "must lie strictly between 0 and 1"))
    threshold = data.get("record_threshold", DEFAULT_RECORD_THRESHOLD)
    if not _is_real(threshold) or threshold <= 0:
        errors.append(("record_threshold", "must be a positive number"))

    truth = None
    if kind in ("merge", "calibrate", "freq", "decide", "simulate"):
        if "component" not in data:
            errors.append(("component", "is required"))
        else:
            truth = _check_component(data["component"], errors)
    if kind in ("merge", "calibrate", "decide"):
        if "predictor" not in data:
            errors.append(("predictor", "is required"))
        else:
            _check_predictor(data["predictor"], truth, errors)
    if kind == "calibrate":
        w = data.get("bin_width", 0.1)
        if not _is_real(w) or not 0 < w <= 1:
            errors.append(("bin_width", "must lie in (0, 1]"))
    if kind == "freq":
        k = data.get("max_block_length", 3)
        if not _is_int(k) or not 1 <= k <= 8:
            errors.append(("max_block_length", "must be an integer between 1 and 8"))
        if "decomposition" in data:
            try:
                dec = build_decomposition(data["decomposition"])
                if truth is not None and dec.alphabet != truth.alphabet:
                    errors.append(("decomposition", "alphabet differs from the component's"))
            except (DomainError, KeyError, TypeError, ValueError) as exc:
                errors.append(("decomposition", str(exc)))
    if kind == "decide":
        prob = data.get("problem")
        if prob is None:
            errors.append(("problem", "is required"))
        else:
            try:
                p = DecisionProblem.from_dict(prob, truth.alphabet if truth is not None else None)
                if truth is not None and p.payoff.shape[0] != len(truth.alphabet):
                    errors.append(("problem.payoff", "needs one row per outcome symbol"))
            except (DomainError, KeyError, TypeError, ValueError, AttributeError) as exc:
                errors.append(("problem", str(exc)))
    if "output" in data and not isinstance(data["output"], str):
        errors.append(("output", "must be a path string"))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        kind=kind,
        N=N,
        seeds=list(seeds),
        component=data.get("component"),
        predictor=data.get("predictor"),
        epsilon=float(eps),
        tail_fraction=float(tail),
        record_threshold=float(threshold),
        bin_width=float(data.get("bin_width", 0.1)),
        max_block_length=int(data.get("max_block_length", 3)),
        decomposition=data.get("decomposition"),
        problem=data.get("problem"),
        output=data.get("output"),
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([("<root>", f"not valid JSON: {exc}")]) from None
    return validate_config(data)


# --------------------------------------------------------------------------
# Per-seed work (top-level so a process pool can pickle it)
# --------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def _merge_seed(cfg: ExperimentConfig, seed: int):
    if cfg.kind == "dirac-witness":
        rep = dirac_witness_experiment(cfg.N, seed, cfg.epsilon, cfg.tail_fraction, cfg.record_threshold)
    else:
        rep = run_merging_experiment(
            cfg.component, cfg.predictor, cfg.N, seed,
            cfg.epsilon, cfg.tail_fraction, cfg.record_threshold,
        )
    run = rep.summary()
    run["seed"] = seed
    run["trace"] = f"trace_seed{seed}.csv"
    return {run["trace"]: rep.trace_csv()}, run


def _calibrate_seed(cfg: ExperimentConfig, seed: int):
    rep = run_merging_experiment(
        cfg.component, cfg.predictor, cfg.N, seed,
        cfg.epsilon, cfg.tail_fraction, cfg.record_threshold, keep_predictions=True,
    )
    cal = calibration_from_report(rep, cfg.bin_width)
    name = f"calibration_seed{seed}.csv"
    run = {
        "seed": seed,
        "metadata": rep.metadata,
        "final_cesaro_mean": rep.final_cesaro_mean,
        "verdict": rep.verdict.as_dict(),
        "record_times": [[n, d] for n, d in rep.record_times],
        "calibration": name,
        "bins": [
            {
                "symbol": b.symbol, "low": b.low, "high": b.high, "count": b.count,
                "mean_predicted": b.mean_predicted, "empirical_frequency": b.empirical_frequency,
                "low_confidence": b.low_confidence,
            }
            for b in cal.active()
        ],
    }
    return {name: cal.to_csv()}, run


def _freq_seed(cfg: ExperimentConfig, seed: int):
    truth = build_component(cfg.component, seed=seed)
    path = truth.sampler(make_rng(seed, PATH_STREAM)).sample_path(cfg.N)
    m = len(truth.alphabet)
    files = {}
    gaps = {}
    identified = {}
    dec = build_decomposition(cfg.decomposition) if cfg.decomposition else None
    for k in range(1, cfg.max_block_length + 1):
        table = block_frequencies(path, k, m)
        name = f"freq_seed{seed}_k{k}.csv"
        files[name] = table.to_csv(truth, truth.alphabet.symbols)
        gaps[str(k)] = max_block_gap(table, truth)
        if dec is not None:
            idx, param, gap = identify_component(table, dec)
            identified[str(k)] = {"index": idx, "parameter": param, "gap": gap}
    run = {
        "seed": seed,
        "truth": truth.spec(),
        "max_gap_by_length": gaps,
        "max_gap": max(gaps.values()),
        "tables": sorted(files),
    }
    if dec is not None:
        run["identified"] = identified
    return files, run


def _decide_seed(cfg: ExperimentConfig, seed: int):
    truth_alphabet = build_component(cfg.component, seed=seed).alphabet
    problem = DecisionProblem.from_dict(cfg.problem, truth_alphabet)
    r = paired_run(problem, cfg.predictor, cfg.component, cfg.N, seed)
    return {}, {
        "seed": seed,
        "V_belief": r.payoff_belief,
        "V_oracle": r.payoff_oracle,
        "gap": r.payoff_oracle - r.payoff_belief,
        "final_cesaro_mean": r.cesaro_mean,
        "disagreements": r.disagreements,
    }


def _simulate_seed(cfg: ExperimentConfig, seed: int):
    truth = build_component(cfg.component, seed=seed)
    sampler = truth.sampler(make_rng(seed, PATH_STREAM))
    h0 = sampler.initial_hidden
    path = sampler.sample_path(cfg.N)
    symbols = truth.alphabet.symbols
    lines = ["n,symbol"] + [f"{n},{symbols[a]}" for n, a in enumerate(path.tolist())]
    name = f"path_seed{seed}.csv"
    counts = np.bincount(path, minlength=len(symbols))
    run = {
        "seed": seed,
        "truth": truth.spec(),
        "initial_hidden": h0,
        "path": name,
        "symbol_frequencies": {str(s): c / cfg.N for s, c in zip(symbols, counts.tolist())},
    }
    return {name: "\n".join(lines) + "\n"}, run


_SEED_RUNNERS = {
    "merge": _merge_seed,
    "dirac-witness": _merge_seed,
    "calibrate": _calibrate_seed,
    "freq": _freq_seed,
    "decide": _decide_seed,
    "simulate": _simulate_seed,
}


def _run_one(args):
    cfg, seed = args
    return _SEED_RUNNERS[cfg.kind](cfg, seed)


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError([(THREADS_ENV, f"must be an integer, got {raw!r}")]) from None
    if cap < 0:
        raise ConfigError([(THREADS_ENV, "must be nonnegative")])
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _aggregate(cfg: ExperimentConfig, runs: list) -> dict:
    if cfg.kind in ("merge", "dirac-witness", "calibrate"):
        means = [r["final_cesaro_mean"] for r in runs]
        return {
            "n_runs": len(runs),
            "weak_true": sum(r["verdict"]["weak"] for r in runs),
            "strong_true": sum(r["verdict"]["strong"] for r in runs),
            "median_final_cesaro_mean": float(np.median(means)),
            "max_final_cesaro_mean": max(means),
        }
    if cfg.kind == "decide":
        return {
            "V_belief": float(np.mean([r["V_belief"] for r in runs])),
            "V_oracle": float(np.mean([r["V_oracle"] for r in runs])),
            "gap": float(np.mean([r["gap"] for r in runs])),
            "mean_final_cesaro_mean": float(np.mean([r["final_cesaro_mean"] for r in runs])),
        }
    if cfg.kind == "freq":
        gaps = [r["max_gap"] for r in runs]
        return {"n_runs": len(runs), "max_gap": max(gaps), "median_max_gap": float(np.median(gaps))}
    return {"n_runs": len(runs)}


def execute(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Run every seed; return ``(files, summary)`` without touching the disk."""
    tasks = [(cfg, s) for s in cfg.seeds]
    workers = worker_count(len(tasks))
    if workers == 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks))
    files = {}
    runs = []
    for f, run in results:
        files.update(f)
        runs.append(run)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "metadata": {
            "library_version": __version__,
            "prng": PRNG_NAME,
            "numpy_version": np.__version__,
        },
        "runs": runs,
        "aggregate": _aggregate(cfg, runs),
    }
    if cfg.kind == "decide":
        problem = DecisionProblem.from_dict(cfg.problem, build_component(cfg.component, seed=0).alphabet)
        summary.update(
            problem=problem.to_dict(),
            belief=cfg.predictor,
            truth=cfg.component,
            N=cfg.N,
            seeds=list(cfg.seeds),
            V_belief=summary["aggregate"]["V_belief"],
            V_oracle=summary["aggregate"]["V_oracle"],
            gap=summary["aggregate"]["gap"],
        )
    return files, _jsonable(summary)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifacts(out_dir, files: dict, summary: dict) -> list[Path]:
    out = Path(out_dir)
    written = []
    for name in sorted(files):
        atomic_write(out / name, files[name])
        written.append(out / name)
    atomic_write(out / "summary.json", dumps_json(summary))
    written.append(out / "summary.json")
    return written


def run(cfg: ExperimentConfig, out_dir) -> list[Path]:
    files, summary = execute(cfg)
    return write_artifacts(out_dir, files, summary)


# --------------------------------------------------------------------------
# Consolidated report
# --------------------------------------------------------------------------


class SchemaMismatch(ValueError):
    pass


def _truth_label(spec) -> str:
    if not spec:
        return "dirac(fair coin)"
    params = spec.get("parameters") or {}
    inner = ",".join(f"{k}={params[k]}" for k in sorted(params) if k != "transition")
    return f"{spec.get('family')}({inner})"


def _predictor_label(spec) -> str:
    if not spec:
        return ""
    extra = {k: v for k, v in spec.items() if k not in ("kind", "components")}
    inner = ",".join(f"{k}={extra[k]}" for k in sorted(extra))
    return f"{spec.get('kind')}({inner})" if inner else str(spec.get("kind"))


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def report_rows(summaries: list[dict]) -> list[dict]:
    versions = sorted({s.get("schema_version") for s in summaries}, key=str)
    if len(versions) > 1 or (versions and versions[0] != SCHEMA_VERSION):
        raise SchemaMismatch(
            f"summaries carry schema versions {versions}; this tool reads version {SCHEMA_VERSION}"
        )
    rows = []
    for s in summaries:
        cfg = s.get("config", {})
        kind = s.get("kind")
        for r in s.get("runs", []):
            verdict = r.get("verdict", {})
            rows.append({
                "kind": kind,
                "truth": _truth_label(cfg.get("component")),
                "predictor": _predictor_label(cfg.get("predictor")),
                "N": cfg.get("N"),
                "seed": r.get("seed"),
                "final_cesaro_mean": r.get("final_cesaro_mean"),
                "weak": verdict.get("weak", ""),
                "strong": verdict.get("strong", ""),
                "record_count": len(r["record_times"]) if "record_times" in r else "",
                "gap": r.get("gap", ""),
            })
    return rows


def report_csv(summaries: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report_rows(summaries):
        writer.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def load_summaries(paths) -> list[dict]:
    out = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            out.append(json.load(fh))
    return out
