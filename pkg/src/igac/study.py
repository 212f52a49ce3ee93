"""Refinement studies: solve a built-in problem on ``k = 0..k_max`` and tabulate norms."""
from __future__ import annotations

import configparser
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field as dc_field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .collocation import POINT_SCHEMES, solve_problem
from .consistency import (
    SamplingSpec,
    SplineSpaceDescriptor,
    _LatticeOperator,
    _sample,
    boundedness_verdict,
    check_bounds,
    estimate_norm_D,
    estimate_norm_I,
    sampling_lattice,
)
from .errors import ContractError, SingularSystemError
from .problems import BUILTIN_PROBLEMS, builtin_problem

__all__ = [
    "StudyConfig",
    "ConvergenceRecord",
    "StudyResult",
    "CSV_COLUMNS",
    "run_study",
    "emit_csv",
    "format_csv",
    "load_config",
    "observed_orders",
]

CSV_COLUMNS = (
    "k",
    "rho",
    "ln_rho",
    "norm_Tr",
    "norm_DTr",
    "ratio",
    "err_Tr",
    "err_DTr",
    "observed_order",
    "cond_est",
    "wall_ms",
)


@dataclass(frozen=True)
class StudyConfig:
    """Settings of one refinement study.

    ``samples=None`` picks 32 samples per knot interval, or 8 for
    three-dimensional problems where a 32-sample lattice would be very large.
    """

    problem: str
    k_max: int = 7
    samples: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    bounds: bool = False
    norms: bool = False
    scheme: str = "greville"
    timing: bool = False

    def __post_init__(self):
        if self.problem not in BUILTIN_PROBLEMS:
            raise ContractError(f"unknown problem {self.problem!r}; choose from {', '.join(BUILTIN_PROBLEMS)}")
        if int(self.k_max) != self.k_max or self.k_max < 3:
            raise ContractError("k_max must be an integer >= 3 (the boundedness test needs 4 levels)")
        if self.samples is not None and (int(self.samples) != self.samples or self.samples < 4):
            raise ContractError("samples must be an integer >= 4")
        if self.scheme not in POINT_SCHEMES:
            raise ContractError(f"unknown collocation scheme {self.scheme!r}")

    def sampling(self, dim: int) -> SamplingSpec:
        samples = self.samples if self.samples is not None else (8 if dim >= 3 else 32)
        return SamplingSpec(samples, self.seed)


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}
_INT_KEYS = {"k_max", "kmax", "samples", "seed"}
_BOOL_KEYS = {"bounds", "norms", "timing"}


def load_config(path) -> dict:
    """Read ``key = value`` settings from the ``[study]`` section of an INI file.

    Only the keys present are returned, so command-line flags can override
    them.  ``kmax`` is accepted as an alias of ``k_max``.
    """
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("study"):
        raise ContractError(f"{path}: missing [study] section")
    known = {f.name for f in fields(StudyConfig)} | {"kmax"}
    out = {}
    for key, raw in parser.items("study"):
        if key not in known:
            raise ContractError(f"{path}: unknown key {key!r}")
        value = raw.strip()
        if key in _INT_KEYS:
            try:
                value = int(value)
            except ValueError:
                raise ContractError(f"{path}: {key} must be an integer") from None
        elif key in _BOOL_KEYS:
            if value.lower() not in _BOOL:
                raise ContractError(f"{path}: {key} must be a boolean")
            value = _BOOL[value.lower()]
        out["k_max" if key == "kmax" else key] = value
    return out


@dataclass(frozen=True)
class ConvergenceRecord:
    """Sampled norms and errors of one refinement level."""

    k: int
    rho: float
    ln_rho: float
    norm_Tr: float
    norm_DTr: float
    ratio: float
    err_Tr: float
    err_DTr: float
    observed_order: float
    cond_est: float
    wall_ms: float


@dataclass
class StudyResult:
    config: StudyConfig
    records: list
    verdict: str
    report: dict
    bounds: list = dc_field(default_factory=list)
    norms: list = dc_field(default_factory=list)


def observed_orders(rhos, errors) -> list:
    """``log(e_{k-1} / e_k) / log(rho_{k-1} / rho_k)``; ``nan`` for the first level.

    This equals the base-2 log of the error ratio when ``rho`` halves between levels.
    """
    out = [math.nan]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 > 0 and e1 > 0 and rhos[i - 1] != rhos[i]:
            out.append(math.log(e0 / e1) / math.log(rhos[i - 1] / rhos[i]))
        else:
            out.append(math.nan)
    return out


def _level(problem, k, spec, scheme):
    t0 = time.perf_counter()
    try:
        sol, disc, _ = solve_problem(problem, k, scheme=scheme)
    except SingularSystemError as exc:
        raise SingularSystemError(f"level k={k}: {exc}") from exc
    pts = sampling_lattice(disc.grid, spec)
    tr = _sample(sol.field, pts)
    dtr = _LatticeOperator(problem.operator, disc.grid, disc.trial.weights, disc.geometry, pts).apply(
        sol.field.coefficients
    )
    x = disc.geometry(pts)
    nT, nD = float(np.abs(tr).max()), float(np.abs(dtr).max())
    row = dict(
        k=k,
        rho=disc.rho,
        ln_rho=math.log(disc.rho),
        norm_Tr=nT,
        norm_DTr=nD,
        ratio=nD / nT if nT > 0 else math.inf,
        err_Tr=float(np.abs(tr - problem.exact(x)).max()),
        err_DTr=float(np.abs(dtr - problem.source(x)).max()),
        cond_est=sol.cond_est,
    )
    return row, (time.perf_counter() - t0) * 1e3, disc


def run_study(config: StudyConfig) -> StudyResult:
    """Solve every level ``k = 0..k_max``, then run the optional estimators and the boundedness test.

    Outputs go to ``config.out`` when set: ``convergence.csv``,
    ``verdict.json`` and, when enabled, ``bounds.json`` and ``norms.csv``.
    Every file is written atomically.

    Raises
    ------
    SingularSystemError
        Tagged with the level at which the collocation system is singular.
    """
    problem = builtin_problem(config.problem)
    spec = config.sampling(problem.dim)
    rows, times, discs = [], [], []
    for k in range(config.k_max + 1):
        row, ms, disc = _level(problem, k, spec, config.scheme)
        rows.append(row)
        times.append(ms)
        discs.append(disc)
    orders = observed_orders([r["rho"] for r in rows], [r["err_DTr"] for r in rows])
    records = [ConvergenceRecord(observed_order=o, wall_ms=ms, **r) for r, o, ms in zip(rows, orders, times)]
    verdict, report = boundedness_verdict(records)

    norms = []
    if config.norms:
        for disc in discs:
            space = SplineSpaceDescriptor.from_discretization(disc, problem.operator)
            norms.append(
                {
                    "k": disc.k,
                    "norm_D": estimate_norm_D(space, spec),
                    "norm_I": estimate_norm_I(problem, disc, spec, scheme=config.scheme),
                    "norm_I_lebesgue": estimate_norm_I(problem, disc, spec, scheme=config.scheme, method="lebesgue"),
                }
            )
    bounds = check_bounds(problem, range(config.k_max + 1), spec, scheme=config.scheme) if config.bounds else []
    result = StudyResult(config, records, verdict, report, bounds, norms)
    if config.out:
        write_outputs(result)
    return result


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".15g")


def format_csv(records, timing: bool = False) -> str:
    """CSV text: header plus one row per record, 15 significant digits.

    ``wall_ms`` is written as ``nan`` unless ``timing`` is set, so that runs
    with the same configuration are byte-identical.
    """
    if not records:
        raise ContractError("no records to write")
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        d = asdict(r)
        if not timing:
            d["wall_ms"] = math.nan
        lines.append(",".join(_fmt(d[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(records, path, timing: bool = False) -> Path:
    """Write :func:`format_csv` output to ``path`` atomically."""
    text = format_csv(records, timing)
    _atomic_write(Path(path), text)
    return Path(path)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_outputs(result: StudyResult) -> None:
    out = Path(result.config.out)
    emit_csv(result.records, out / "convergence.csv", result.config.timing)
    summary = {"problem": result.config.problem, "k_max": result.config.k_max, **result.report}
    _atomic_write(out / "verdict.json", json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    if result.bounds:
        text = json.dumps(_json_safe([b.to_dict() for b in result.bounds]), indent=2, sort_keys=True)
        _atomic_write(out / "bounds.json", text + "\n")
    if result.norms:
        cols = ("k", "norm_D", "norm_I", "norm_I_lebesgue")
        lines = [",".join(cols)] + [",".join(_fmt(n[c]) for c in cols) for n in result.norms]
        _atomic_write(out / "norms.csv", "\n".join(lines) + "\n")
