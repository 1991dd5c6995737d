"""Batch harness: identify, tune and evaluate a set of plants over several ratios.

Each plant yields one CSV with the columns
``omega_r, xi, kp, kr1, kr2, t_s, n_s, m_o`` and one row per ratio.  A
combined CSV and a JSON index carry the per-row status.  Output depends only
on the batch definition and the step setting.
"""

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .evalsim import TrackingConfig, evaluate
from .identify import IdentificationError, identify
from .lti import TransferFunction
from .relay import RelayConfig
from .tuner import PerformanceWarning, tune

__all__ = ["BatchSpec", "PlantEntry", "CaseResult", "PlantResult", "load_spec", "load_plant",
           "run_batch", "write_batch", "format_number", "ROW_COLUMNS"]

ROW_COLUMNS = ("omega_r", "xi", "kp", "kr1", "kr2", "t_s", "n_s", "m_o")
DEFAULT_RATIOS = (0.1, 0.3, 0.5, 0.7, 0.9)
BUILTIN_PREFIX = "builtin:"


def format_number(x) -> str:
    """Six significant digits, '.' decimal separator; NaN as ``nan``."""
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return "nan"
    return "%.6g" % x


def _data_dir():
    return resources.files("prtune") / "data"


def resolve_path(name: str, base: Optional[Path] = None):
    """Resolve a file argument; ``builtin:NAME`` selects a bundled file."""
    if name.startswith(BUILTIN_PREFIX):
        key = name[len(BUILTIN_PREFIX):]
        for cand in (_data_dir() / "plants" / f"{key}.json", _data_dir() / f"{key}.json"):
            if cand.is_file():
                return cand
        raise FileNotFoundError(f"no bundled file named {key!r}")
    p = Path(name)
    if base is not None and not p.is_absolute():
        p = base / p
    return p


def load_plant(name: str, base: Optional[Path] = None) -> TransferFunction:
    """Read a plant JSON ``{"num", "den", "delay"}``."""
    path = resolve_path(name, base)
    with path.open() as fh:
        data = json.load(fh)
    return TransferFunction.from_dict(data)


@dataclass(frozen=True)
class PlantEntry:
    name: str
    file: str


@dataclass(frozen=True)
class BatchSpec:
    """Batch definition.  Relative plant paths are resolved against ``base``."""

    plants: tuple
    ratios: tuple = DEFAULT_RATIOS
    xi: float = 0.0
    method: str = "relay"
    output: str = "batch_out"
    base: Optional[Path] = None

    def __post_init__(self):
        names = [p.name for p in self.plants]
        if len(set(names)) != len(names):
            raise ValueError("plant names must be unique")
        if any(not 0 < r < 1 for r in self.ratios):
            raise ValueError("ratios must lie in (0, 1)")
        if self.method not in ("relay", "analytic"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.xi >= 0:
            raise ValueError("xi must be >= 0")


def load_spec(name: str) -> BatchSpec:
    """Read a batch spec JSON file (or ``builtin:reference_batch``)."""
    path = resolve_path(name)
    with path.open() as fh:
        data = json.load(fh)
    try:
        plants = tuple(PlantEntry(str(p["name"]), str(p["file"])) for p in data["plants"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed batch spec: {exc}") from None
    base = Path(str(path)).parent
    return BatchSpec(plants, tuple(float(r) for r in data.get("ratios", DEFAULT_RATIOS)),
                     float(data.get("xi", 0.0)), str(data.get("method", "relay")),
                     str(data.get("output", "batch_out")), base)


@dataclass
class CaseResult:
    ratio: float
    values: dict
    status: str
    warnings: list = field(default_factory=list)

    def row(self):
        return [self.values.get(c, np.nan) for c in ROW_COLUMNS]


@dataclass
class PlantResult:
    name: str
    status: str
    point: Optional[dict]
    cases: list


def _run_plant(entry: PlantEntry, spec: BatchSpec, step: Optional[float]) -> PlantResult:
    G = load_plant(entry.file, spec.base)
    try:
        point = identify(G, spec.method, RelayConfig(h=step))
    except (IdentificationError, ValueError) as exc:
        cases = [CaseResult(r, {"xi": spec.xi}, f"identification failed: {exc}") for r in spec.ratios]
        return PlantResult(entry.name, "identification failed", None, cases)
    cases = []
    for ratio in spec.ratios:
        omega_r = ratio * point.omega_nu
        values = {"omega_r": omega_r, "xi": spec.xi}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", PerformanceWarning)
            try:
                c = tune(point, omega_r, spec.xi)
            except ValueError as exc:
                cases.append(CaseResult(ratio, values, f"tuning failed: {exc}"))
                continue
        values.update(kp=c.kp, kr1=c.kr1, kr2=c.kr2)
        rep = evaluate(G, c, TrackingConfig(omega_r=omega_r, h=step))
        values.update(t_s=rep.t_s, n_s=rep.n_s, m_o=rep.m_o)
        if not rep.stable:
            status = "unstable"
        elif not rep.converged:
            status = "unsettled"
        else:
            status = "ok"
        cases.append(CaseResult(ratio, values, status, [str(w.message) for w in caught]))
    pdict = point.to_dict()
    return PlantResult(entry.name, "ok", pdict, cases)


def run_batch(spec: BatchSpec, step: Optional[float] = None, jobs: int = 1) -> list:
    """Run every (plant, ratio) case; results keep the plant order of the batch definition."""
    if jobs > 1 and len(spec.plants) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futures = [ex.submit(_run_plant, e, spec, step) for e in spec.plants]
            return [f.result() for f in futures]
    return [_run_plant(e, spec, step) for e in spec.plants]


def _csv(rows, header):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in r))
    return "\n".join(lines) + "\n"


def write_batch(results: list, spec: BatchSpec, outdir: Path) -> dict:
    """Write per-plant CSVs, ``combined.csv`` and ``index.json``; return the index."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    index = {"ratios": list(spec.ratios), "xi": spec.xi, "method": spec.method,
             "columns": list(ROW_COLUMNS), "plants": []}
    combined = []
    for res in results:
        fname = f"{res.name}.csv"
        (outdir / fname).write_text(_csv([c.row() for c in res.cases], ROW_COLUMNS))
        index["plants"].append({
            "name": res.name, "file": fname, "status": res.status, "point": res.point,
            "rows": [{"ratio": c.ratio, "status": c.status, "warnings": c.warnings}
                     for c in res.cases]})
        for c in res.cases:
            combined.append([res.name, format_number(c.ratio)] + c.row() + [c.status])
    (outdir / "combined.csv").write_text(
        _csv(combined, ("plant", "ratio") + ROW_COLUMNS + ("status",)))
    text = json.dumps(index, indent=2, sort_keys=True, default=_json_default)
    (outdir / "index.json").write_text(text + "\n")
    return index


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
