"""Experiment runner: variants x seeded runs on disk, reference fronts, reports.

Directory layout written by :func:`cmd_optimize`::

    <root>/manifest.json
    <root>/<variant>/rpf.csv
    <root>/<variant>/run_<k>/{pareto.csv, stats.csv, config.json}

A run interrupted part-way leaves its directory with a ``TRUNCATED``
marker and is flagged incomplete in the manifest.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from .model import ArchitectureModel, load_model
from .optimizer import (
    OBJECTIVES,
    Evaluator,
    Individual,
    ObjectiveVector,
    OptimizerConfig,
    ParetoFront,
    reference_front,
)
from .optimizer.nsga import NSGA2
from .antipatterns import DetectionConfig
from .refactoring import RefactoringSequence

log = logging.getLogger(__name__)

TRUNCATION_MARKER = "TRUNCATED"
REPORT_OBJECTIVES = ("perfq", "reliability", "arch_dist")
STATS = ("min", "max", "median", "mean")


class MissingRuns(Exception):
    """An experiment variant has no completed runs to summarize."""


def fmt(x) -> str:
    """Locale-independent 6-significant-digit formatting."""
    return "%.6g" % x


@dataclass
class Variant:
    name: str
    config: OptimizerConfig


@dataclass
class ExperimentSpec:
    model_path: str
    variants: list[Variant]
    output_root: str
    runs: int = 1

    def __post_init__(self):
        if not self.variants:
            raise ValueError("an experiment needs at least one variant")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variant names in {names}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict, base: OptimizerConfig | None = None) -> "ExperimentSpec":
        """Build from ``{"model", "output", "runs", "variants": [{"name", ...config}]}``."""
        base_doc = (base or OptimizerConfig()).to_dict()
        variants = []
        for v in doc["variants"]:
            v = dict(v)
            name = v.pop("name")
            variants.append(Variant(name, OptimizerConfig.from_dict({**base_doc, **v})))
        return cls(doc["model"], variants, doc.get("output", "experiment"), int(doc.get("runs", 1)))


def default_variants(base: OptimizerConfig, fuzziness=(0.55, 0.80, 0.95), with_pas=True, without_pas=True) -> list[Variant]:
    """One variant per fuzziness threshold with the PAs objective, plus one without."""
    out = []
    if with_pas:
        for f in fuzziness:
            cfg = OptimizerConfig.from_dict({**base.to_dict(), "fuzziness_threshold": f, "enable_pas_objective": True})
            out.append(Variant(f"pas-{f:.2f}", cfg))
    if without_pas:
        cfg = OptimizerConfig.from_dict({**base.to_dict(), "enable_pas_objective": False})
        out.append(Variant("no-pas", cfg))
    return out


# ---------------------------------------------------------------------------
# CSV I/O


def front_to_csv(front: ParetoFront) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*OBJECTIVES, "sequence"])
    for s in front.solutions:
        w.writerow([*(fmt(v) for v in s.objectives.as_tuple()), s.sequence.to_json()])
    return buf.getvalue()


def stats_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], int) else fmt(r[c]) for c in cols])
    return buf.getvalue()


def read_front(path: str | Path) -> ParetoFront:
    """Load a pareto.csv or rpf.csv back into a front."""
    sols = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            obj = ObjectiveVector(*(float(row[k]) for k in OBJECTIVES))
            sols.append(Individual(RefactoringSequence.from_json(row["sequence"]), obj))
    return ParetoFront(sols)


# ---------------------------------------------------------------------------
# optimize


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _run_one(model: ArchitectureModel, model_path: str, cfg: OptimizerConfig, run_dir: Path) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    marker = run_dir / TRUNCATION_MARKER
    evaluator = Evaluator(
        model,
        DetectionConfig(fuzziness_threshold=cfg.fuzziness_threshold),
        enable_pas=cfg.enable_pas_objective,
    )
    _write(run_dir / "config.json", json.dumps({**cfg.to_dict(), "model": model_path}, indent=2, sort_keys=True) + "\n")
    rows: list[dict] = []
    t0 = time.perf_counter()
    try:
        front = NSGA2(cfg, model, evaluator).run(callback=rows.append)
    except KeyboardInterrupt:
        # keep whatever the run produced so far
        _write(run_dir / "stats.csv", stats_to_csv(rows))
        _write(marker, f"interrupted after generation {len(rows) - 1}\n")
        raise
    if marker.exists():
        marker.unlink()
    _write(run_dir / "pareto.csv", front_to_csv(front))
    _write(run_dir / "stats.csv", stats_to_csv(front.stats))
    return {
        "seed": cfg.seed,
        "complete": True,
        "evaluations": evaluator.evaluations,
        "detector_calls": evaluator.detector_calls,
        "failures": evaluator.failures,
        "front_size": len(front),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }


def cmd_optimize(spec: ExperimentSpec, model: ArchitectureModel | None = None) -> dict:
    """Run every variant ``spec.runs`` times and write the experiment tree.

    Run ``k`` of a variant uses seed ``config.seed + k``.  Returns the
    manifest, which is also written to ``manifest.json``.
    """
    root = Path(spec.output_root)
    root.mkdir(parents=True, exist_ok=True)
    model = model or load_model(spec.model_path)
    manifest: dict = {"model": spec.model_path, "runs_per_variant": spec.runs, "complete": False, "variants": {}}
    t0 = time.perf_counter()

    def flush():
        runs = [r for v in manifest["variants"].values() for r in v["runs"]]
        manifest["models_evaluated"] = sum(r.get("evaluations", 0) for r in runs)
        manifest["wall_time_s"] = round(time.perf_counter() - t0, 3)
        _write(root / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    try:
        for variant in spec.variants:
            vdir = root / variant.name
            entry = manifest["variants"].setdefault(variant.name, {"config": variant.config.to_dict(), "runs": []})
            fronts = []
            for k in range(spec.runs):
                cfg = OptimizerConfig.from_dict({**variant.config.to_dict(), "seed": variant.config.seed + k, "runs": 1})
                entry["runs"].append({"run": k, "seed": cfg.seed, "complete": False})
                flush()
                log.info("variant %s run %d (seed %d)", variant.name, k, cfg.seed)
                info = _run_one(model, spec.model_path, cfg, vdir / f"run_{k}")
                entry["runs"][-1].update(info)
                fronts.append(read_front(vdir / f"run_{k}" / "pareto.csv"))
            rpf = reference_front(fronts)
            _write(vdir / "rpf.csv", front_to_csv(rpf))
            entry["rpf_size"] = len(rpf)
        manifest["complete"] = True
    finally:
        flush()
    return manifest


# ---------------------------------------------------------------------------
# reference fronts and reports


def variant_front(variant_dir: str | Path) -> ParetoFront:
    """Reference front of a variant directory, rebuilt from its complete runs.

    Raises:
        MissingRuns: no complete run exists in the directory.
    """
    vdir = Path(variant_dir)
    runs = sorted(
        p for p in vdir.glob("run_*")
        if (p / "pareto.csv").exists() and not (p / TRUNCATION_MARKER).exists()
    )
    if not runs:
        raise MissingRuns(f"no complete runs in {vdir}")
    return reference_front([read_front(p / "pareto.csv") for p in runs])


def summarize(front: ParetoFront) -> dict:
    """Solution count and min/max/median/mean of the reported objectives."""
    if not front.solutions:
        raise MissingRuns("empty front")
    row: dict = {"solutions": len(front)}
    for name in REPORT_OBJECTIVES:
        vals = [getattr(s.objectives, name) for s in front.solutions]
        row[f"{name}_min"] = min(vals)
        row[f"{name}_max"] = max(vals)
        row[f"{name}_median"] = statistics.median(vals)
        row[f"{name}_mean"] = statistics.fmean(vals)
    return row


def cmd_report(experiment_dir: str | Path) -> list[dict]:
    """One summary row per variant directory.

    Raises:
        MissingRuns: the experiment has no variants, or a variant has no
            complete runs.
    """
    root = Path(experiment_dir)
    variants = sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    if not variants:
        raise MissingRuns(f"no variants under {root}")
    return [{"variant": v.name, **summarize(variant_front(v))} for v in variants]


def report_columns() -> list[str]:
    return ["variant", "solutions"] + [f"{o}_{s}" for o in REPORT_OBJECTIVES for s in STATS]


def report_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = report_columns()
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], (str, int)) else fmt(r[c]) for c in cols])
    return buf.getvalue()


def report_text(rows: list[dict]) -> str:
    cols = report_columns()
    cells = [cols] + [[r[c] if isinstance(r[c], (str, int)) else fmt(r[c]) for c in cols] for r in rows]
    cells = [[str(c) for c in row] for row in cells]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = []
    for row in cells:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"
