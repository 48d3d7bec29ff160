"""Experiment plans, resumable runs, per-cell summaries and aggregation.

A plan expands into cells ``(circuit, scheme, palette, K)``.  Every cell
locks ``seeds`` instances, holds one out as the circuit under attack, trains
on the rest, and writes one summary row.  Cell directories are
self-contained: ``manifest.json`` holds everything needed to recompute the
row, ``DONE`` marks completion, ``ERROR`` keeps the traceback of a failed
cell.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import circuits
from .attacks.redundancy import redundancy_attack
from .attacks.sail import TrainingCorpus, sail_attack, train_sail, type_decode_attack
from .attacks.sweep import WINDOW, SweepModel, sweep_attack
from .defense import UnsailConfig, injection_stats, unsail_lock
from .features import fisher_f1, key_sequences
from .locker import PALETTES, lock
from .netcore import Netlist, read_netlist, write_keyfile, write_netlist
from .resynth import keyed_hash, resynthesize
from .simeval import corruption, fault_coverage, random_patterns_for

SCHEMES = ("rll", "fll", "sll", "unsail", "unsail-fll", "unsail-sll")
ATTACKS = ("sail", "sweep", "redundancy")

SUMMARY_COLUMNS = (
    "circuit", "scheme", "palette", "K", "seeds", "effort", "holdout", "status",
    "sail", "ml1", "ml2", "decode_delivered", "decode_nodefense", "sweep", "redundancy",
    "hd", "oer", "correct_hd", "correct_oer", "f1", "test_coverage", "fault_coverage",
    "dictionary_matched", "u_targeted", "fill_up",
)
METRICS = SUMMARY_COLUMNS[8:]


class PlanError(ValueError):
    pass


def base_scheme(scheme: str) -> str:
    return scheme.split("-", 1)[1] if scheme.startswith("unsail-") else ("rll" if scheme == "unsail" else scheme)


def is_unsail(scheme: str) -> bool:
    return scheme.startswith("unsail")


@dataclass(frozen=True)
class Cell:
    circuit: str
    scheme: str
    palette: str
    K: int

    @property
    def ident(self) -> str:
        stem = Path(self.circuit).stem if self.circuit not in circuits.CORPUS else self.circuit
        return f"{stem}__{self.scheme}__{self.palette}__K{self.K}"


@dataclass
class Group:
    circuits: list[str]
    schemes: list[str]
    palettes: list[str]
    K: list[int]


@dataclass
class ExperimentPlan:
    """Cross product of circuits, schemes, palettes and key sizes.

    ``groups`` replaces the single cross product by a union of several
    (for example small circuits at small K, large ones at large K).
    SLL is only combined with the X(N)OR palette.
    """

    circuits: list[str] = field(default_factory=list)
    schemes: list[str] = field(default_factory=lambda: ["rll", "unsail"])
    palettes: list[str] = field(default_factory=lambda: ["xnor"])
    K: list[int] = field(default_factory=lambda: [64])
    seeds: int = 20
    effort: int = 2
    attacks: list[str] = field(default_factory=lambda: list(ATTACKS))
    out: str | None = None
    seed: int = 0
    wrong_keys: int = 100
    patterns: int = 10_000
    fault_patterns: int = 2048
    cone_limit: int = 12
    sweep_train: int = 3
    sweep_window: int = WINDOW
    groups: list[Group] = field(default_factory=list)
    base_dir: str = "."

    def __post_init__(self):
        if self.seeds < 2:
            raise PlanError("seeds must be >= 2 (one instance is held out)")
        if self.effort < 0:
            raise PlanError("effort must be >= 0")
        for a in self.attacks:
            if a not in ATTACKS:
                raise PlanError(f"unknown attack {a!r}")
        for g in self._groups():
            for s in g.schemes:
                if s not in SCHEMES:
                    raise PlanError(f"unknown scheme {s!r}")
            for p in g.palettes:
                if p not in PALETTES:
                    raise PlanError(f"unknown palette {p!r}")
            for k in g.K:
                if int(k) < 1:
                    raise PlanError("K must be positive")

    def _groups(self) -> list[Group]:
        if self.groups:
            return self.groups
        return [Group(self.circuits, self.schemes, self.palettes, self.K)]

    def cells(self) -> list[Cell]:
        out: list[Cell] = []
        for g in self._groups():
            for c in g.circuits:
                for s in g.schemes:
                    for p in g.palettes:
                        if base_scheme(s) == "sll" and p != "xnor":
                            continue
                        for k in g.K:
                            cell = Cell(c, s, p, int(k))
                            if cell not in out:
                                out.append(cell)
        return out

    def instance_count(self, scheme: str | None = None) -> int:
        """Locked instances the plan generates, optionally for one scheme."""
        return self.seeds * sum(1 for c in self.cells() if scheme is None or c.scheme == scheme)

    def attacked_count(self, scheme: str | None = None) -> int:
        return sum(1 for c in self.cells() if scheme is None or c.scheme == scheme)

    def resolve(self, circuit: str) -> str:
        if circuit in circuits.CORPUS:
            return circuit
        p = Path(circuit)
        return str(p if p.is_absolute() else Path(self.base_dir) / p)

    @classmethod
    def from_toml(cls, text: str, base_dir: str = ".") -> "ExperimentPlan":
        data = tomllib.loads(text)
        body = dict(data.get("plan", {}))
        unknown = set(body) - {f.name for f in fields(cls)} - {"group"}
        if unknown:
            raise PlanError(f"unknown plan keys {sorted(unknown)}")
        groups = []
        for g in data.get("group", []):
            extra = set(g) - {"circuits", "schemes", "palettes", "K"}
            if extra:
                raise PlanError(f"unknown group keys {sorted(extra)}")
            groups.append(Group(
                list(g.get("circuits", body.get("circuits", []))),
                list(g.get("schemes", body.get("schemes", ["rll", "unsail"]))),
                list(g.get("palettes", body.get("palettes", ["xnor"]))),
                [int(k) for k in g.get("K", body.get("K", [64]))],
            ))
        if "K" in body and isinstance(body["K"], int):
            body["K"] = [body["K"]]
        return cls(**body, groups=groups, base_dir=base_dir)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        p = Path(path)
        return cls.from_toml(p.read_text(), base_dir=str(p.parent))


def cell_seed(plan_seed: int, cell: Cell) -> int:
    """Seed from the plan seed and the cell's identity, not its position."""
    text = f"{plan_seed}|{cell.circuit}|{cell.scheme}|{cell.palette}|{cell.K}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class CellSpec:
    """Everything one cell needs; serialized as its manifest."""

    circuit: str
    source: str
    scheme: str
    palette: str
    K: int
    seeds: int
    effort: int
    attacks: tuple[str, ...]
    cell_seed: int
    wrong_keys: int
    patterns: int
    fault_patterns: int
    cone_limit: int
    sweep_train: int
    sweep_window: int

    @property
    def instance_seeds(self) -> list[int]:
        return [keyed_hash(self.cell_seed, i) for i in range(self.seeds)]

    @property
    def holdout(self) -> int:
        return keyed_hash(self.cell_seed, 7) % self.seeds

    def manifest(self) -> str:
        d = asdict(self)
        d["attacks"] = list(self.attacks)
        d["instance_seeds"] = self.instance_seeds
        d["holdout"] = self.holdout
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "CellSpec":
        d = json.loads(text)
        d.pop("instance_seeds", None)
        d.pop("holdout", None)
        d["attacks"] = tuple(d["attacks"])
        return cls(**d)


def cell_spec(plan: ExperimentPlan, cell: Cell) -> CellSpec:
    return CellSpec(
        cell.circuit, plan.resolve(cell.circuit), cell.scheme, cell.palette, cell.K, plan.seeds, plan.effort,
        tuple(plan.attacks), cell_seed(plan.seed, cell), plan.wrong_keys, plan.patterns, plan.fault_patterns,
        plan.cone_limit, plan.sweep_train, plan.sweep_window,
    )


def load_circuit(source: str) -> Netlist:
    if source in circuits.CORPUS:
        return circuits.load(source)
    if not os.path.exists(source):
        raise FileNotFoundError(f"corpus file {source!r} not found")
    return read_netlist(source)


# ---------------------------------------------------------------------------
# One cell


@dataclass
class _Instance:
    locked: Netlist  # as delivered (after synthesis)
    mapping: object
    pre: dict
    post: dict
    stats: tuple[int, int, int] | None


def _make_instance(n: Netlist, spec: CellSpec, seed: int) -> _Instance:
    base = base_scheme(spec.scheme)
    if is_unsail(spec.scheme):
        rec = unsail_lock(n, UnsailConfig(spec.K, base, spec.palette, spec.effort, seed))
        return _Instance(rec.locked, rec.mapping, rec.pre_sequences, key_sequences(rec.locked), injection_stats(rec))
    rec = lock(n, base, spec.K, spec.palette, seed=seed)
    delivered = resynthesize(rec.locked, spec.effort, seed=seed)
    return _Instance(delivered, rec.mapping, key_sequences(rec.locked), key_sequences(delivered), None)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _row(values: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerow([_fmt(values.get(c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def run_cell(spec: CellSpec, cell_dir: Path) -> str:
    """Compute one cell and write its artifacts; returns the summary CSV text."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "manifest.json").write_text(spec.manifest())
    n = load_circuit(spec.source)
    inst_dir = cell_dir / "instances"
    inst_dir.mkdir(exist_ok=True)
    seeds = spec.instance_seeds
    insts = []
    for i, s in enumerate(seeds):
        inst = _make_instance(n, spec, s)
        (inst_dir / f"{i:02d}.bench").write_text(write_netlist(inst.locked))
        (inst_dir / f"{i:02d}.key").write_text(write_keyfile(inst.mapping))
        insts.append(inst)
    h = spec.holdout
    target = insts[h]
    train = [x for i, x in enumerate(insts) if i != h]
    vals: dict = {
        "circuit": spec.circuit, "scheme": spec.scheme, "palette": spec.palette, "K": spec.K,
        "seeds": spec.seeds, "effort": spec.effort, "holdout": h, "status": "ok",
    }
    att_dir = cell_dir / "attacks"
    att_dir.mkdir(exist_ok=True)
    rng_seed = spec.cell_seed & 0x7FFFFFFF

    if "sail" in spec.attacks:
        corpus = TrainingCorpus()
        for i, x in enumerate(train):
            corpus.add(str(i), x.mapping.names, x.pre, x.post)
        models = train_sail(corpus, spec.palette, seed=rng_seed)
        r = sail_attack(target.locked, models, target.mapping, true_pre=target.pre, seed=rng_seed)
        (att_dir / "sail.csv").write_text(r.to_csv(target.mapping))
        vals.update(sail=r.accuracy, ml1=r.ml1_accuracy, ml2=r.ml2_accuracy)
    vals["decode_delivered"] = type_decode_attack(target.locked, spec.palette, target.mapping, seed=rng_seed).accuracy
    plain = lock(n, base_scheme(spec.scheme), spec.K, spec.palette, seed=seeds[h])
    vals["decode_nodefense"] = type_decode_attack(plain.locked, spec.palette, plain.mapping, seed=rng_seed).accuracy

    if "sweep" in spec.attacks:
        model = SweepModel(window=spec.sweep_window, seed=rng_seed)
        model.fit([(x.locked, x.mapping) for x in train[: spec.sweep_train]])
        r = sweep_attack(model, target.locked, truth=target.mapping)
        (att_dir / "sweep.csv").write_text(r.to_csv(target.mapping))
        vals["sweep"] = r.accuracy
    if "redundancy" in spec.attacks:
        r = redundancy_attack(target.locked, target.mapping, spec.cone_limit)
        (att_dir / "redundancy.csv").write_text(r.to_csv(target.mapping))
        vals["redundancy"] = r.accuracy

    wrong = corruption(n, target.locked, target.mapping, spec.wrong_keys, spec.patterns, seed=rng_seed)
    right = corruption(n, target.locked, target.mapping, 0, spec.patterns, seed=rng_seed)
    vals.update(hd=wrong.hd, oer=wrong.oer, correct_hd=right.hd, correct_oer=right.oer)

    everything = TrainingCorpus(sub_sizes=(3,))
    for i, x in enumerate(insts):
        everything.add(str(i), x.mapping.names, x.pre, x.post)
    X, y = everything.arrays(3)
    vals["f1"] = fisher_f1(X=X, y=y) if 0 < y.sum() < len(y) else 0.0

    pats = random_patterns_for(target.locked, spec.fault_patterns, rng_seed)
    cov = fault_coverage(target.locked, pats, exhaustive_limit=16)
    vals.update(test_coverage=cov.test_coverage, fault_coverage=cov.fault_coverage)

    if is_unsail(spec.scheme):
        for j, col in enumerate(("dictionary_matched", "u_targeted", "fill_up")):
            vals[col] = sum(x.stats[j] for x in insts) / len(insts)
    text = _row(vals)
    (cell_dir / "summary.csv").write_text(text)
    return text


def _error_row(spec: CellSpec, exc: BaseException) -> str:
    return _row({
        "circuit": spec.circuit, "scheme": spec.scheme, "palette": spec.palette, "K": spec.K,
        "seeds": spec.seeds, "effort": spec.effort, "holdout": spec.holdout,
        "status": f"error:{type(exc).__name__}",
    })


def _run_one(spec: CellSpec, cell_dir: str) -> tuple[str, bool]:
    d = Path(cell_dir)
    t0 = time.perf_counter()
    for stale in ("DONE", "ERROR"):
        (d / stale).unlink(missing_ok=True)
    try:
        run_cell(spec, d)
    except Exception as exc:  # recorded, the plan goes on
        d.mkdir(parents=True, exist_ok=True)
        (d / "manifest.json").write_text(spec.manifest())
        (d / "summary.csv").write_text(_error_row(spec, exc))
        (d / "ERROR").write_text(traceback.format_exc())
        return cell_dir, False
    (d / "timing.txt").write_text(f"{time.perf_counter() - t0:.1f}\n")
    (d / "DONE").write_text("")
    return cell_dir, True


@dataclass
class RunResult:
    out: Path
    completed: list[str]
    skipped: list[str]
    failed: list[str]


def run_plan(plan: ExperimentPlan, out=None, workers: int = 1, retry_failed: bool = False) -> RunResult:
    """Run every cell not already marked DONE.

    Failed cells are recorded and re-run on the next call only with
    ``retry_failed``.
    """
    out = Path(out or plan.out or "runs/default")
    cells = plan.cells()
    if not cells:
        raise PlanError("plan has no cells")
    for c in cells:
        src = plan.resolve(c.circuit)
        if src not in circuits.CORPUS and not os.path.exists(src):
            raise FileNotFoundError(f"corpus file {src!r} not found")
    (out / "cells").mkdir(parents=True, exist_ok=True)
    todo, skipped = [], []
    for c in cells:
        d = out / "cells" / c.ident
        if (d / "DONE").exists() or ((d / "ERROR").exists() and not retry_failed):
            skipped.append(c.ident)
        else:
            todo.append((cell_spec(plan, c), str(d)))
    results: list[tuple[str, bool]] = []
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_one, s, d) for s, d in todo]
            results = [f.result() for f in futs]
    else:
        results = [_run_one(s, d) for s, d in todo]
    _write_summary(out, [out / "cells" / c.ident for c in cells])
    return RunResult(
        out,
        [Path(d).name for d, ok in results if ok],
        skipped,
        [Path(d).name for d, ok in results if not ok],
    )


def _write_summary(out: Path, cell_dirs: Iterable[Path]) -> None:
    lines = [",".join(SUMMARY_COLUMNS) + "\n"]
    for d in cell_dirs:
        p = d / "summary.csv"
        if p.exists():
            lines.extend(p.read_text().splitlines(keepends=True)[1:])
    (out / "summary.csv").write_text("".join(lines))


def replay(manifest_path, out_dir) -> str:
    """Recompute a cell from its manifest alone; returns the summary CSV text."""
    spec = CellSpec.from_manifest(Path(manifest_path).read_text())
    return run_cell(spec, Path(out_dir))


# ---------------------------------------------------------------------------
# Aggregation


def read_rows(run_dir) -> list[dict]:
    rows = []
    for p in sorted(Path(run_dir).glob("cells/*/summary.csv")):
        rows.extend(csv.DictReader(io.StringIO(p.read_text())))
    return rows


def _num(v: str) -> float | None:
    return float(v) if v not in ("", None) else None


def _mean(vs: Sequence[float | None]) -> float | None:
    vs = [v for v in vs if v is not None]
    return sum(vs) / len(vs) if vs else None


AGG_COLUMNS = ("level", "circuit", "scheme", "palette", "K", "cells") + METRICS


@dataclass
class Summary:
    cells: list[dict]
    palettes: list[dict]
    deltas: list[dict]
    failed: list[dict]

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGG_COLUMNS)
        for r in self.cells + self.palettes + self.deltas:
            w.writerow([_fmt(r.get(c)) for c in AGG_COLUMNS])
        return buf.getvalue()

    def table(self, metrics: Sequence[str] = ("sail", "ml1", "sweep", "redundancy", "oer", "f1")) -> str:
        head = f"{'level':<10}{'circuit':<12}{'scheme':<12}{'palette':<8}{'K':>5}" + "".join(f"{m:>12}" for m in metrics)
        lines = [head, "-" * len(head)]
        for r in self.cells + self.palettes + self.deltas:
            vals = []
            for m in metrics:
                v = r.get(m)
                if v is None:
                    vals.append(f"{'-':>12}")
                elif r["level"] == "delta_pp":
                    vals.append(f"{v:>+12.1f}")
                else:
                    vals.append(f"{v:>12.3f}")
            lines.append(f"{r['level']:<10}{r['circuit']:<12}{r['scheme']:<12}{r['palette']:<8}{r['K']!s:>5}" + "".join(vals))
        if self.failed:
            lines.append(f"failed cells: {len(self.failed)}")
        return "\n".join(lines) + "\n"


def summarize(run_dir, write: bool = True) -> Summary:
    """Per-cell values, per-palette means and UNSAIL-minus-RLL deltas in pp."""
    rows = read_rows(run_dir)
    if not rows:
        raise ValueError(f"no cell summaries under {run_dir}")
    ok = [r for r in rows if r["status"] == "ok"]
    failed = [r for r in rows if r["status"] != "ok"]
    cells = []
    for r in ok:
        d = {"level": "cell", "circuit": r["circuit"], "scheme": r["scheme"], "palette": r["palette"],
             "K": int(r["K"]), "cells": 1}
        d.update({m: _num(r[m]) for m in METRICS})
        cells.append(d)
    palettes = []
    for key in sorted({(c["scheme"], c["palette"]) for c in cells}):
        group = [c for c in cells if (c["scheme"], c["palette"]) == key]
        d = {"level": "palette", "circuit": "*", "scheme": key[0], "palette": key[1], "K": "*", "cells": len(group)}
        d.update({m: _mean([c[m] for c in group]) for m in METRICS})
        palettes.append(d)
    deltas = []
    by = {(c["circuit"], c["scheme"], c["palette"], c["K"]): c for c in cells}
    for (circ, scheme, pal, K), c in sorted(by.items(), key=lambda kv: str(kv[0])):
        if not is_unsail(scheme):
            continue
        ref = by.get((circ, base_scheme(scheme), pal, K))
        if ref is None:
            continue
        d = {"level": "delta_pp", "circuit": circ, "scheme": scheme, "palette": pal, "K": K, "cells": 2}
        for m in METRICS:
            a, b = c[m], ref[m]
            d[m] = None if a is None or b is None else 100.0 * (a - b)
        deltas.append(d)
    s = Summary(cells, palettes, deltas, failed)
    if write:
        Path(run_dir, "aggregate.csv").write_text(s.csv())
        Path(run_dir, "summary.txt").write_text(s.table())
    return s
