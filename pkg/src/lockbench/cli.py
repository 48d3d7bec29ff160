"""Command-line entry point (``lockbench``)."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .netcore import parse_keyfile, read_netlist, write_keyfile, write_netlist

PALETTE_NAMES = ["xnor", "cl_v1", "cl_v2", "cl_v3", "cl_v4"]


def _write(path: str, text: str) -> None:
    if path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


@click.group()
@click.version_option(__version__, prog_name="lockbench")
def main():
    """Lock, resynthesize, defend and attack gate-level netlists."""


@main.command("lock")
@click.option("-i", "--input", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "dst", required=True)
@click.option("--scheme", type=click.Choice(["rll", "fll", "sll"]), default="rll", show_default=True)
@click.option("--palette", type=click.Choice(PALETTE_NAMES), default="xnor", show_default=True)
@click.option("-K", "K", type=int, required=True, help="Number of key-gates.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--key-out", required=True)
def lock_cmd(src, dst, scheme, palette, K, seed, key_out):
    """Insert K key-gates with a classic scheme."""
    from .locker import lock

    rec = lock(read_netlist(src), scheme, K, palette, seed=seed)
    _write(dst, write_netlist(rec.locked))
    _write(key_out, write_keyfile(rec.mapping))


@main.command("resynth")
@click.option("-i", "--input", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "dst", required=True)
@click.option("--effort", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def resynth_cmd(src, dst, effort, seed):
    """Rewrite a netlist into an equivalent, structurally different one."""
    from .resynth import resynthesize

    _write(dst, write_netlist(resynthesize(read_netlist(src), effort, seed=seed)))


@main.command("report")
@click.option("-i", "--input", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--header/--no-header", default=True, show_default=True)
def report_cmd(src, header):
    """Print gate counts per type, total, depth and literals as CSV."""
    from .resynth import SynthReport, report

    r = report(read_netlist(src))
    if header:
        click.echo(SynthReport.header())
    click.echo(r.csv_row())


@main.command("unsail")
@click.option("-i", "--input", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "dst", required=True)
@click.option("-K", "K", type=int, required=True, help="Total key size (even).")
@click.option("--scheme", type=click.Choice(["rll", "fll", "sll"]), default="rll", show_default=True)
@click.option("--palette", type=click.Choice(PALETTE_NAMES), default="xnor", show_default=True)
@click.option("--effort", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--key-out", required=True)
@click.option("--stats-out", default=None, help="Append an injection-statistics CSV row here.")
def unsail_cmd(src, dst, K, scheme, palette, effort, seed, key_out, stats_out):
    """Lock half the key, synthesize, then insert the other half as decoys."""
    from .defense import STATS_HEADER, UnsailConfig, stats_row, unsail_lock

    cfg = UnsailConfig(K, scheme, palette, effort, seed)
    try:
        rec = unsail_lock(read_netlist(src), cfg)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    _write(dst, write_netlist(rec.locked))
    _write(key_out, write_keyfile(rec.mapping))
    if stats_out:
        p = Path(stats_out)
        fresh = not p.exists() or p.stat().st_size == 0
        with p.open("a") as f:
            if fresh:
                f.write(STATS_HEADER + "\n")
            f.write(stats_row(Path(src).stem, cfg, rec) + "\n")


def _train_pairs(train_dir: Path):
    """(delivered, pre-synthesis or None, key) triples from a corpus directory."""
    out = []
    for b in sorted(train_dir.glob("*.bench")):
        if b.name.endswith(".pre.bench"):
            continue
        key = b.with_suffix(".key")
        if not key.exists():
            raise click.ClickException(f"{b} has no matching {key.name}")
        pre = b.with_name(b.stem + ".pre.bench")
        out.append((read_netlist(b), read_netlist(pre) if pre.exists() else None, parse_keyfile(key.read_text())))
    if not out:
        raise click.ClickException(f"no *.bench files in {train_dir}")
    return out


@main.command("attack")
@click.argument("kind", type=click.Choice(["sail", "sweep", "redundancy"]))
@click.option("--target", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Training instances NAME.bench + NAME.key (SAIL also needs NAME.pre.bench). "
                   "Without it, training locks are made by relocking the target.")
@click.option("--palette", type=click.Choice(PALETTE_NAMES), default="xnor", show_default=True)
@click.option("--scheme", type=click.Choice(["rll", "fll", "sll"]), default="rll", show_default=True,
              help="Scheme used to relock the target for training data.")
@click.option("--instances", type=int, default=None, help="Relocked training instances (sail 19, sweep 3).")
@click.option("--effort", type=int, default=2, show_default=True)
@click.option("--margin", type=float, default=0.0, show_default=True)
@click.option("--cone-limit", type=int, default=12, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", required=True)
def attack_cmd(kind, target, truth, train_dir, palette, scheme, instances, effort, margin, cone_limit, seed, report_path):
    """Run one oracle-less attack and write a per-key report CSV."""
    from .attacks.redundancy import redundancy_attack
    from .attacks.sail import TrainingCorpus, gen_training_data, sail_attack, train_sail
    from .attacks.sweep import sweep_attack
    from .features import key_sequences
    from .locker import lock
    from .resynth import keyed_hash, resynthesize

    tgt = read_netlist(target)
    mapping = parse_keyfile(Path(truth).read_text())
    K = len(tgt.key_names)
    if kind == "redundancy":
        rep = redundancy_attack(tgt, mapping, cone_limit)
    elif kind == "sail":
        if train_dir:
            corpus = TrainingCorpus()
            for i, (post_n, pre_n, m) in enumerate(_train_pairs(Path(train_dir))):
                if pre_n is None:
                    raise click.ClickException("SAIL training needs NAME.pre.bench next to every NAME.bench")
                corpus.add(str(i), m.names, key_sequences(pre_n), key_sequences(post_n))
        else:
            corpus = gen_training_data(tgt, scheme, palette, instances or 19, K, effort=effort, seed=seed)
        rep = sail_attack(tgt, train_sail(corpus, palette, seed=seed), mapping, seed=seed)
    else:
        if train_dir:
            locks = [(post_n, m) for post_n, _, m in _train_pairs(Path(train_dir))]
        else:
            locks = []
            for i in range(instances or 3):
                s = keyed_hash(seed, i)
                rec = lock(tgt, scheme, K, palette, seed=s)
                locks.append((resynthesize(rec.locked, effort, seed=s), rec.mapping))
        rep = sweep_attack(locks, tgt, margin=margin, truth=mapping, seed=seed)
    _write(report_path, rep.to_csv(mapping))
    click.echo(f"{kind} accuracy {rep.accuracy:.4f} ({rep.abstentions()} abstained of {K})", err=True)


@main.command("run")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Run directory (defaults to the plan's 'out').")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--retry-failed", is_flag=True, help="Re-run cells that previously failed.")
def run_cmd(plan_path, out, workers, retry_failed):
    """Execute (or resume) an experiment plan."""
    from .harness import ExperimentPlan, run_plan, summarize

    plan = ExperimentPlan.load(plan_path)
    res = run_plan(plan, out, workers=workers, retry_failed=retry_failed)
    click.echo(f"{len(res.completed)} cells run, {len(res.skipped)} already done, {len(res.failed)} failed", err=True)
    for c in res.failed:
        click.echo(f"failed: {c} (see {res.out / 'cells' / c / 'ERROR'})", err=True)
    try:
        click.echo(summarize(res.out).table(), nl=False)
    except ValueError:
        pass
    if res.failed:
        sys.exit(1)


@main.command("summarize")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def summarize_cmd(run_dir):
    """Aggregate a run directory into aggregate.csv and a text table."""
    from .harness import summarize

    try:
        s = summarize(run_dir)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(s.table(), nl=False)


@main.command("replay")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, help="Directory for the recomputed cell.")
def replay_cmd(manifest, out):
    """Recompute one cell from its manifest and print its summary row."""
    from .harness import replay

    click.echo(replay(manifest, out), nl=False)


if __name__ == "__main__":
    main()
