"""Command-line entry point: gen / distill / eval / crossarch / plot.

Experiments are driven by a JSON config file with one block per stage
(flags override scalar fields); every command writes the resolved
manifest into the output directory for provenance and refuses to
overwrite existing outputs unless --force is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .dataio import (
    LabeledSignalSet,
    SyntheticSet,
    load_sigds,
    save_sigds,
    split_train_test,
    take_per_class,
)
from .distill import DistillConfig, dm_distill, mdm_distill
from .errors import ParseError, TrainingDiverged, ValidationError
from .evaluation import EvalConfig, EvalResult, cross_arch_matrix, evaluate
from .siggen import GenConfig, generate_dataset, get_scheme
from .sigplot import record_rows, render_figure

METHODS = ("random", "dm", "mdm")


@dataclass(frozen=True)
class ExperimentManifest:
    out_dir: Path
    method: str
    gen: GenConfig
    test_fraction: float
    distill: DistillConfig
    eval: EvalConfig
    distill_archs: tuple[str, ...]
    eval_archs: tuple[str, ...]


def _block(raw: dict, name: str) -> dict:
    block = raw.get(name, {})
    if not isinstance(block, dict):
        raise ParseError(f"config block {name!r} must be an object")
    return dict(block)


def _build(cls, kwargs: dict, block_name: str):
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ParseError(f"config block {block_name!r}: {exc}") from exc


def parse_manifest(path, overrides: dict | None = None) -> ExperimentManifest:
    """Load and validate a JSON experiment config, applying flag overrides."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be an object")
    overrides = overrides or {}

    gen_kwargs = _block(raw, "generation")
    test_fraction = float(gen_kwargs.pop("test_fraction", 0.2))
    if "schemes" in gen_kwargs:
        gen_kwargs["schemes"] = tuple(get_scheme(name) for name in gen_kwargs["schemes"])
    distill_kwargs = _block(raw, "distill")
    eval_kwargs = _block(raw, "eval")
    crossarch = _block(raw, "crossarch")
    distill_archs = tuple(crossarch.pop("distill_archs", ("cnn2",)))
    eval_archs = tuple(crossarch.pop("eval_archs", ("cnn2", "resnet1d-lite", "vgg-lite")))
    if crossarch:
        raise ParseError(f"config block 'crossarch': unknown keys {sorted(crossarch)}")

    method = overrides.get("method") or raw.get("method", "mdm")
    if method not in METHODS:
        raise ParseError(f"method must be one of {METHODS}, got {method!r}")
    out_dir = Path(overrides.get("out") or raw.get("out_dir", "runs/experiment"))

    if overrides.get("seed") is not None:
        seed = int(overrides["seed"])
        gen_kwargs["seed"] = seed
        distill_kwargs["seed"] = seed
        eval_kwargs["seed"] = seed
    for key in ("alpha", "spc", "iterations", "lr"):
        if overrides.get(key) is not None:
            distill_kwargs[key] = overrides[key]
    if overrides.get("arch") is not None:
        eval_kwargs["arch"] = overrides["arch"]

    if method == "dm":
        distill_kwargs["alpha"] = 0.0

    return ExperimentManifest(
        out_dir=out_dir,
        method=method,
        gen=_build(GenConfig, gen_kwargs, "generation"),
        test_fraction=test_fraction,
        distill=_build(DistillConfig, distill_kwargs, "distill"),
        eval=_build(EvalConfig, eval_kwargs, "eval"),
        distill_archs=distill_archs,
        eval_archs=eval_archs,
    )


def manifest_to_dict(man: ExperimentManifest) -> dict:
    gen = asdict(man.gen)
    gen["schemes"] = [s.name for s in man.gen.schemes]
    gen["test_fraction"] = man.test_fraction
    return {
        "out_dir": str(man.out_dir),
        "method": man.method,
        "generation": gen,
        "distill": asdict(man.distill),
        "eval": asdict(man.eval),
        "crossarch": {
            "distill_archs": list(man.distill_archs),
            "eval_archs": list(man.eval_archs),
        },
    }


def _write_manifest_copy(man: ExperimentManifest) -> None:
    man.out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(manifest_to_dict(man), indent=2, sort_keys=True) + "\n"
    (man.out_dir / "manifest.json").write_text(payload, encoding="utf-8")


def _guard_outputs(paths: list[Path], force: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not force:
        raise ValidationError(
            f"outputs already exist: {', '.join(existing)} (use --force to overwrite)"
        )


def _require_file(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ValidationError(f"missing {path}; {hint}")
    return path


def _synth_path(man: ExperimentManifest, method: str) -> Path:
    return man.out_dir / f"synth_{method}_{man.distill.spc}.sigds"


def cmd_gen(man: ExperimentManifest, force: bool) -> None:
    train_path = man.out_dir / "train.sigds"
    test_path = man.out_dir / "test.sigds"
    _write_manifest_copy(man)
    _guard_outputs([train_path, test_path], force)
    full = generate_dataset(man.gen)
    train, test = split_train_test(full, man.test_fraction, seed=man.gen.seed)
    save_sigds(train, train_path)
    save_sigds(test, test_path)
    print(f"wrote {train_path} ({len(train)} records) and {test_path} ({len(test)} records)")


def cmd_distill(man: ExperimentManifest, force: bool) -> None:
    train_path = _require_file(man.out_dir / "train.sigds", "run `sigdistill gen` first")
    synth_path = _synth_path(man, man.method)
    loss_path = man.out_dir / "loss.csv"
    _write_manifest_copy(man)
    _guard_outputs([synth_path, loss_path], force)
    train = load_sigds(train_path)

    if man.method == "random":
        synth = take_per_class(train, man.distill.spc, man.distill.seed)
        loss_path.write_bytes(b"")
    else:
        runner = dm_distill if man.method == "dm" else mdm_distill
        with open(loss_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("iter,l_td,l_fd,l_total\n")
            sink = lambda r: fh.write(f"{r.iteration},{r.l_td!r},{r.l_fd!r},{r.l_total!r}\n")
            synth, _ = runner(train, man.distill, progress_sink=sink)
    save_sigds(synth.base, synth_path)
    print(f"wrote {synth_path} ({len(synth)} records) and {loss_path}")


def _format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)


def _result_cells(result: EvalResult) -> list[str]:
    return [
        f"{result.mean_accuracy:.2f}",
        f"{result.std_accuracy:.2f}",
    ]


def cmd_eval(man: ExperimentManifest, force: bool) -> None:
    test_path = _require_file(man.out_dir / "test.sigds", "run `sigdistill gen` first")
    _require_file(_synth_path(man, man.method), "run `sigdistill distill` first")
    csv_path = man.out_dir / f"eval_{man.eval.arch}_{man.distill.spc}.csv"
    _write_manifest_copy(man)
    _guard_outputs([csv_path], force)
    test = load_sigds(test_path)

    available = [m for m in METHODS if _synth_path(man, m).exists()]
    results: list[tuple[str, EvalResult]] = []
    for method in available:
        base = load_sigds(_synth_path(man, method))
        synth = SyntheticSet(base=base, spc=man.distill.spc)
        results.append((method, evaluate(synth, test, man.eval)))

    n_runs = man.eval.n_runs
    lines = [
        "method,arch,spc,n_runs,mean_accuracy,std_accuracy,"
        + ",".join(f"run{i}" for i in range(n_runs))
    ]
    for method, res in results:
        lines.append(
            f"{method},{man.eval.arch},{man.distill.spc},{n_runs},"
            f"{res.mean_accuracy!r},{res.std_accuracy!r},"
            + ",".join(repr(a) for a in res.per_run)
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    table = _format_table(
        ["method", "mean_acc(%)", "std(%)"],
        [[m, *(_result_cells(r))] for m, r in results],
    )
    print(table)
    print(f"wrote {csv_path}")


def cmd_crossarch(man: ExperimentManifest, force: bool) -> None:
    train_path = _require_file(man.out_dir / "train.sigds", "run `sigdistill gen` first")
    test_path = _require_file(man.out_dir / "test.sigds", "run `sigdistill gen` first")
    csv_paths = [man.out_dir / f"crossarch_{c}.csv" for c in man.distill_archs]
    _write_manifest_copy(man)
    _guard_outputs(csv_paths, force)
    train = load_sigds(train_path)
    test = load_sigds(test_path)

    matrix = cross_arch_matrix(
        train, test, list(man.distill_archs), list(man.eval_archs), man.distill, man.eval
    )
    n_runs = man.eval.n_runs
    for source, row, csv_path in zip(man.distill_archs, matrix, csv_paths):
        lines = [
            "distill_arch,eval_arch,mean_accuracy,std_accuracy,"
            + ",".join(f"run{i}" for i in range(n_runs))
        ]
        for target, res in zip(man.eval_archs, row):
            lines.append(
                f"{source},{target},{res.mean_accuracy!r},{res.std_accuracy!r},"
                + ",".join(repr(a) for a in res.per_run)
            )
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        table = _format_table(
            ["eval_arch", "mean_acc(%)", "std(%)"],
            [[t, *(_result_cells(r))] for t, r in zip(man.eval_archs, row)],
        )
        print(f"distilled with {source}:")
        print(table)
        print(f"wrote {csv_path}")


def _class_records(sigset: LabeledSignalSet, class_name: str, count: int):
    if class_name not in sigset.class_names:
        raise ValidationError(
            f"unknown class {class_name!r}; available: {list(sigset.class_names)}"
        )
    label = sigset.class_names.index(class_name)
    records = [r for r in sigset.records if r.label == label]
    return records[:count]


def cmd_plot(
    dataset_path: Path, class_name: str, out_path: Path, compare: Path | None, records: int
) -> None:
    sigset = load_sigds(_require_file(dataset_path, "dataset file not found"))
    rows = record_rows("real", _class_records(sigset, class_name, records))
    title = f"{class_name}: time and frequency domains"
    if compare is not None:
        other = load_sigds(_require_file(compare, "comparison file not found"))
        rows += record_rows("synth", _class_records(other, class_name, records))
        title = f"{class_name}: real (top) vs synthetic (bottom)"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_figure(title, rows), encoding="utf-8")
    print(f"wrote {out_path}")


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="JSON experiment config")
    sub.add_argument("--seed", type=int, default=None, help="override every seed")
    sub.add_argument("--out", default=None, help="override the output directory")
    sub.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigdistill",
        description="Distill I/Q modulation datasets by multi-domain distribution matching.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate train/test SIGDS files")
    _add_experiment_flags(gen)

    distill = subs.add_parser("distill", help="produce a synthetic set with the configured method")
    _add_experiment_flags(distill)
    distill.add_argument("--method", choices=METHODS, default=None, help="override the method")
    distill.add_argument("--alpha", type=float, default=None, help="override the frequency-loss weight")
    distill.add_argument("--spc", type=int, default=None, help="override signals per class")
    distill.add_argument("--iterations", type=int, default=None, help="override iteration count")
    distill.add_argument("--lr", type=float, default=None, help="override the synthetic-sample learning rate")

    ev = subs.add_parser("eval", help="train classifiers on synthetic sets and score them")
    _add_experiment_flags(ev)
    ev.add_argument("--arch", default=None, help="override the evaluation architecture")

    cross = subs.add_parser("crossarch", help="distill-on-C / evaluate-on-T matrix")
    _add_experiment_flags(cross)

    plot = subs.add_parser("plot", help="emit an SVG of records in both domains")
    plot.add_argument("dataset", help="SIGDS file to plot from")
    plot.add_argument("class_name", help="class to plot")
    plot.add_argument("out", help="output SVG path")
    plot.add_argument("--compare", default=None, help="second SIGDS file plotted below the first")
    plot.add_argument("--records", type=int, default=3, help="records per dataset")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            cmd_plot(
                Path(args.dataset),
                args.class_name,
                Path(args.out),
                Path(args.compare) if args.compare else None,
                args.records,
            )
            return 0
        overrides = {
            "seed": args.seed,
            "out": args.out,
            "method": getattr(args, "method", None),
            "alpha": getattr(args, "alpha", None),
            "spc": getattr(args, "spc", None),
            "iterations": getattr(args, "iterations", None),
            "lr": getattr(args, "lr", None),
            "arch": getattr(args, "arch", None),
        }
        man = parse_manifest(args.config, overrides)
        command = {
            "gen": cmd_gen,
            "distill": cmd_distill,
            "eval": cmd_eval,
            "crossarch": cmd_crossarch,
        }[args.command]
        command(man, args.force)
        return 0
    except (ValidationError, ParseError, TrainingDiverged, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
