"""Command-line entry point: ``mmgzsl <command> [options]``.

Exit codes: 0 success, 2 input/configuration/data error, 3 checkpoint error,
4 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import plotting
from .config import RunConfig, load_config
from .dataio import FeatureSet, PairedDataset, generate_synthetic, load_features, save_features
from .errors import MMGZSLError
from .synth import HISTORY_COLUMNS

log = logging.getLogger("mmgzsl")


def _write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


class Run:
    """Resolved configuration plus the output layout of one invocation."""

    def __init__(self, config: RunConfig, seed: int | None):
        self.config = config
        self.out = Path(config.out)
        self.seed = seed

    @property
    def data_dir(self) -> Path:
        return self.out / "data"

    @property
    def checkpoint_dir(self) -> Path:
        return self.out / "checkpoints"

    def seeds(self) -> list[int]:
        return [self.seed] if self.seed is not None else self.config.seeds()

    def first_seed(self) -> int:
        return self.seed if self.seed is not None else self.config.eval.base_seed

    def load_dataset(self) -> PairedDataset:
        parts = {}
        for name in ("mri", "dp"):
            path = self.data_dir / f"{name}.json"
            try:
                parts[name] = load_features(path)
            except FileNotFoundError as exc:
                raise FileNotFoundError(
                    f"feature file missing: {exc.filename}; run gen-data first") from None
        return PairedDataset(parts["mri"], parts["dp"])


def cmd_gen_data(run: Run) -> int:
    spec = run.config.data.to_spec()
    if run.seed is not None:
        spec.seed = run.seed
    data = generate_synthetic(spec)
    written = []
    for name, fs in (("mri", data.mri), ("dp", data.dp)):
        written += [str(p) for p in save_features(fs, run.data_dir / name)]
    manifest = {"spec": {k: v for k, v in vars(spec).items()
                         if k not in ("map_matrix", "map_offset")},
                "records": len(data), "files": sorted(Path(p).name for p in written),
                "geometry": {k: data.meta[k] for k in ("class_axis", "centers", "class_values")}}
    _write_json(run.data_dir / "manifest.json", manifest)
    print(f"wrote {len(data)} paired records to {run.data_dir}")
    return 0


def _history_files(run: Run, stages: ev.TrainedStages) -> list[Path]:
    tag, seed = stages.plan.tag, stages.seed
    out = []
    series = {}
    if stages.cycle_history:
        h = stages.cycle_history
        cols = ("epoch", "L_adv_GDY", "L_adv_FDX", "L_cyc")
        out.append(_write_csv(run.out / "histories" / f"cycle_seed{seed}.csv", cols,
                              zip(*(h[c] for c in cols))))
        series["translation"] = {c: h[c] for c in cols}
    if stages.synth_history:
        rows = stages.synth_history
        out.append(_write_csv(run.out / "histories" / f"synth_{tag}_seed{seed}.csv",
                              HISTORY_COLUMNS, rows))
        series["synthesis"] = {c: [r[i] for r in rows] for i, c in enumerate(HISTORY_COLUMNS)}
    if series:
        out.append(plotting.plot_histories(
            series, run.out / "figures" / f"losses_{tag}_seed{seed}.png",
            title=f"{stages.plan.label}, seed {seed}"))
    return out


def _train(run: Run, mode: str) -> ev.TrainedStages:
    dataset = run.load_dataset()
    cache = ev.StageCache(run.checkpoint_dir, mode)
    return ev.train_stages(dataset, run.config.experiment(), run.config.ablation,
                           run.first_seed(), cache, log_fn=log.debug)


def cmd_train(run: Run, resume: bool) -> int:
    stages = _train(run, "resume" if resume else "train")
    for kind, path in sorted(stages.checkpoints.items()):
        print(f"{kind} checkpoint: {path}")
    for path in _history_files(run, stages):
        print(f"wrote {path}")
    return 0


def cmd_synthesize(run: Run) -> int:
    stages = _train(run, "require")
    x, y = ev.synthesize_training_set(stages, run.config.experiment())
    fs = FeatureSet(x, y, [f"syn{i:06d}" for i in range(len(y))], stages.plan.source,
                    stages.cvae.class_range, {"seed": stages.seed, "ablation": stages.plan.tag})
    base = run.out / "synthetic" / f"{stages.plan.tag}_seed{stages.seed}"
    for p in save_features(fs, base):
        print(f"wrote {p}")
    return 0


def _settings(choice: str) -> tuple[str, ...]:
    return ("A", "B") if choice == "both" else (choice,)


def cmd_evaluate(run: Run) -> int:
    dataset = run.load_dataset()
    config = run.config.experiment()
    stages = ev.train_stages(dataset, config, run.config.ablation, run.first_seed(),
                             ev.StageCache(run.checkpoint_dir, "require"))
    result = ev.score_stages(stages, dataset, config, _settings(run.config.eval.setting))
    exp = ev.ExperimentResult(stages.plan.label, stages.plan.tag, [result])
    name = f"report_{stages.plan.tag}_seed{stages.seed}"
    reports = run.out / "reports"
    _write_json(reports / f"{name}.json", exp.to_dict())
    (reports / f"{name}.txt").write_text(ev.format_table([exp]))
    syn_x, syn_y = result.synthetic
    real = dataset.mri if stages.plan.source == "MRI" else dataset.dp
    dump = FeatureSet(syn_x, syn_y, [f"syn{i:06d}" for i in range(len(syn_y))],
                      stages.plan.source, real.class_range, stages.seed)
    save_features(dump, run.out / "synthetic" / f"{stages.plan.tag}_seed{stages.seed}")
    plotting.plot_features(real.features, real.classes, syn_x, syn_y,
                           run.out / "figures" / f"features_{stages.plan.tag}_seed{stages.seed}.png",
                           unseen=run.config.split.unseen_classes)
    print(ev.format_table([exp]), end="")
    print(f"wrote {reports / name}.json")
    return 0


def cmd_ablate(run: Run, resume: bool) -> int:
    dataset = run.load_dataset()
    cache = ev.StageCache(run.checkpoint_dir, "resume" if resume else "train")
    results = ev.ablation_sweep(dataset, run.config.experiment(), run.config.eval.ablations,
                                run.seeds(), cache, log_fn=log.debug)
    table = ev.format_table(results)
    _write_json(run.out / "reports" / "ablation.json", [r.to_dict() for r in results])
    (run.out / "reports" / "ablation.txt").write_text(table)
    summaries = [r.summary()["H"] for r in results]
    plotting.plot_ablation([r.label for r in results], [s[0] for s in summaries],
                           [s[1] for s in summaries], run.out / "figures" / "ablation_H.png")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="run seed (gen-data: data seed)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--ablation", help="ablation tag, e.g. full, wCPC, reverse")
    common.add_argument("--setting", choices=("A", "B", "both"), help="evaluation setting")
    common.add_argument("--resume", action="store_true",
                        help="reuse existing checkpoints instead of retraining")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="mmgzsl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("gen-data", "write the synthetic paired dataset"),
                       ("train", "train translation and synthesis models"),
                       ("synthesize", "write synthetic features from trained checkpoints"),
                       ("evaluate", "score settings A and B from trained checkpoints"),
                       ("ablate", "run the ablation table over seeds")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve(args: argparse.Namespace, environ=None) -> Run:
    overrides: dict = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.ablation is not None:
        overrides["ablation"] = args.ablation
    if args.setting is not None:
        overrides["eval"] = {"setting": args.setting}
    config = load_config(args.config, overrides, environ)
    return Run(config, args.seed)


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = resolve(args, environ)
        run.out.mkdir(parents=True, exist_ok=True)
        _write_json(run.out / f"effective_config_{args.command}.json",
                    {"command": args.command, "seed": args.seed, "resume": args.resume,
                     "config": run.config.model_dump()})
        if args.command == "gen-data":
            return cmd_gen_data(run)
        if args.command == "train":
            return cmd_train(run, args.resume)
        if args.command == "synthesize":
            return cmd_synthesize(run)
        if args.command == "evaluate":
            return cmd_evaluate(run)
        return cmd_ablate(run, args.resume)
    except MMGZSLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
