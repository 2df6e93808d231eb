"""Command-line interface.

Every command reads options from three layers, later layers winning:
built-in defaults, a key=value config file (``--config``), and explicit
flags.  Unknown config keys are rejected.  Commands with an output
directory echo the fully resolved options to ``run_config.txt`` there, so a
run is reproducible from that file alone.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import datagen, pipeline, svg
from .errors import ConfigError, DataError, NumericalError
from .mesh import MeshError, load_mesh, normalize_unit_sphere, save_off
from .model import ModelConfig, load_model
from .simplify import simplify_to_face_count


# -- option plumbing ----------------------------------------------------------

def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_ints(text):
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}"
                          ) from exc


def _parse_floats(text):
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}"
                          ) from exc


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "ints": _parse_ints,
    "floats": _parse_floats,
}


def _coerce(kind, key, raw):
    if raw is None:
        return None
    try:
        return _PARSERS[kind](raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def read_config_file(path):
    """key = value lines; blank lines and #-comments ignored."""
    out = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class _Options:
    """Declares a command's option table; resolves file + flag layers."""

    def __init__(self, table):
        self.table = table  # key -> (kind, default, help)

    def add_flags(self, parser):
        parser.add_argument("--config", metavar="FILE",
                            help="key=value option file")
        for key, (kind, default, helptext) in self.table.items():
            parser.add_argument("--" + key.replace("_", "-"),
                                dest=key, default=None, metavar=kind.upper(),
                                help=f"{helptext} (default: {default})")

    def resolve(self, args):
        values = {key: default for key, (_, default, _) in self.table.items()}
        if args.config:
            if not Path(args.config).exists():
                raise ConfigError(f"config file not found: {args.config}")
            for key, raw in read_config_file(args.config).items():
                if key not in self.table:
                    raise ConfigError(
                        f"{args.config}: unknown config key {key!r}")
                values[key] = _coerce(self.table[key][0], key, raw)
        for key in self.table:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = _coerce(self.table[key][0], key, flag)
        return values


def _echo_config(values, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for key in sorted(values):
        val = values[key]
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key} = {val}")
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n")


def _require(values, *keys):
    for key in keys:
        if values[key] in (None, ""):
            raise ConfigError(f"missing required option: {key}")


def _model_config(values, num_classes):
    if values["model"] == "tiny":
        return ModelConfig.tiny(num_classes)
    if values["model"] == "full":
        return ModelConfig(num_classes=num_classes)
    raise ConfigError(f"model must be 'tiny' or 'full', got {values['model']!r}")


def _load_network(values):
    path = values["checkpoint"]
    if not Path(path).exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_model(path)


def _resolve_walks(value, task, num_classes):
    """0 means the stock ensemble: 32 walks, or 32 per class for
    segmentation (label mass must cover every vertex, not just one step)."""
    if value and value > 0:
        return int(value)
    if task == "segmentation":
        return 32 * num_classes
    return 32


def _split_entries(dataset, which):
    entries = dataset.split(which)
    if not entries:
        raise DataError(f"dataset has no entries in split {which!r}")
    return entries


# -- commands -----------------------------------------------------------------

_COMMON_EVAL = {
    "dataset": ("str", None, "dataset directory or manifest path"),
    "checkpoint": ("str", None, "model checkpoint file"),
    "output": ("str", None, "output directory"),
    "split": ("str", "test", "dataset split to use"),
    "walks": ("int", 0, "inference walks per mesh "
                        "(0 = 32, or 32 x classes for segmentation)"),
    "walk_length": ("float", 0.0,
                    "walk length: 0 auto, <1 fraction of V, else steps"),
    "seed": ("int", 0, "random seed"),
    "threads": ("int", 1, "worker threads (1 = bitwise reproducible)"),
}

PREPROCESS_OPTS = _Options({
    "input": ("str", None, "input directory (meshes or a dataset)"),
    "output": ("str", None, "output dataset directory"),
    "targets": ("ints", [500], "comma-separated face-count targets"),
    "task": ("str", "", "manifest task override"),
})

GENDATA_OPTS = _Options({
    "output": ("str", None, "output dataset directory"),
    "task": ("str", "classification", "classification or segmentation"),
    "count": ("int", 0, "instances per family (0 = stock size)"),
    "seed": ("int", 0, "random seed"),
    "jitter": ("float", 0.08, "vertex jitter, fraction of mean edge length"),
})

TRAIN_OPTS = _Options({
    "dataset": ("str", None, "dataset directory or manifest path"),
    "output": ("str", None, "output directory for checkpoint + metrics"),
    "model": ("str", "tiny", "model size: tiny or full"),
    "iterations": ("int", 20000, "training iterations"),
    "batch_walks": ("int", 32, "walks per iteration"),
    "walks_per_mesh": ("int", 0, "walks drawn from each sampled mesh "
                                 "(0 = task default: 1, segmentation 4)"),
    "walk_length": ("float", 0.0,
                    "walk length: 0 auto, <1 fraction of V, else steps"),
    "seed": ("int", 0, "random seed"),
    "min_rate": ("float", 1e-6, "cyclic schedule minimum learning rate"),
    "max_rate": ("float", 5e-4, "cyclic schedule maximum learning rate"),
    "rate_cycle": ("int", 20000, "cyclic schedule period, iterations"),
    "rotate": ("bool", True, "random-rotation augmentation"),
    "log_every": ("int", 100, "metrics row every N iterations"),
    "eval_every": ("int", 0, "evaluate on the test split every N iterations"),
    "eval_walks": ("int", 8, "walks per mesh for mid-training evaluation"),
    "threads": ("int", 1, "worker threads for mid-training evaluation"),
})

EVAL_OPTS = _Options(dict(_COMMON_EVAL))
CLASSIFY_OPTS = _Options(dict(_COMMON_EVAL))
SEGMENT_OPTS = _Options(dict(_COMMON_EVAL))

SWEEP_OPTS = _Options({
    **_COMMON_EVAL,
    "walk_counts": ("ints", [1, 2, 4, 8, 16, 32],
                    "inference-walk counts to sweep"),
    "length_fractions": ("floats", [0.05, 0.1, 0.2, 0.4, 0.6],
                         "walk-length fractions of V to sweep"),
    "rotations": ("int", 0, "also sweep N random rotations"),
})

PLOT_OPTS = _Options({
    "input": ("str", None, "metrics or sweep CSV"),
    "output": ("str", None, "output SVG path"),
    "title": ("str", "", "chart title"),
})


def cmd_preprocess(args):
    values = PREPROCESS_OPTS.resolve(args)
    _require(values, "input", "output")
    in_root = Path(values["input"])
    out_root = Path(values["output"])
    targets = values["targets"]
    if not targets:
        raise ConfigError("preprocess needs at least one face-count target")

    sources = []  # (path, split, family, class_id, labels)
    if (in_root / ds.MANIFEST_NAME).exists():
        manifest = json.loads((in_root / ds.MANIFEST_NAME).read_text())
        for raw in manifest.get("entries", []):
            label_val = None
            if raw.get("labels"):
                label_val = ds.read_labels(in_root / raw["labels"])
            sources.append((in_root / raw["mesh"], raw.get("split", "train"),
                            raw.get("family", ""), raw.get("class_id", -1),
                            label_val))
    else:
        if not in_root.is_dir():
            raise ConfigError(f"input directory not found: {in_root}")
        paths = sorted(list(in_root.glob("*.off"))
                       + list(in_root.glob("*.obj")))
        for path in paths:
            label_val = None
            sidecar = path.with_suffix(".labels")
            if sidecar.exists():
                label_val = ds.read_labels(sidecar)
            sources.append((path, "train", path.stem, -1, label_val))
    if not sources:
        raise DataError(f"no meshes found under {in_root}")

    entries = []
    num_classes = 0
    failures = 0
    saw_class = saw_vertex = False
    for path, split, family, class_id, label_val in sources:
        try:
            mesh = load_mesh(path)
        except (MeshError, OSError) as exc:
            failures += 1
            print(f"preprocess: skipping {path}: {exc}", file=sys.stderr)
            continue
        for target in targets:
            result = simplify_to_face_count(mesh, target)
            out_mesh = normalize_unit_sphere(result.mesh)
            sub = out_root / split
            sub.mkdir(parents=True, exist_ok=True)
            stem = f"{path.stem}_f{target}"
            mesh_rel = f"{split}/{stem}.off"
            save_off(out_mesh, out_root / mesh_rel)
            entry = {"mesh": mesh_rel, "split": split, "family": family}
            if class_id >= 0:
                entry["class_id"] = class_id
                num_classes = max(num_classes, class_id + 1)
            if label_val is not None:
                kind, value = label_val
                label_rel = f"{split}/{stem}.labels"
                if kind == "class":
                    saw_class = True
                    ds.write_class_label(out_root / label_rel, value)
                    num_classes = max(num_classes, value + 1)
                    if class_id < 0:
                        entry["class_id"] = value
                else:
                    saw_vertex = True
                    transferred = value[result.origin_vertices]
                    ds.write_vertex_labels(out_root / label_rel, transferred)
                    num_classes = max(num_classes, int(value.max()) + 1)
                entry["labels"] = label_rel
            entries.append(entry)
    if not entries:
        raise DataError("preprocess: every input mesh failed to parse")

    task = values["task"] or ("segmentation" if saw_vertex and not saw_class
                              else "classification")
    ds.save_manifest(out_root, task, max(num_classes, 2),
                     [str(i) for i in range(max(num_classes, 2))], entries)
    _echo_config(values, out_root)
    print(f"wrote {len(entries)} meshes "
          f"({len(sources) - failures} inputs x {len(targets)} targets) "
          f"to {out_root}")
    return 0


def cmd_gendata(args):
    values = GENDATA_OPTS.resolve(args)
    _require(values, "output")
    task = values["task"]
    if task == "classification":
        count = values["count"] or 20
        specs = datagen.classification_specs(count)
    elif task == "segmentation":
        count = values["count"] or 50
        specs = datagen.segmentation_specs(count)
    else:
        raise ConfigError(f"task must be classification or segmentation, "
                          f"got {task!r}")
    manifest = datagen.generate_dataset(values["output"], specs,
                                        values["seed"], task,
                                        jitter=values["jitter"])
    _echo_config(values, values["output"])
    total = sum(s.count for s in specs)
    print(f"wrote {total} meshes, manifest {manifest}")
    return 0


def cmd_train(args):
    values = TRAIN_OPTS.resolve(args)
    _require(values, "dataset", "output")
    data = ds.load_dataset(values["dataset"])
    model_cfg = _model_config(values, data.num_classes)
    train_cfg = pipeline.TrainConfig(
        iterations=values["iterations"], batch_walks=values["batch_walks"],
        walks_per_mesh=values["walks_per_mesh"],
        walk_length=values["walk_length"], seed=values["seed"],
        min_rate=values["min_rate"], max_rate=values["max_rate"],
        rate_cycle=values["rate_cycle"], rotate=values["rotate"],
        log_every=values["log_every"], eval_every=values["eval_every"],
        eval_walks=values["eval_walks"], threads=values["threads"])
    _echo_config(values, values["output"])

    def progress(row):
        it, loss, rate, acc = row
        msg = f"iter {it:>7}  loss {loss:.4f}  rate {rate:.2e}"
        if acc != "":
            msg += f"  eval {acc:.4f}"
        print(msg)

    result = pipeline.train(data, model_cfg, train_cfg,
                            out_dir=values["output"], on_progress=progress)
    print(f"checkpoint: {result.checkpoint}")
    return 0


def cmd_eval(args):
    values = EVAL_OPTS.resolve(args)
    _require(values, "dataset", "checkpoint")
    network, _meta = _load_network(values)
    data = ds.load_dataset(values["dataset"])
    entries = _split_entries(data, values["split"])
    walks = _resolve_walks(values["walks"], data.task,
                           network.config.num_classes)
    metric, _ = pipeline.evaluate_task(network, entries, data.task,
                                       walks, values["seed"],
                                       values["walk_length"],
                                       values["threads"])
    name = ("accuracy" if data.task == "classification" else "edge_accuracy")
    print(f"{name} {metric:.4f} over {len(entries)} meshes "
          f"({walks} walks)")
    if values["output"]:
        _echo_config(values, values["output"])
    return 0


def cmd_classify(args):
    values = CLASSIFY_OPTS.resolve(args)
    _require(values, "dataset", "checkpoint")
    network, _meta = _load_network(values)
    data = ds.load_dataset(values["dataset"])
    entries = _split_entries(data, values["split"])
    seeds = pipeline.entry_seeds(values["seed"], len(entries))
    walks = _resolve_walks(values["walks"], "classification",
                           network.config.num_classes)
    rows = []
    hits = labelled = 0
    for i, entry in enumerate(entries):
        pred, probs = pipeline.classify_mesh(
            network, entry.mesh, walks,
            np.random.default_rng(seeds[i]), values["walk_length"])
        rows.append([entry.name, pred] + [f"{p:.6f}" for p in probs])
        if entry.class_id >= 0:
            labelled += 1
            hits += pred == entry.class_id
    if values["output"]:
        out = Path(values["output"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "predictions.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mesh", "prediction"]
                            + [f"p{int(c)}" for c in
                               range(network.config.num_classes)])
            writer.writerows(rows)
        _echo_config(values, out)
    for row in rows:
        print(f"{row[0]}: class {row[1]}")
    if labelled:
        print(f"accuracy {hits / labelled:.4f} over {labelled} meshes")
    return 0


def cmd_segment(args):
    values = SEGMENT_OPTS.resolve(args)
    _require(values, "dataset", "checkpoint", "output")
    network, _meta = _load_network(values)
    data = ds.load_dataset(values["dataset"])
    entries = _split_entries(data, values["split"])
    out = Path(values["output"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = pipeline.entry_seeds(values["seed"], len(entries))
    walks = _resolve_walks(values["walks"], "segmentation",
                           network.config.num_classes)
    accs = []
    for i, entry in enumerate(entries):
        labels, scores = pipeline.segment_mesh(
            network, entry.mesh, walks,
            np.random.default_rng(seeds[i]), values["walk_length"])
        ds.write_vertex_labels(out / f"{entry.name}.pred.labels", labels)
        if entry.vertex_labels is not None:
            accs.append(pipeline.edge_accuracy(entry.mesh, labels, scores,
                                               entry.vertex_labels))
    _echo_config(values, out)
    print(f"wrote {len(entries)} label files to {out}")
    if accs:
        print(f"edge_accuracy {float(np.mean(accs)):.4f} "
              f"over {len(accs)} meshes")
    return 0


def cmd_sweep(args):
    values = SWEEP_OPTS.resolve(args)
    _require(values, "dataset", "checkpoint", "output")
    network, _meta = _load_network(values)
    data = ds.load_dataset(values["dataset"])
    if data.task != "classification":
        raise ConfigError("sweep requires a classification dataset")
    entries = _split_entries(data, values["split"])
    out = Path(values["output"])
    out.mkdir(parents=True, exist_ok=True)
    walks = _resolve_walks(values["walks"], "classification",
                           network.config.num_classes)

    walk_rows = pipeline.walk_count_sweep(
        network, entries, values["walk_counts"], values["seed"],
        values["walk_length"], values["threads"])
    with open(out / "sweep_walks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["walks", "accuracy"])
        writer.writerows([[n, f"{a:.6f}"] for n, a in walk_rows])

    length_rows = pipeline.walk_length_sweep(
        network, entries, values["length_fractions"], walks,
        values["seed"], values["threads"])
    with open(out / "sweep_lengths.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["length_fraction", "accuracy"])
        writer.writerows([[f, f"{a:.6f}"] for f, a in length_rows])

    if values["rotations"]:
        base, accs = pipeline.rotation_sweep(
            network, entries, walks, values["rotations"],
            values["seed"], values["walk_length"], values["threads"])
        with open(out / "sweep_rotations.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rotation", "accuracy"])
            writer.writerow(["none", f"{base:.6f}"])
            writer.writerows([[k, f"{a:.6f}"]
                              for k, a in enumerate(accs)])
    _echo_config(values, out)
    for n, a in walk_rows:
        print(f"walks {n:>3}: accuracy {a:.4f}")
    for f, a in length_rows:
        print(f"length {f:.2f}V: accuracy {a:.4f}")
    return 0


def cmd_plot(args):
    values = PLOT_OPTS.resolve(args)
    _require(values, "input", "output")
    path = Path(values["input"])
    if not path.exists():
        raise ConfigError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise DataError(f"{path}: CSV needs a header and at least one row")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise DataError(f"{path}: CSV needs an x column and one series")

    def parse(cell):
        cell = cell.strip()
        if not cell:
            return None
        try:
            return float(cell)
        except ValueError:
            return None

    series = []
    for col in range(1, len(header)):
        xs, ys = [], []
        for row in body:
            if col >= len(row):
                continue
            x, y = parse(row[0]), parse(row[col])
            if x is None or y is None:
                continue
            xs.append(x)
            ys.append(y)
        if xs:
            series.append((header[col], xs, ys))
    if not series:
        raise DataError(f"{path}: no numeric data to plot")
    svg.line_chart(series, values["output"], title=values["title"],
                   x_label=header[0])
    print(f"wrote {values['output']}")
    return 0


# -- entry point --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="meshwalk",
                     description="Mesh classification and segmentation "
                                 "with random walks over vertices.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = [
        ("preprocess", PREPROCESS_OPTS, cmd_preprocess,
         "simplify meshes to face-count targets and build a dataset"),
        ("gendata", GENDATA_OPTS, cmd_gendata,
         "generate a synthetic labelled dataset"),
        ("train", TRAIN_OPTS, cmd_train, "train a model"),
        ("eval", EVAL_OPTS, cmd_eval, "report accuracy on a split"),
        ("classify", CLASSIFY_OPTS, cmd_classify,
         "write per-mesh class predictions"),
        ("segment", SEGMENT_OPTS, cmd_segment,
         "write per-vertex label predictions"),
        ("sweep", SWEEP_OPTS, cmd_sweep,
         "accuracy sweeps over walk count and walk length"),
        ("plot", PLOT_OPTS, cmd_plot, "render a CSV as an SVG line chart"),
    ]
    for name, opts, func, helptext in commands:
        p = sub.add_parser(name, help=helptext, description=helptext)
        opts.add_flags(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, MeshError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
