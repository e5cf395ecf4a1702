"""``elevleak`` command line.

Exit codes: 0 success, 1 invalid arguments or config, 2 bad input data,
3 anything else. ``ELEVLEAK_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SYNTHETIC_DEFAULTS, load_config
from .errors import DataError, ElevleakError, UnknownSample, ValidationError
from .evaluation.dataset import LabeledDataset, Sample
from .evaluation.experiment import ModelSpec, run_threat_model
from .evaluation.metrics import compute_metrics
from .evaluation.report import config_hash, write_reports
from .geodata import Rect, Region, assign_region, bounding_rect, parse_gpx
from .imagerep import Palette, rasterize, rasterize_many, to_png
from .miner import FixtureClient, mine_city
from .models import load_model, save_model
from .synth import default_cities, gen_city_dataset
from .textrep import TextConfig, TextPipeline

log = logging.getLogger("elevleak")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _setup_logging():
    level = os.environ.get("ELEVLEAK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _out_path(args, name: str) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _table(rows: list[tuple], header: tuple) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(tuple("-" * w for w in widths))] + [line(r) for r in rows])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    files = sorted(Path(args.gpx_dir).glob("*.gpx"))
    regions: list[Region] = []
    samples = []
    for path in files:
        try:
            route = parse_gpx(path.read_bytes(), route_id=path.stem)
        except DataError as exc:
            log.error("skipping %s: %s", path.name, exc)
            continue
        idx = assign_region(bounding_rect(route), regions, args.threshold)
        samples.append(Sample(path.stem, route.elevations, {"region": f"R{idx}"}, "raw"))
    if not samples:
        raise DataError(f"no samples: no readable GPX files in {args.gpx_dir}")
    data = LabeledDataset(samples)
    dest = _out_path(args, "raw.jsonl")
    data.write(dest)
    counts = data.class_counts("region")
    rows = [(name, f"{regions[int(name[1:])].center[0]:.4f}", f"{regions[int(name[1:])].center[1]:.4f}", n)
            for name, n in sorted(counts.items(), key=lambda kv: int(kv[0][1:]))]
    print(_table(rows, ("region", "lat", "lon", "samples")))
    print(f"{len(samples)} samples in {len(regions)} regions -> {dest}")
    return 0


def cmd_mine(args) -> int:
    client = FixtureClient.from_directory(args.fixtures)
    city = Rect.from_bounds(*args.bounds)
    failures = []
    mined = mine_city(client, city, args.rows, args.cols, args.label, args.borough, args.threads, failures)
    if not mined:
        raise DataError("no samples mined")
    samples = [Sample(m.segment_id, m.profile.elevations_m, {"city": m.city_label, "borough": m.borough_label},
                      "mined") for m in mined]
    dest = _out_path(args, "mined.jsonl")
    LabeledDataset(samples).write(dest)
    print(f"{len(samples)} segments mined, {len(failures)} cells failed -> {dest}")
    return 0


def cmd_synth(args) -> int:
    spec = dict(SYNTHETIC_DEFAULTS, seed=args.seed)
    if args.spec:
        spec.update(json.loads(Path(args.spec).read_text()))
    for key in ("n_cities", "gap", "count", "n_points", "boroughs_per_city"):
        if getattr(args, key) is not None:
            spec[key] = getattr(args, key)
    cities = default_cities(spec["n_cities"], spec["gap"], spec["amplitude"], spec["base"], spec["n_bumps"],
                            spec["seed"], spec["count"], spec["boroughs_per_city"])
    data = gen_city_dataset(cities, spec["n_points"], spec["seed"])
    dest = _out_path(args, "synthetic.jsonl")
    data.write(dest)
    print(f"{len(data)} samples -> {dest}")
    return 0


def _text_config(args) -> TextConfig:
    return TextConfig(mode=args.mode, ngram_order=args.ngram_order, min_term_frequency=args.min_tf,
                      max_features=args.max_features)


def cmd_preprocess(args) -> int:
    data = LabeledDataset.read(args.dataset)
    y, classes = data.encode_labels(args.level)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.representation == "text":
        pipe = TextPipeline(_text_config(args)).fit(data.profiles())
        X, kept = pipe.transform(data.profiles())
        pipe.save(out / "pipeline.json")
    else:
        X, kept = rasterize_many(data.profiles(), Palette()), np.arange(len(data))
    np.savez(out / "features.npz", X=X, y=y[kept], ids=np.array(data.ids)[kept], classes=np.array(classes))
    print(f"{len(kept)} samples x {X.shape[1:]} features -> {out / 'features.npz'}")
    return 0


def cmd_train(args) -> int:
    data = LabeledDataset.read(args.dataset)
    y, classes = data.encode_labels(args.level)
    params = json.loads(args.params) if args.params else {}
    spec = ModelSpec(args.model, params)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"level": args.level, "classes": classes, "family": args.model}
    if args.model == "cnn":
        from .models import cnn_train
        X = rasterize_many(data.profiles(), Palette(), dtype=np.float32)
        model = cnn_train(X, y, seed=args.seed, n_classes=len(classes), **params)
    else:
        pipe = TextPipeline(_text_config(args)).fit(data.profiles())
        X, _ = pipe.transform(data.profiles())
        pipe.save(out / "pipeline.json")
        from .models import train_mlp, train_rfc, train_svm
        trainer = {"svm": train_svm, "rfc": train_rfc, "mlp": train_mlp}[spec.family]
        model = trainer(X, y, seed=args.seed, n_classes=len(classes), **params)
    save_model(model, out / "model.npz")
    (out / "model.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"trained {args.model} on {len(y)} samples, {len(classes)} classes -> {out / 'model.npz'}")
    return 0


def cmd_eval(args) -> int:
    data = LabeledDataset.read(args.dataset)
    model_dir = Path(args.model_dir)
    meta = json.loads((model_dir / "model.json").read_text())
    model = load_model(model_dir / "model.npz")
    index = {c: i for i, c in enumerate(meta["classes"])}
    names = data.labels(meta["level"])
    unknown = sorted(set(names) - set(index))
    if unknown:
        raise DataError(f"labels not seen in training: {unknown}")
    y = np.array([index[n] for n in names])
    if meta["family"] == "cnn":
        pred = model.predict(rasterize_many(data.profiles(), Palette(), dtype=model.dtype))
        keep = np.arange(len(y))
    else:
        pipe = TextPipeline.load(model_dir / "pipeline.json")
        X, keep = pipe.transform(data.profiles())
        pred = model.predict(X)
    metrics = compute_metrics(pred, y[keep], len(index))
    doc = {**metrics.to_json(), "n": int(len(keep)), "dropped": int(len(y) - len(keep)), "classes": meta["classes"]}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    print(text, end="")
    return 0


def cmd_run(args) -> int:
    path = args.config_file or args.config
    if not path:
        raise ValidationError("run needs a config file (positional or --config)")
    cfg = load_config(path)
    seed = cfg.seed if args.seed is None else args.seed
    data = cfg.dataset.load()
    report = run_threat_model(cfg.threat_model, data, cfg.representation, cfg.model, cfg.protocol, seed,
                              cfg.text, cfg.palette, threads=args.threads)
    embedded = dict(cfg.raw, seed=seed)
    stem = Path(path).stem
    paths = write_reports(report, args.out_dir, embedded, stem, svg=cfg.svg)
    agg = report.aggregate
    print(f"{cfg.threat_model} {cfg.model.family} ({cfg.representation}): "
          + "  ".join(f"{k} {v:.4f}" for k, v in agg.items()))
    print(f"config {config_hash(embedded)[:12]}  dataset {report.dataset_hash[:12]}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_render(args) -> int:
    data = LabeledDataset.read(args.dataset)
    sample = data.get(args.sample_id)
    if sample is None:
        raise UnknownSample(args.sample_id)
    dest = _out_path(args, f"{args.sample_id.replace('/', '_')}.png")
    to_png(rasterize(sample.elevations, Palette()), dest, scale=args.scale)
    print(f"wrote {dest}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != "elevleak-report":
            raise DataError(f"{path} is not an elevleak report")
        agg = doc["aggregate"]
        per_class = sorted({u["per_class"] for u in doc["units"] if u["per_class"] is not None})
        rows.append((doc["threat_model"], doc["model"]["family"], doc["representation"],
                     ",".join(map(str, per_class)) or "-", f"{doc['protocol']['overlap_ratio']:.2f}",
                     *(f"{100 * agg[k]:.2f}" for k in ("accuracy", "precision", "recall", "f1", "specificity"))))
    table = _table(rows, ("tm", "model", "repr", "S", "overlap", "acc", "prec", "rec", "f1", "spec"))
    if args.output:
        Path(args.output).write_text(table + "\n")
    print(table)
    return 0


# ---------------------------------------------------------------------------


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags; SUPPRESS keeps them from
    # overwriting values given before the subcommand name.
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=d(None), help="random seed (default: config value or 0)")
    common.add_argument("--config", default=d(None), help="experiment config (JSON)")
    common.add_argument("--out-dir", default=d("."), help="directory for outputs")
    common.add_argument("--threads", type=int, default=d(1))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = _Parser(prog="elevleak", description="Infer location from route elevation profiles.",
                     parents=[_global_flags(suppress=False)])
    parser.add_argument("--version", action="version", version=f"elevleak {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=func)
        return p

    def text_opts(p):
        p.add_argument("--mode", choices=("raw", "fine"), default="raw")
        p.add_argument("--ngram-order", type=int, default=8)
        p.add_argument("--min-tf", type=int, default=2)
        p.add_argument("--max-features", type=int, default=None)

    p = add("ingest", cmd_ingest, "GPX directory -> region-labelled dataset")
    p.add_argument("gpx_dir")
    p.add_argument("--threshold", type=float, default=0.5, help="region radius in degrees")
    p.add_argument("-o", "--output")

    p = add("mine", cmd_mine, "mine segments for one city from recorded fixtures")
    p.add_argument("--fixtures", required=True, help="directory of recorded service responses")
    p.add_argument("--bounds", type=float, nargs=4, required=True, metavar=("S", "W", "N", "E"))
    p.add_argument("--rows", type=int, default=10)
    p.add_argument("--cols", type=int, default=10)
    p.add_argument("--label", required=True, help="city label")
    p.add_argument("--borough")
    p.add_argument("-o", "--output")

    p = add("synth", cmd_synth, "generate a synthetic city dataset")
    p.add_argument("--spec", help="JSON file with synthetic dataset options")
    p.add_argument("--n-cities", type=int)
    p.add_argument("--gap", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--n-points", type=int)
    p.add_argument("--boroughs-per-city", type=int)
    p.add_argument("-o", "--output")

    p = add("preprocess", cmd_preprocess, "dataset -> feature matrix")
    p.add_argument("dataset")
    p.add_argument("--representation", choices=("text", "image"), default="text")
    p.add_argument("--level", choices=("city", "borough", "region"), default="city")
    text_opts(p)

    p = add("train", cmd_train, "fit one model on a whole dataset")
    p.add_argument("dataset")
    p.add_argument("--model", choices=("svm", "rfc", "mlp", "cnn"), default="mlp")
    p.add_argument("--params", help="hyperparameters as a JSON object")
    p.add_argument("--level", choices=("city", "borough", "region"), default="city")
    text_opts(p)

    p = add("eval", cmd_eval, "score a trained model on a dataset")
    p.add_argument("dataset")
    p.add_argument("model_dir")
    p.add_argument("-o", "--output")

    p = add("run", cmd_run, "run a configured threat-model experiment")
    p.add_argument("config_file", nargs="?")

    p = add("render", cmd_render, "write the 32x32 rasterization of one sample as PNG")
    p.add_argument("dataset")
    p.add_argument("sample_id")
    p.add_argument("--scale", type=int, default=8)
    p.add_argument("-o", "--output")

    p = add("report", cmd_report, "summary table over report JSON files")
    p.add_argument("reports", nargs="+")
    p.add_argument("-o", "--output")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None and args.func is not cmd_run:
            args.seed = 0
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ElevleakError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
