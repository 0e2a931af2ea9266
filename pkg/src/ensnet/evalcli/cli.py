"""``ensnet`` command line.

Exit codes: 0 success, 1 usage error (bad flags, malformed architecture
text), 2 data error (unreadable or inconsistent files, failed checks).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .. import ensemble
from ..archdsl import ArchError, ArchSpec, compile_arch, count_params, infer_shapes, parse_arch
from ..imageprep import (
    DatasetError,
    Image,
    SplitManifest,
    equalize_intensity,
    generate_synthetic,
    load_dataset,
    make_split,
    read_ppm,
    rescale_max_side,
    write_dataset,
    write_ppm,
)
from ..imageprep.geometry import fit_to_input
from ..imageprep.ppm import PPMError
from ..netzoo import PRESETS, Network, default_schedule, extract_scores, preset, train
from ..tensor.checkpoint import CheckpointError
from ..tensor.optim import TrainSchedule
from .cache import CacheError, FeatureCache, read_cache, write_cache
from .metrics import evaluate
from .report import plot_rank_curves, report_text, table, to_json, write_curve_csv

log = logging.getLogger("ensnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
SUBCOMMANDS = (
    "parse", "shapes", "params", "prep", "split", "train", "extract",
    "search-weights", "fuse-train", "eval", "synth",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- helpers ------------------------------------------------------------


def _spec_from_args(args) -> tuple[ArchSpec, str]:
    if args.preset:
        return preset(args.preset), args.preset
    if args.spec:
        return parse_arch(args.spec), "spec"
    if args.file:
        return parse_arch(Path(args.file).read_text()), Path(args.file).stem
    raise UsageError("give one of --preset, --spec or --file")


def _add_spec_args(p, classes=True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--spec", help="architecture text, e.g. 'I(32,32,3)->C(3,1,8)->F(e)'")
    g.add_argument("--file", help="file holding architecture text")
    if classes:
        p.add_argument("--classes", type=int, default=101, help="value bound to symbolic F(e)")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(args, payload, text: str) -> None:
    print(to_json(payload) if args.json else text)


def _schedule(args, preset_id: str | None = None, base: TrainSchedule | None = None) -> TrainSchedule:
    base = base or (default_schedule(preset_id) if preset_id else TrainSchedule())
    if getattr(args, "config", None):
        base = TrainSchedule.from_json(args.config, **base.to_dict())
    over = {k: getattr(args, k) for k in ("epochs", "batch", "lr", "momentum", "seed") if getattr(args, k, None) is not None}
    return base.with_(**over)


def _add_schedule_args(p):
    p.add_argument("--config", help="JSON schedule file {epochs, batch, lr, momentum, seed}")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)


def _load_subset(args, network: Network):
    data = load_dataset(args.root)
    if args.manifest:
        train_set, test_set = SplitManifest.load(args.manifest).subsets(data)
        data = train_set if args.subset == "train" else test_set
    h, w, _ = network.input_shape
    data.size = (w, h)
    transform = equalize_intensity if args.equalize else None
    x, y = data.arrays(transform)
    return data, x, y


# -- subcommands ---------------------------------------------------------


def cmd_parse(args) -> int:
    spec, _ = _spec_from_args(args)
    elements = [type(e).__name__ for e in spec.elements]
    payload = {"canonical": spec.to_text(), "input": asdict(spec.input), "elements": elements}
    _emit(args, payload, spec.to_text())
    return EXIT_OK


def cmd_shapes(args) -> int:
    spec, _ = _spec_from_args(args)
    graph = compile_arch(spec, args.classes)
    trace = infer_shapes(graph)
    if args.json:
        print(trace.to_json())
    else:
        rows = [[lab, "x".join(map(str, shp))] for lab, shp in trace.entries]
        print(table(rows, ["layer", "shape"]))
    return EXIT_OK


def cmd_params(args) -> int:
    spec, _ = _spec_from_args(args)
    report = count_params(compile_arch(spec, args.classes))
    if args.json:
        print(report.to_json())
    else:
        rows = [[lab, c] for lab, c in report.layers if c]
        print(table(rows, ["layer", "params"]))
        print(f"total {report.total}")
    return EXIT_OK


def _prep_one(img: Image, args) -> Image:
    img = rescale_max_side(img, args.max_side)
    img = equalize_intensity(img)
    if args.fit:
        w, h = args.fit
        img = fit_to_input(img, w, h)
    return img


def cmd_prep(args) -> int:
    src, dst = Path(args.input), Path(args.output)
    if src.is_dir():
        paths = sorted(src.rglob("*.ppm"))
        for p in paths:
            out = dst / p.relative_to(src)
            out.parent.mkdir(parents=True, exist_ok=True)
            write_ppm(out, _prep_one(read_ppm(p), args))
        print(f"processed {len(paths)} images into {dst}")
    else:
        dst.parent.mkdir(parents=True, exist_ok=True)
        write_ppm(dst, _prep_one(read_ppm(src), args))
        print(f"wrote {dst}")
    return EXIT_OK


def cmd_synth(args) -> int:
    data = generate_synthetic(args.classes, args.per_class, args.size, args.seed)
    write_dataset(data, args.out)
    _emit(args, {"root": str(args.out), "items": len(data), "classes": data.classes},
          f"wrote {len(data)} images in {len(data.classes)} classes to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    data = load_dataset(args.root)
    manifest = make_split(data, args.per_class_train, args.seed)
    manifest.save(args.out)
    _emit(args, {"train": len(manifest.train), "test": len(manifest.test), "seed": manifest.seed},
          f"train {len(manifest.train)}  test {len(manifest.test)}  -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    classes = len(load_dataset(args.root).classes)
    spec, name = _spec_from_args(args)
    net = Network.from_spec(spec, classes, seed=args.init_seed)
    sched = _schedule(args, args.preset)
    args.subset = "train"
    _, x, y = _load_subset(args, net)
    _, history = train(net, (x, y), sched)
    net.save(args.out)
    payload = {"network": name, "classes": classes, "samples": int(len(y)), "schedule": sched.to_dict(),
               "loss": history, "checkpoint": str(args.out)}
    _emit(args, payload, "\n".join(f"epoch {i + 1:3d}  loss {v:.4f}" for i, v in enumerate(history)))
    return EXIT_OK


def cmd_extract(args) -> int:
    classes = len(load_dataset(args.root).classes)
    spec, name = _spec_from_args(args)
    net = Network.from_spec(spec, classes)
    net.load(args.checkpoint)
    _, x, y = _load_subset(args, net)
    cache = FeatureCache(args.network_id or name, extract_scores(net, x), y)
    write_cache(cache, args.out)
    _emit(args, {"network": cache.network_id, "items": len(y), "e": cache.e, "cache": str(args.out)},
          f"{len(y)} score vectors (e={cache.e}) -> {args.out}")
    return EXIT_OK


def _read_caches(paths) -> tuple[list[np.ndarray], np.ndarray]:
    caches = [read_cache(p) for p in paths]
    labels = caches[0].labels
    for c, p in zip(caches, paths):
        if not np.array_equal(c.labels, labels):
            raise CacheError(f"{p}: labels are not row-aligned with {paths[0]}")
        if c.e != caches[0].e:
            raise CacheError(f"{p}: e={c.e} differs from {caches[0].e}")
    return [c.scores for c in caches], labels


def cmd_search_weights(args) -> int:
    val, labels = _read_caches(args.val)
    train_f = train_l = None
    if args.train:
        train_f, train_l = _read_caches(args.train)
    sched = ensemble.default_fusion_schedule(epochs=ensemble.SEARCH_EPOCHS)
    sched = _schedule(args, base=sched)
    best, results = ensemble.search_weights(val, labels, args.step, train_f, train_l, sched)
    payload = {"weights": list(best.w),
               "candidates": [{"w": list(w), "top1": 100.0 * a} for w, a in results]}
    if args.out:
        Path(args.out).write_text(json.dumps({"weights": list(best.w)}))
    rows = [[",".join(f"{v:g}" for v in w), f"{100 * a:.2f}"] for w, a in results]
    _emit(args, payload, table(rows, ["weights", "top-1"]) + f"\nbest {','.join(f'{v:g}' for v in best.w)}")
    return EXIT_OK


def cmd_fuse_train(args) -> int:
    feats, labels = _read_caches(args.train)
    if args.weights_file:
        weights = json.loads(Path(args.weights_file).read_text())["weights"]
    elif args.weights:
        weights = args.weights
    else:
        weights = [1.0 / len(feats)] * len(feats)
    sched = _schedule(args, base=ensemble.default_fusion_schedule())
    model, history = ensemble.train_fusion(feats, labels, weights, sched)
    model.save(args.out)
    payload = {"weights": list(model.weights.w), "input_width": model.input_width,
               "classes": model.classes, "loss": history, "checkpoint": str(args.out)}
    if args.apply:
        test_f, test_l = _read_caches(args.apply)
        scores = model.scores(test_f)
        write_cache(FeatureCache("ensemble", scores, test_l), args.scores_out)
        payload["scores"] = str(args.scores_out)
    _emit(args, payload, f"fusion head {model.input_width} -> {model.classes}, "
          f"final loss {history[-1]:.4f} -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cache = read_cache(args.cache)
    for k in args.topk:
        if not 1 <= k <= cache.e:
            raise UsageError(f"--topk {k} outside [1, {cache.e}]")
    max_rank = args.rank or min(max(args.topk), cache.e)
    report = evaluate(cache.scores, cache.labels, topk=args.topk, max_rank=max_rank)
    if args.csv:
        write_curve_csv(args.csv, report.rank_accuracy)
        if not args.no_plot:
            plot_rank_curves(Path(args.csv).with_suffix(".png"), {cache.network_id: report.rank_accuracy},
                             title="accuracy vs rank")
    if args.plot:
        plot_rank_curves(args.plot, {cache.network_id: report.rank_accuracy}, title="accuracy vs rank")
    payload = {"network": cache.network_id, **report.to_dict()}
    _emit(args, payload, report_text(report, cache.network_id))
    return EXIT_OK


# -- wiring --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ensnet", description="Weighted ensemble of CNN score vectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("parse", cmd_parse, "parse architecture text and print its canonical form")
    _add_spec_args(p, classes=False)

    p = add("shapes", cmd_shapes, "trace layer output shapes")
    _add_spec_args(p)

    p = add("params", cmd_params, "count parameters per layer")
    _add_spec_args(p)

    p = add("prep", cmd_prep, "HSV intensity equalization of a PPM image or directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--max-side", type=int, default=512)
    p.add_argument("--fit", type=lambda s: tuple(int(v) for v in s.lower().split("x")), metavar="WxH")

    p = add("synth", cmd_synth, "write a synthetic PPM dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=16)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    p = add("split", cmd_split, "per-class random train/test split manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--per-class-train", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train a backbone network")
    _add_spec_args(p, classes=False)
    p.add_argument("--root", required=True)
    p.add_argument("--manifest")
    p.add_argument("--equalize", action="store_true", help="equalize intensity before training")
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_schedule_args(p)

    p = add("extract", cmd_extract, "write a backbone's score vectors to a feature cache")
    _add_spec_args(p, classes=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--manifest")
    p.add_argument("--subset", choices=("train", "test"), default="test")
    p.add_argument("--equalize", action="store_true")
    p.add_argument("--network-id")
    p.add_argument("--out", required=True)

    p = add("search-weights", cmd_search_weights, "grid-search fusion weights on the simplex")
    p.add_argument("--val", nargs="+", required=True, help="one cache per network")
    p.add_argument("--train", nargs="+", help="caches to train candidate heads on (default: --val)")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--out", help="write the chosen weights as JSON")
    _add_schedule_args(p)

    p = add("fuse-train", cmd_fuse_train, "train the fusion head")
    p.add_argument("--train", nargs="+", required=True, help="one cache per network")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--weights", type=_float_list)
    g.add_argument("--weights-file")
    p.add_argument("--out", required=True)
    p.add_argument("--apply", nargs="+", help="caches to score with the trained head")
    p.add_argument("--scores-out", default="ensemble.ensf")
    _add_schedule_args(p)

    p = add("eval", cmd_eval, "top-k accuracies and rank curve from a feature cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--topk", type=_int_list, default=[1, 5, 10])
    p.add_argument("--rank", type=int, help="rank-curve length (default: largest k)")
    p.add_argument("--csv", help="write rank,accuracy CSV (and a PNG figure next to it)")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG next to --csv")
    p.add_argument("--plot", help="write the rank-curve figure here")
    return parser


DATA_ERRORS = (DatasetError, CacheError, CheckpointError, PPMError, ensemble.FusionError, OSError, ValueError, KeyError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"ensnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArchError as exc:
        print(f"ensnet: architecture error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"ensnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


cli_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
