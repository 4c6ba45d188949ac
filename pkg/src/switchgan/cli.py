"""Command-line entry points.

Commands: synth-data, train, translate, sweep, evaluate, ablate, serve.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .attributes import AttributeSchema, IntensityVector, LabelMode
from .errors import SwitchGANError
from .losses import AdvVariant, LossWeights


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="switchgan",
                     description="Multi-domain image translation with feature "
                                 "switching and attribute-intensity control.")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)

    p = sub.add_parser("synth-data",
                       help="generate the synthetic labelled dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--count", type=int, required=True, help="number of images")
    p.add_argument("--size", type=int, default=32, help="square image size")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--task", choices=["faces", "backgrounds"], default="faces",
                   help="faces: n=3 multi-hot; backgrounds: n=4 one-hot")

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--steps", type=int, default=8000, help="generator updates")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--n-critic", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gate", action="store_true", help="enable the gate module")
    p.add_argument("--cfm", action="store_true",
                   help="enable conditional feature matching")
    p.add_argument("--fm", action="store_true", help="enable plain feature matching")
    p.add_argument("--no-self", dest="self_recon", action="store_false",
                   help="disable the self-reconstruction term")
    p.add_argument("--adv", choices=["hinge_gp", "wgan_gp"], default="hinge_gp")
    p.add_argument("--lambda-cyc", type=float, default=None)
    p.add_argument("--lambda-self", type=float, default=None)
    p.add_argument("--lambda-c", type=float, default=None)
    p.add_argument("--lambda-cfm", type=float, default=None)
    p.add_argument("--lambda-fm", type=float, default=None)
    p.add_argument("--gp-coeff", type=float, default=10.0)
    p.add_argument("--checkpoint-every", type=int, default=1000)
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--image-size", type=int, default=None,
                   help="override the dataset image size")
    p.add_argument("--base-channels", type=int, default=32)

    p = sub.add_parser("translate",
                       help="translate one image with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", default=[], metavar="NAME=BIT",
                   help="target attribute bit, repeatable")
    p.add_argument("--alpha", action="append", default=[], metavar="NAME=REAL",
                   help="attribute intensity in [0,1], repeatable (default 1)")

    p = sub.add_parser("sweep",
                       help="intensity sweep grid for one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="output grid PNG")
    p.add_argument("--set", action="append", default=[], metavar="NAME=BIT")
    p.add_argument("--alphas", default="0.25,0.5,0.75,1",
                   help="comma-separated intensities applied to all set attributes")

    p = sub.add_parser("evaluate",
                       help="translation accuracy and Fréchet distance")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--test-count", type=int, default=500,
                   help="records from the end of the dataset used as the test split")
    p.add_argument("--classifier", choices=["oracle", "trained"], default="oracle")
    p.add_argument("--embedder", choices=["trained", "pixels"], default="trained")
    p.add_argument("--classifier-steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate",
                       help="run the five flag configurations and tabulate")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="ablation output directory")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--test-count", type=int, default=500)
    p.add_argument("--classifier-steps", type=int, default=2000)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-body-bytes", type=int, default=4 * 1024 * 1024)
    p.add_argument("--workers", type=int, default=2,
                   help="concurrent forward passes")
    return parser


def _parse_pairs(pairs: list[str], kind: str, cast) -> dict:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise CliUsageError(f"--{kind} expects NAME=VALUE, got {pair!r}")
        try:
            out[name] = cast(value)
        except ValueError:
            raise CliUsageError(f"--{kind} {pair!r}: bad value {value!r}") from None
    return out


def _load_dataset(path):
    schema, records, manifest = data_mod.load_dataset(path)
    return schema, records, manifest


def _cmd_synth_data(args) -> int:
    spec = data_mod.SynthSpec(count=args.count, image_size=args.size,
                              seed=args.seed, task=args.task)
    records, manifest = data_mod.synth_generate(spec)
    data_mod.save_dataset(records, manifest, args.out)
    print(f"wrote {len(records)} images and manifest.json under {args.out}")
    return 0


def _weights_for_train(args, mode: LabelMode) -> LossWeights:
    base = LossWeights.defaults_for(mode, adv_variant=AdvVariant(args.adv),
                                    gp_coeff=args.gp_coeff)
    kw = {}
    if args.lambda_cyc is not None:
        kw["lambda_cyc"] = args.lambda_cyc
    if args.lambda_self is not None:
        kw["lambda_self"] = args.lambda_self
    if args.lambda_c is not None:
        kw["lambda_c"] = args.lambda_c
    if args.lambda_cfm is not None:
        kw["lambda_cfm"] = args.lambda_cfm
    if args.lambda_fm is not None:
        kw["lambda_fm"] = args.lambda_fm
    if kw:
        base = base.with_(**kw)
    return base


def _cmd_train(args) -> int:
    from .generator import GeneratorConfig
    from .training import TrainConfig, resolve_weights_for_flags, train

    schema, records, manifest = _load_dataset(args.data)
    flags = set()
    if args.self_recon:
        flags.add("self")
    if args.gate:
        flags.add("gate")
    if args.cfm:
        flags.add("cfm")
    if args.fm:
        flags.add("fm")
    weights = resolve_weights_for_flags(_weights_for_train(args, schema.mode), flags)
    config = TrainConfig(
        total_g_steps=args.steps, batch_size=args.batch, lr_g=args.lr, lr_d=args.lr,
        n_critic=args.n_critic, weights=weights, ablation=frozenset(flags),
        seed=args.seed, checkpoint_every=args.checkpoint_every,
        log_every=args.log_every)
    image_size = args.image_size or manifest.get("image_size", 32)
    gen_config = GeneratorConfig.desk_scale(
        schema.n, gate_enabled="gate" in flags, image_size=image_size,
        base_channels=args.base_channels) if args.resume is None else None
    state = train(config, records, schema, args.out, gen_config=gen_config,
                  resume_from=args.resume)
    print(f"trained {state.g_step} generator steps "
          f"({state.d_step} discriminator steps); run directory: {args.out}")
    return 0


def _open_image(path):
    from PIL import Image

    try:
        return Image.open(path)
    except (OSError, ValueError) as e:
        raise SwitchGANError(f"cannot open image {path}: {e}") from e


def _cmd_translate(args) -> int:
    from .inference import load_model_bundle, resolve_assignment, translate_image

    bundle = load_model_bundle(args.ckpt)
    set_map = _parse_pairs(args.set, "set", int)
    alpha_map = _parse_pairs(args.alpha, "alpha", float)
    for name in list(set_map) + list(alpha_map):
        if name not in bundle.schema.names:
            raise CliUsageError(
                f"unknown attribute {name!r}; valid attributes: "
                f"{', '.join(bundle.schema.names)}")
    label, alpha = resolve_assignment(bundle.schema, set_map, alpha_map)
    image = _open_image(args.image)
    translate_image(bundle, image, label, alpha).save(args.out)
    print(f"wrote {args.out} (label={list(label.bits)}, "
          f"alpha={[round(a, 3) for a in alpha.alphas]})")
    return 0


def _cmd_sweep(args) -> int:
    from PIL import Image

    from .evaluation import intensity_sweep
    from .inference import load_model_bundle, resolve_assignment

    bundle = load_model_bundle(args.ckpt)
    set_map = _parse_pairs(args.set, "set", int)
    for name in set_map:
        if name not in bundle.schema.names:
            raise CliUsageError(
                f"unknown attribute {name!r}; valid attributes: "
                f"{', '.join(bundle.schema.names)}")
    label, _ = resolve_assignment(bundle.schema, set_map, {})
    try:
        steps = [float(v) for v in args.alphas.split(",") if v.strip()]
    except ValueError:
        raise CliUsageError(f"--alphas expects comma-separated reals, got "
                            f"{args.alphas!r}") from None
    if not steps:
        raise CliUsageError("--alphas needs at least one value")
    src = np.asarray(_open_image(args.image).convert("RGB"))
    src = data_mod.to_uint8(data_mod.preprocess(src, bundle.native_size))
    alphas = [IntensityVector.of([a if b else 1.0 for b in label.bits])
              for a in steps]
    grid, meta = intensity_sweep(bundle.generator, src, label, alphas,
                                 bundle.schema)
    Image.fromarray(grid).save(args.out)
    sidecar = Path(args.out).with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump({"cells": meta, "alphas": steps}, fh, indent=1)
    print(f"wrote {args.out} and {sidecar} ({len(meta)} cells)")
    return 0


def _cmd_evaluate(args) -> int:
    from .data import OracleClassifier
    from .evaluation import (ClassifierConfig, PixelEmbedder, evaluate,
                             real_images_by_target, single_attribute_targets,
                             train_small_classifier)
    from .inference import load_model_bundle

    bundle = load_model_bundle(args.ckpt)
    schema, records, manifest = _load_dataset(args.data)
    if schema != bundle.schema:
        raise SwitchGANError("dataset schema does not match the checkpoint schema")
    if args.test_count >= len(records):
        raise SwitchGANError(
            f"--test-count {args.test_count} needs a dataset larger than that")
    train_recs = records[:-args.test_count]
    test_recs = records[-args.test_count:]
    targets = single_attribute_targets(schema)

    classifier = None
    if args.classifier == "trained" or args.embedder == "trained":
        classifier = train_small_classifier(
            train_recs, schema,
            ClassifierConfig(image_size=manifest.get("image_size", 32),
                             steps=args.classifier_steps, seed=args.seed))
    scorer = (OracleClassifier(schema) if args.classifier == "oracle"
              else classifier)
    embedder = classifier.embed if args.embedder == "trained" else PixelEmbedder()

    real_by_target = real_images_by_target(train_recs, targets, schema)
    report = evaluate(bundle.generator, test_recs, targets, scorer, real_by_target,
                      embedder, schema,
                      config_info={"ckpt": bundle.checkpoint_digest,
                                   "classifier": args.classifier,
                                   "embedder": args.embedder,
                                   "test_count": args.test_count})
    out = report.to_json_dict()
    if classifier is not None:
        out["classifier_heldout_accuracy"] = classifier.heldout_accuracy
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=1)
    print(f"mean accuracy {report.mean_accuracy:.4f}, mean FID "
          f"{report.mean_fid:.3f}; report written to {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    from .ablation import run_ablation

    table = run_ablation(data_dir=args.data, out_dir=args.out, steps=args.steps,
                         seed=args.seed, batch_size=args.batch,
                         test_count=args.test_count,
                         classifier_steps=args.classifier_steps)
    print(table["markdown"])
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .inference import load_model_bundle
    from .service import create_app

    bundle = load_model_bundle(args.ckpt)
    app = create_app(bundle, max_body_bytes=args.max_body_bytes,
                     workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "synth-data": _cmd_synth_data,
    "train": _cmd_train,
    "translate": _cmd_translate,
    "sweep": _cmd_sweep,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except CliUsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except SwitchGANError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
