"""Ablation harness: trains the five flag configurations with a shared seed
and tabulates translation accuracy and Fréchet distance per row."""

from __future__ import annotations

import json
from pathlib import Path

from .attributes import AttributeSchema
from .data import FACES_SCHEMA, BACKGROUNDS_SCHEMA, OracleClassifier, load_dataset
from .errors import RangeError
from .evaluation import (ClassifierConfig, evaluate, real_images_by_target,
                         single_attribute_targets, train_small_classifier)
from .losses import LossWeights
from .training import ABLATION_ROWS, TrainConfig, resolve_weights_for_flags, train


def run_ablation(data_dir, out_dir, steps: int = 2000, seed: int = 0,
                 batch_size: int = 16, test_count: int = 500,
                 classifier_steps: int = 2000) -> dict:
    """Train every ablation row sequentially and emit ablation.json plus a
    Markdown table. The feature embedder is trained once on the real training
    split and shared by all rows so their FID values are comparable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, records, manifest = load_dataset(data_dir)
    if test_count >= len(records):
        raise RangeError(f"test_count {test_count} too large for {len(records)} records")
    train_recs = records[:-test_count]
    test_recs = records[-test_count:]
    image_size = manifest.get("image_size", 32)
    targets = single_attribute_targets(schema)

    classifier = train_small_classifier(
        train_recs, schema,
        ClassifierConfig(image_size=image_size, steps=classifier_steps, seed=seed))
    if schema.names in (FACES_SCHEMA.names, BACKGROUNDS_SCHEMA.names):
        scorer = OracleClassifier(schema)
    else:
        scorer = classifier
    real_by_target = real_images_by_target(train_recs, targets, schema)

    results: dict[str, dict] = {}
    for row_name, flags in ABLATION_ROWS.items():
        weights = resolve_weights_for_flags(LossWeights.defaults_for(schema.mode),
                                            flags)
        config = TrainConfig(total_g_steps=steps, batch_size=batch_size,
                             weights=weights, ablation=flags, seed=seed,
                             checkpoint_every=steps, log_every=max(1, steps // 100))
        run_dir = out / "rows" / row_name.replace("+", "_")
        state = train(config, train_recs, schema, run_dir)
        report = evaluate(state.generator, test_recs, targets, scorer,
                          real_by_target, classifier.embed, schema,
                          config_info={"row": row_name, "seed": seed,
                                       "steps": steps})
        results[row_name] = {"fid": report.mean_fid, "acc": report.mean_accuracy,
                             "run_dir": str(run_dir)}

    table = {
        "rows": results,
        "seed": seed,
        "steps": steps,
        "row_order_by_fid": sorted(results, key=lambda r: results[r]["fid"]),
        "row_order_by_acc": sorted(results, key=lambda r: -results[r]["acc"]),
    }
    lines = ["| configuration | FID (lower better) | Acc (higher better) |",
             "|---|---|---|"]
    for row_name in ABLATION_ROWS:
        r = results[row_name]
        lines.append(f"| {row_name} | {r['fid']:.3f} | {r['acc']:.4f} |")
    table["markdown"] = "\n".join(lines)

    with open(out / "ablation.json", "w") as fh:
        json.dump(table, fh, indent=1)
    with open(out / "ablation.md", "w") as fh:
        fh.write(table["markdown"] + "\n")
    return table
