"""Acceptance criteria for the whole toolkit.

Each test prints one `ACCEPTANCE <criterion>: PASS|FAIL` line. The
end-to-end criteria train real models at desk scale and take hours on a
small CPU; everything else finishes in minutes.
"""

import base64
import contextlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from switchgan.attributes import (AttributeSchema, IntensityVector, LabelMode,
                                  LabelVector)
from switchgan.data import (FACES_SCHEMA, OracleClassifier, SynthSpec,
                            batch_to_tensor, synth_generate, to_uint8)
from switchgan.discriminator import Discriminator, DiscriminatorConfig
from switchgan.errors import FormatError
from switchgan.evaluation import (ClassifierConfig, FeatureMoments, fid,
                                  fid_protocol, feature_moments,
                                  real_images_by_target, single_attribute_targets,
                                  train_small_classifier, translation_accuracy)
from switchgan.generator import Generator, GeneratorConfig
from switchgan.losses import (AdvVariant, LossWeights, adv_d_loss, adv_g_loss,
                              cfm_loss, classification_loss, fm_loss,
                              gradient_penalty, reconstruction_loss)
from switchgan.switching import feature_switch, feature_switch_grad_check
from switchgan.training import (TrainConfig, load_checkpoint, save_checkpoint,
                                train)

pytestmark = pytest.mark.acceptance


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL", flush=True)
        raise
    print(f"\nACCEPTANCE {name}: PASS", flush=True)


def _accept_dir(tmp_path_factory, name: str) -> Path:
    base = os.environ.get("SWITCHGAN_ACCEPT_DIR")
    if base:
        path = Path(base) / name
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp(name)


def central_diff_max_rel(loss_fn, param, indices, h=1e-6):
    """Max relative error between autograd and central differences on the
    chosen parameter entries."""
    loss = loss_fn()
    if param.grad is not None:
        param.grad = None
    loss.backward()
    analytic = param.grad.flatten()
    flat = param.data.view(-1)
    max_rel = 0.0
    for idx in indices:
        orig = flat[idx].item()
        flat[idx] = orig + h
        plus = loss_fn().item()
        flat[idx] = orig - h
        minus = loss_fn().item()
        flat[idx] = orig
        numeric = (plus - minus) / (2 * h)
        denom = max(abs(numeric), abs(analytic[idx].item()), 1e-10)
        max_rel = max(max_rel, abs(numeric - analytic[idx].item()) / denom)
    return max_rel


# --- exact algebraic identities ---------------------------------------------

class TestExactAlgebraicIdentities:
    def test_exact_algebraic_identities(self):
        with criterion("exact-algebraic-identities"):
            rng = np.random.default_rng(0)
            # one-hot feature switch selects a single branch, bit for bit
            branches = [torch.tensor(rng.normal(size=(2, 4, 3, 3)),
                                     dtype=torch.float32) for _ in range(4)]
            assert torch.equal(feature_switch(branches, [0, 0, 1, 0]), branches[2])

            # gate linearity and homogeneity are exact for representable sums
            g1 = [0.25, 0.0, 0.5, 0.125]
            g2 = [0.25, 0.5, 0.25, 0.25]
            lhs = feature_switch(branches, [a + b for a, b in zip(g1, g2)])
            rhs = feature_switch(branches, g1) + feature_switch(branches, g2)
            assert torch.allclose(lhs, rhs, atol=1e-6)
            assert torch.equal(feature_switch(branches, [0.5 * v for v in g1]),
                               0.5 * feature_switch(branches, g1))

            cfg = GeneratorConfig(image_size=16, base_channels=8, n_branches=3,
                                  n_res_blocks_encoder=1, n_res_blocks_decoder=1,
                                  gate_enabled=True)
            gen = Generator(cfg, seed=1)
            x = torch.tensor(rng.uniform(-1, 1, (2, 3, 16, 16)), dtype=torch.float32)
            lbl = LabelVector.of([1, 0, 1])

            # full intensity reproduces the training-path forward bitwise
            assert torch.equal(gen.translate(x, lbl, IntensityVector.ones(3)),
                               gen.translate(x, lbl))
            # zero intensity reproduces the content image bitwise
            assert torch.equal(gen.translate(x, lbl, IntensityVector.zeros(3)),
                               gen.content_image(x))
            # branch isolation: off-branch edits cannot move the output
            before = gen.translate(x, LabelVector.of([0, 1, 0]))
            with torch.no_grad():
                for p in gen.branches[0].parameters():
                    p.add_(1.0)
            assert torch.equal(before, gen.translate(x, LabelVector.of([0, 1, 0])))

            dcfg = DiscriminatorConfig(image_size=16, base_channels=8, n_branches=3,
                                       n_trunk_layers=3)
            disc = Discriminator(dcfg, seed=2)
            trunk_out = disc.trunk_features(x)[-1]
            # one-hot adversary score equals the single head, bit for bit
            assert torch.equal(disc.adversary_score(x, LabelVector.of([0, 1, 0])),
                               disc.adv_heads[1](trunk_out).mean(dim=(1, 2, 3)))
            # head isolation: gradients of unselected heads are exactly zero
            score = disc.adversary_score(x, LabelVector.of([1, 0, 0])).sum()
            others = [p for h in (disc.adv_heads[1], disc.adv_heads[2])
                      for p in h.parameters()]
            grads = torch.autograd.grad(score, others, allow_unused=True)
            assert all(g is None or torch.count_nonzero(g) == 0 for g in grads)


# --- gradient correctness -----------------------------------------------------

class TestGradientCorrectness:
    def test_gradient_correctness(self):
        with criterion("gradient-correctness"):
            report = feature_switch_grad_check([(2, 2)] * 3, [0.5, 0.0, 1.0],
                                               step=1e-5, tolerance=1e-4)
            assert report.passed, report

            gcfg = GeneratorConfig(image_size=16, base_channels=4, n_branches=2,
                                   n_res_blocks_encoder=0, n_res_blocks_decoder=0,
                                   gate_enabled=True)
            gen = Generator(gcfg, seed=3, dtype=torch.float64)
            rng = np.random.default_rng(4)
            x = torch.tensor(rng.uniform(-1, 1, (2, 3, 16, 16)), dtype=torch.float64)
            lbl = LabelVector.of([1, 1])
            rel = central_diff_max_rel(
                lambda: gen.translate(x, lbl, IntensityVector.of([1.0, 0.5])).mean(),
                gen.branches[0].net[0].weight, [0, 9, 55])
            assert rel < 1e-3, f"translate gradient rel err {rel}"

            dcfg = DiscriminatorConfig(image_size=16, base_channels=4, n_branches=2,
                                       n_trunk_layers=2)
            disc = Discriminator(dcfg, seed=5, dtype=torch.float64)
            x_real = torch.tensor(rng.uniform(-1, 1, (2, 3, 16, 16)),
                                  dtype=torch.float64)
            x_fake = torch.tensor(rng.uniform(-1, 1, (2, 3, 16, 16)),
                                  dtype=torch.float64)
            bits = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)

            rel = central_diff_max_rel(
                lambda: disc.adversary_score_batch(x_real, bits).sum(),
                disc.trunk[0][0].weight, [0, 7, 21])
            assert rel < 1e-3, f"adversary score gradient rel err {rel}"

            for variant in (AdvVariant.HINGE_GP, AdvVariant.WGAN_GP):
                w = LossWeights(adv_variant=variant, gp_coeff=10.0)

                def adv_loss():
                    loss, _ = adv_d_loss(disc.adversary_score_batch, x_real, bits,
                                         x_fake, bits, w, np.random.default_rng(42))
                    return loss

                rel = central_diff_max_rel(adv_loss, disc.trunk[0][0].weight, [2, 11])
                assert rel < 1e-3, f"{variant} adv_d gradient rel err {rel}"

            def gp_only():
                return gradient_penalty(disc.adversary_score_batch, x_real, x_fake,
                                        bits, np.random.default_rng(43))

            rel = central_diff_max_rel(gp_only, disc.trunk[0][0].weight, [1, 6])
            assert rel < 1e-3, f"gradient penalty gradient rel err {rel}"

            xg = x_fake.clone().requires_grad_(True)
            loss = adv_g_loss(disc.adversary_score_batch, xg, bits)
            analytic = torch.autograd.grad(loss, xg)[0].flatten()
            flat = xg.detach().clone().view(-1)
            for idx in (5, 99):
                orig = flat[idx].item()
                flat[idx] = orig + 1e-6
                plus = adv_g_loss(disc.adversary_score_batch, flat.view_as(xg),
                                  bits).item()
                flat[idx] = orig - 1e-6
                minus = adv_g_loss(disc.adversary_score_batch, flat.view_as(xg),
                                   bits).item()
                flat[idx] = orig
                numeric = (plus - minus) / 2e-6
                denom = max(abs(numeric), abs(analytic[idx].item()), 1e-10)
                assert abs(numeric - analytic[idx].item()) / denom < 1e-3

            rel = central_diff_max_rel(
                lambda: classification_loss(disc.classify(x_real), bits,
                                            LabelMode.MULTI_HOT),
                disc.cls_head.weight, [0, 3])
            assert rel < 1e-3, f"classification gradient rel err {rel}"

            rel = central_diff_max_rel(
                lambda: cfm_loss(disc.adversary_features_batch, x_real, x_fake, bits),
                disc.adv_heads[0].feature_net[0].weight, [0, 13])
            assert rel < 1e-3, f"cfm gradient rel err {rel}"

            rel = central_diff_max_rel(
                lambda: fm_loss(disc.trunk_features, x_real, x_fake, 2),
                disc.trunk[1][0].weight, [4, 17])
            assert rel < 1e-3, f"fm gradient rel err {rel}"

            a = torch.tensor(rng.uniform(-1, 1, (2, 3, 4, 4)), dtype=torch.float64,
                             requires_grad=True)
            b = torch.tensor(rng.uniform(-1, 1, (2, 3, 4, 4)), dtype=torch.float64)
            analytic = torch.autograd.grad(reconstruction_loss(a, b), a)[0].flatten()
            flat = a.detach().clone().view(-1)
            orig = flat[10].item()
            flat[10] = orig + 1e-6
            plus = reconstruction_loss(flat.view_as(a), b).item()
            flat[10] = orig - 1e-6
            minus = reconstruction_loss(flat.view_as(a), b).item()
            numeric = (plus - minus) / 2e-6
            assert abs(numeric - analytic[10].item()) < 1e-6


# --- loss closed forms --------------------------------------------------------

class TestLossClosedForms:
    def test_loss_closed_forms(self):
        with criterion("loss-closed-forms"):
            rng = np.random.default_rng(6)
            # gradient penalty on a linear scorer with ||w|| = 3 equals 4
            w = torch.zeros(3, 4, 4, dtype=torch.float64)
            w[1, 2, 2] = 3.0
            x = torch.tensor(rng.normal(size=(4, 3, 4, 4)))
            y = torch.tensor(rng.normal(size=(4, 3, 4, 4)))

            def lin(z, c):
                return (z.flatten(1) * w.flatten()).sum(dim=1)

            gp = gradient_penalty(lin, x, y, None, np.random.default_rng(7))
            assert abs(gp.item() - 4.0) < 1e-6
            w[1, 2, 2] = 1.0
            gp = gradient_penalty(lin, x, y, None, np.random.default_rng(8))
            assert abs(gp.item()) < 1e-6

            # classification closed forms
            assert abs(classification_loss(torch.zeros(1, 4),
                                           LabelVector.one_hot(1, 4),
                                           LabelMode.ONE_HOT).item()
                       - math.log(4)) < 1e-6
            assert abs(classification_loss(torch.zeros(1, 2),
                                           LabelVector.of([1, 0]),
                                           LabelMode.MULTI_HOT).item()
                       - math.log(2)) < 1e-6

            # hinge and Wasserstein main terms on stub scorers
            x_real = torch.zeros(4, 3, 4, 4)
            x_fake = torch.ones(4, 3, 4, 4)

            def zero_score(z, c):
                return torch.zeros(z.shape[0], dtype=z.dtype)

            hinge = LossWeights(adv_variant=AdvVariant.HINGE_GP, gp_coeff=0.0)
            loss, _ = adv_d_loss(zero_score, x_real, None, x_fake, None, hinge,
                                 np.random.default_rng(9))
            assert abs(loss.item() - 2.0) < 1e-6
            wgan = LossWeights(adv_variant=AdvVariant.WGAN_GP, gp_coeff=0.0)
            loss, _ = adv_d_loss(zero_score, x_real, None, x_fake, None, wgan,
                                 np.random.default_rng(10))
            assert abs(loss.item()) < 1e-6

            def margin_score(z, c):
                flat = z.flatten(1).mean(dim=1)
                return torch.where(flat < 0.5, torch.full_like(flat, 2.0),
                                   torch.full_like(flat, -2.0))

            loss, _ = adv_d_loss(margin_score, x_real, None, x_fake, None, hinge,
                                 np.random.default_rng(11))
            assert abs(loss.item()) < 1e-6

            def const5(z, c):
                return torch.full((z.shape[0],), 5.0)

            assert abs(adv_g_loss(const5, x_fake, None).item() + 5.0) < 1e-6


# --- Fréchet distance oracle --------------------------------------------------

class TestFrechetOracle:
    def test_frechet_oracle_equivalence(self):
        with criterion("frechet-oracle-equivalence"):
            rng = np.random.default_rng(12)
            for _ in range(40):
                d = int(rng.integers(1, 3))
                mu1, mu2 = rng.normal(size=(2, d))
                v1, v2 = rng.uniform(0.05, 5.0, size=(2, d))
                m1 = FeatureMoments(mean=mu1, cov=np.diag(v1))
                m2 = FeatureMoments(mean=mu2, cov=np.diag(v2))
                expected = float(((mu1 - mu2) ** 2).sum()
                                 + ((np.sqrt(v1) - np.sqrt(v2)) ** 2).sum())
                assert abs(fid(m1, m2) - expected) < 1e-6
                assert abs(fid(m1, m2) - fid(m2, m1)) <= 1e-8

            feats = rng.normal(size=(50, 6))
            cov = np.cov(feats, rowvar=False)
            m = FeatureMoments(mean=feats.mean(axis=0), cov=(cov + cov.T) / 2)
            assert abs(fid(m, m)) <= 1e-8


# --- end-to-end desk-scale experiment ------------------------------------------

E2E_DATASET_SEED = 7
E2E_TRAIN_SEED = 0
E2E_TRAIN_COUNT = 4000
E2E_TEST_COUNT = 500
E2E_G_STEPS = 8000


@pytest.fixture(scope="session")
def e2e_run(tmp_path_factory):
    """Train the gated model with the strongest objective on the synthetic
    faces task: 4,000 train / 500 test images at 32x32, 8,000 generator
    updates (40,000 discriminator updates), batch 16, fixed seeds."""
    out = _accept_dir(tmp_path_factory, "e2e")
    records, manifest = synth_generate(
        SynthSpec(count=E2E_TRAIN_COUNT + E2E_TEST_COUNT, image_size=32,
                  seed=E2E_DATASET_SEED))
    schema = AttributeSchema.from_json_dict(manifest["schema"])
    train_recs = records[:E2E_TRAIN_COUNT]
    test_recs = records[E2E_TRAIN_COUNT:]
    config = TrainConfig(total_g_steps=E2E_G_STEPS, batch_size=16,
                         seed=E2E_TRAIN_SEED,
                         weights=LossWeights.multi_hot_defaults(),
                         ablation=frozenset({"self", "gate", "cfm"}),
                         checkpoint_every=2000, log_every=10)
    state = train(config, train_recs, schema, out / "run")
    return {"state": state, "schema": schema, "train": train_recs,
            "test": test_recs, "run_dir": out / "run"}


class TestEndToEnd:
    def test_end_to_end_synthetic(self, e2e_run):
        with criterion("end-to-end-synthetic"):
            state = e2e_run["state"]
            schema = e2e_run["schema"]
            assert state.g_step == E2E_G_STEPS
            assert state.d_step == E2E_G_STEPS * 5

            # (c) the loss log holds no NaN or Inf anywhere
            log_path = e2e_run["run_dir"] / "losses.jsonl"
            for line in log_path.read_text().splitlines():
                rec = json.loads(line)
                for key, value in rec.items():
                    assert np.isfinite(value), f"{key} at step {rec['step']}"

            targets = single_attribute_targets(schema)
            oracle = OracleClassifier(schema)
            acc, mean_acc, total = translation_accuracy(
                state.generator, e2e_run["test"], targets, oracle, schema)

            clf = train_small_classifier(
                e2e_run["train"], schema,
                ClassifierConfig(image_size=32, steps=2000, seed=0))
            assert clf.heldout_accuracy is not None and clf.heldout_accuracy >= 0.99
            real_by_target = real_images_by_target(e2e_run["train"], targets, schema)
            fids, mean_fid, baseline = fid_protocol(
                state.generator, e2e_run["test"], targets, real_by_target,
                clf.embed, schema)

            report = {
                "accuracy": acc, "mean_accuracy": mean_acc,
                "classified_images": total,
                "fid": fids, "mean_fid": mean_fid, "baseline_fid": baseline,
                "classifier_heldout_accuracy": clf.heldout_accuracy,
            }
            with open(e2e_run["run_dir"] / "acceptance_report.json", "w") as fh:
                json.dump(report, fh, indent=1)
            print(f"\n  mean accuracy over single-attribute targets: {mean_acc:.4f}")
            for name in fids:
                print(f"  {name}: acc={acc[name]:.4f} "
                      f"fid={fids[name]:.3f} baseline={baseline[name]:.3f}")

            # (a) oracle accuracy over all single-attribute targets
            assert mean_acc >= 0.85, f"mean accuracy {mean_acc:.4f} below 0.85"
            # (b) translation moves every target group toward its domain
            for name in fids:
                assert fids[name] < baseline[name], (
                    f"target {name}: FID {fids[name]:.3f} did not beat the "
                    f"source baseline {baseline[name]:.3f}")


class TestIntensityMonotonicity:
    def test_intensity_monotonicity(self, e2e_run):
        with criterion("intensity-monotonicity"):
            state = e2e_run["state"]
            gen = state.generator
            levels = [0.0, 0.25, 0.5, 0.75, 1.0]
            label = LabelVector.of([1, 1, 1])
            distances = {lvl: 0.0 for lvl in levels}
            count = 0
            with torch.no_grad():
                for start in range(0, len(e2e_run["test"]), 64):
                    chunk = e2e_run["test"][start:start + 64]
                    x = batch_to_tensor(np.stack([r.image for r in chunk]))
                    content = gen.content_image(x)
                    for lvl in levels:
                        out = gen.translate(x, label,
                                            IntensityVector.of([lvl] * 3))
                        distances[lvl] += float((out - content).abs().sum())
                    count += x.numel()
            curve = [distances[lvl] / count for lvl in levels]
            print("\n  intensity curve:",
                  " ".join(f"{lvl}:{v:.5f}" for lvl, v in zip(levels, curve)))
            assert curve[0] == 0.0, "zero intensity must reproduce the content image"
            tolerance = 0.02 * curve[-1]
            for lo, hi in zip(curve, curve[1:]):
                assert hi >= lo - tolerance, f"curve not monotone: {curve}"


# --- ablation harness -----------------------------------------------------------

class TestAblationHarness:
    def test_ablation_harness(self, tmp_path_factory, dataset_large):
        with criterion("ablation-harness"):
            from switchgan.ablation import run_ablation

            out = _accept_dir(tmp_path_factory, "ablation")
            table = run_ablation(data_dir=dataset_large, out_dir=out, steps=2000,
                                 seed=0, batch_size=16, test_count=500,
                                 classifier_steps=2000)
            rows = table["rows"]
            assert set(rows) == {"baseline", "gate", "gate+fm", "gate+fm+cfm",
                                 "gate+cfm"}
            for name, row in rows.items():
                assert np.isfinite(row["fid"]) and row["fid"] >= 0
                assert 0.0 <= row["acc"] <= 1.0
                assert (Path(row["run_dir"]) / "config.json").exists()
                conf = json.loads((Path(row["run_dir"]) / "config.json").read_text())
                assert conf["train_config"]["seed"] == 0
            assert (out / "ablation.json").exists()
            assert (out / "ablation.md").exists()
            print("\n  row order by FID (best first):",
                  ", ".join(table["row_order_by_fid"]))
            print("  row order by accuracy (best first):",
                  ", ".join(table["row_order_by_acc"]))


@pytest.fixture(scope="session")
def dataset_large(tmp_path_factory):
    """Shared synthetic dataset directory for the ablation harness."""
    out = _accept_dir(tmp_path_factory, "dataset")
    records, manifest = synth_generate(
        SynthSpec(count=E2E_TRAIN_COUNT + E2E_TEST_COUNT, image_size=32,
                  seed=E2E_DATASET_SEED))
    from switchgan.data import save_dataset

    save_dataset(records, manifest, out)
    return out


# --- determinism and persistence -------------------------------------------------

class TestDeterminismPersistence:
    def test_determinism_and_persistence(self, tmp_path_factory):
        with criterion("determinism-and-persistence"):
            out = _accept_dir(tmp_path_factory, "determinism")
            records, manifest = synth_generate(SynthSpec(count=256, image_size=32,
                                                         seed=17))
            schema = AttributeSchema.from_json_dict(manifest["schema"])
            gen_cfg = GeneratorConfig(image_size=32, base_channels=16, n_branches=3,
                                      gate_enabled=True)
            disc_cfg = DiscriminatorConfig(image_size=32, base_channels=16,
                                           n_branches=3, n_trunk_layers=4)

            def cfg(steps, ckpt_every):
                return TrainConfig(total_g_steps=steps, batch_size=8, seed=23,
                                   weights=LossWeights.multi_hot_defaults(),
                                   ablation=frozenset({"self", "gate", "cfm"}),
                                   checkpoint_every=ckpt_every, log_every=1)

            # identical 100-step logs for identical seeds
            train(cfg(100, 0), records, schema, out / "a",
                  gen_config=gen_cfg, disc_config=disc_cfg)
            train(cfg(100, 0), records, schema, out / "b",
                  gen_config=gen_cfg, disc_config=disc_cfg)
            assert (out / "a" / "losses.jsonl").read_bytes() == \
                   (out / "b" / "losses.jsonl").read_bytes()

            # checkpoint round-trip is bitwise
            full = train(cfg(150, 100), records, schema, out / "full",
                         gen_config=gen_cfg, disc_config=disc_cfg)
            snap = out / "snap.ckpt"
            save_checkpoint(full, snap)
            loaded = load_checkpoint(snap)
            for a, b in zip(full.generator.state_dict().values(),
                            loaded.generator.state_dict().values()):
                assert torch.equal(a, b)
            for a, b in zip(full.discriminator.state_dict().values(),
                            loaded.discriminator.state_dict().values()):
                assert torch.equal(a, b)
            x = batch_to_tensor(np.stack([records[0].image]))
            with torch.no_grad():
                assert torch.equal(full.generator.translate(x, LabelVector.of([1, 0, 0])),
                                   loaded.generator.translate(x, LabelVector.of([1, 0, 0])))

            # resume reproduces the uninterrupted tail within 1e-5 relative
            train(cfg(150, 100), records, schema, out / "resumed",
                  resume_from=out / "full" / "checkpoints" / "step_100.ckpt")

            def tail(path):
                rows = {}
                for line in (path / "losses.jsonl").read_text().splitlines():
                    rec = json.loads(line)
                    if rec["step"] > 100:
                        rows[rec["step"]] = rec
                return rows

            full_tail, resumed_tail = tail(out / "full"), tail(out / "resumed")
            assert set(full_tail) == set(resumed_tail) and len(full_tail) == 50
            for step, rec in full_tail.items():
                for key, value in rec.items():
                    other = resumed_tail[step][key]
                    assert value == pytest.approx(other, rel=1e-5, abs=1e-7), \
                        f"step {step} {key}: {value} vs {other}"

            # corrupted checkpoints are rejected
            blob = snap.read_bytes()
            bad = out / "bad.ckpt"
            bad.write_bytes(blob[: len(blob) // 3])
            with pytest.raises(FormatError):
                load_checkpoint(bad)


# --- service contract -------------------------------------------------------------

class TestServiceContract:
    def test_service_contract(self, tmp_path, gated_ckpt, ungated_ckpt, sample_image):
        with criterion("service-contract"):
            from fastapi.testclient import TestClient

            from switchgan.cli import main as cli_main
            from switchgan.inference import load_model_bundle
            from switchgan.service import create_app

            bundle = load_model_bundle(gated_ckpt)
            app = create_app(bundle, max_body_bytes=128 * 1024, workers=2)
            payload = base64.b64encode(Path(sample_image).read_bytes()).decode()

            with TestClient(app) as client:
                r = client.get("/v1/healthz")
                assert r.status_code == 200 and r.json()["model_loaded"] is True

                r = client.get("/v1/schema")
                assert r.status_code == 200
                body = r.json()
                assert body["names"] == ["hair_blond", "glasses", "smile"]
                assert body["gate_enabled"] is True
                assert body["checkpoint_digest"] == bundle.checkpoint_digest

                r = client.post("/v1/translate", json={
                    "image": payload, "set": {"smile": 1}, "alpha": {"smile": 0.5}})
                assert r.status_code == 200
                http_pixels = np.asarray(Image.open(io.BytesIO(
                    base64.b64decode(r.json()["image"]))).convert("RGB"))

                out = tmp_path / "cli.png"
                rc = cli_main(["translate", "--ckpt", str(gated_ckpt), "--image",
                               str(sample_image), "--set", "smile=1",
                               "--alpha", "smile=0.5", "--out", str(out)])
                assert rc == 0
                cli_pixels = np.asarray(Image.open(out).convert("RGB"))
                assert np.array_equal(http_pixels, cli_pixels)

                r = client.post("/v1/translate", json={"image": payload,
                                                       "set": {"smile": 0}})
                assert (r.status_code, r.json()["error"]) == (400, "label_zero")
                r = client.post("/v1/translate", json={
                    "image": payload, "set": {"smile": 1}, "alpha": {"smile": 2.0}})
                assert (r.status_code, r.json()["error"]) == (400, "alpha_range")
                r = client.post("/v1/translate", json={"image": "!!!",
                                                       "set": {"smile": 1}})
                assert (r.status_code, r.json()["error"]) == (400, "bad_base64")
                big = base64.b64encode(b"y" * 200 * 1024).decode()
                r = client.post("/v1/translate", json={"image": big,
                                                       "set": {"smile": 1}})
                assert (r.status_code, r.json()["error"]) == (413, "too_large")

                r = client.post("/v1/content", json={"image": payload})
                assert r.status_code == 200
                content_b64 = r.json()["image"]
                r = client.post("/v1/translate", json={
                    "image": payload, "set": {"smile": 1, "glasses": 1},
                    "alpha": {"hair_blond": 0.0, "glasses": 0.0, "smile": 0.0}})
                assert r.json()["image"] == content_b64

            with TestClient(create_app(load_model_bundle(ungated_ckpt))) as client:
                r = client.post("/v1/content", json={"image": payload})
                assert (r.status_code, r.json()["error"]) == (409, "gate_disabled")

            with TestClient(create_app(None)) as client:
                assert client.get("/v1/schema").status_code == 503
                assert client.post("/v1/translate", json={
                    "image": payload, "set": {"smile": 1}}).status_code == 503
                healthz = client.get("/v1/healthz")
                assert healthz.status_code == 200
                assert healthz.json()["model_loaded"] is False
