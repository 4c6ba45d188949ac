"""Training loop: alternating discriminator/generator updates with Adam, a
piecewise-linear learning-rate schedule, seeded batch sampling, and
checkpointing that resumes runs exactly.

Two independent random streams drive a run: ``data_rng`` (batch indices and
augmentation flips) and ``train_rng`` (target labels and gradient-penalty
interpolation). Both are checkpointed, and every batch is drawn directly
from ``data_rng`` per step, so restoring the streams reproduces the exact
batch sequence.
"""

from __future__ import annotations

import copy
import json
import os
import queue
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from PIL import Image

from .attributes import (AttributeSchema, LabelMode, LabelVector,
                         sample_target_labels, validate_label)
from .checkpoint import read_checkpoint, write_checkpoint
from .data import SampleRecord, batch_to_tensor, to_uint8
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import FormatError, RangeError
from .generator import Generator, GeneratorConfig
from .losses import (LossWeights, adv_d_loss, adv_g_loss, cfm_loss,
                     classification_loss, fm_loss, reconstruction_loss,
                     total_d_loss, total_g_loss)

VALID_FLAGS = frozenset({"self", "gate", "fm", "cfm"})

ABLATION_ROWS: dict[str, frozenset[str]] = {
    "baseline": frozenset({"self"}),
    "gate": frozenset({"self", "gate"}),
    "gate+fm": frozenset({"self", "gate", "fm"}),
    "gate+fm+cfm": frozenset({"self", "gate", "fm", "cfm"}),
    "gate+cfm": frozenset({"self", "gate", "cfm"}),
}


@dataclass(frozen=True)
class TrainConfig:
    total_g_steps: int
    batch_size: int = 16
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    n_critic: int = 5
    weights: LossWeights = field(default_factory=LossWeights)
    ablation: frozenset[str] = frozenset({"self", "gate", "cfm"})
    seed: int = 0
    checkpoint_every: int = 1000
    log_every: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        if self.total_g_steps < 1:
            raise RangeError("total_g_steps must be >= 1")
        if self.n_critic < 1:
            raise RangeError("n_critic must be >= 1")
        if self.batch_size < 1:
            raise RangeError("batch_size must be >= 1")
        unknown = self.ablation - VALID_FLAGS
        if unknown:
            raise RangeError(f"unknown ablation flags {sorted(unknown)}")
        for flag, lam in (("self", self.weights.lambda_self),
                          ("fm", self.weights.lambda_fm),
                          ("cfm", self.weights.lambda_cfm)):
            if flag in self.ablation and lam == 0.0:
                raise RangeError(f"flag {flag!r} enabled but its weight is zero")
            if flag not in self.ablation and lam != 0.0:
                raise RangeError(f"weight for disabled flag {flag!r} must be zero")

    def to_json_dict(self) -> dict:
        return {
            "total_g_steps": self.total_g_steps,
            "batch_size": self.batch_size,
            "lr_g": self.lr_g,
            "lr_d": self.lr_d,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "n_critic": self.n_critic,
            "weights": self.weights.to_json_dict(),
            "ablation": sorted(self.ablation),
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "log_every": self.log_every,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TrainConfig":
        kw = dict(obj)
        kw["weights"] = LossWeights.from_json_dict(kw["weights"])
        kw["ablation"] = frozenset(kw["ablation"])
        return cls(**kw)


def resolve_weights_for_flags(weights: LossWeights, flags: Iterable[str]) -> LossWeights:
    """Zero out the weights of disabled optional terms so a flag set and a
    weight set are always consistent."""
    flags = frozenset(flags)
    kw = {}
    if "self" not in flags:
        kw["lambda_self"] = 0.0
    if "cfm" not in flags:
        kw["lambda_cfm"] = 0.0
    if "fm" in flags:
        if weights.lambda_fm == 0.0:
            kw["lambda_fm"] = 1.0
    else:
        kw["lambda_fm"] = 0.0
    return weights.with_(**kw) if kw else weights


def lr_schedule(step: int, total_steps: int, base_lr: float) -> float:
    """Constant for the first half of training, then linear decay to zero."""
    if not 0 <= step <= total_steps:
        raise RangeError(f"step {step} outside [0, {total_steps}]")
    half = total_steps / 2.0
    if step <= half:
        return base_lr
    return base_lr * (total_steps - step) / half


@dataclass
class TrainState:
    schema: AttributeSchema
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    generator: Generator
    discriminator: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    data_rng: np.random.Generator
    train_rng: np.random.Generator
    g_step: int = 0
    d_step: int = 0
    train_config: TrainConfig | None = None


def init_state(schema: AttributeSchema, config: TrainConfig,
               gen_config: GeneratorConfig | None = None,
               disc_config: DiscriminatorConfig | None = None) -> TrainState:
    if gen_config is None:
        gen_config = GeneratorConfig.desk_scale(schema.n,
                                                gate_enabled="gate" in config.ablation)
    if disc_config is None:
        disc_config = DiscriminatorConfig.desk_scale(schema.n, cls_mode=schema.mode,
                                                     image_size=gen_config.image_size)
    if gen_config.gate_enabled != ("gate" in config.ablation):
        raise RangeError("generator gate_enabled disagrees with the gate ablation flag")
    generator = Generator(gen_config, seed=config.seed)
    discriminator = Discriminator(disc_config, seed=config.seed + 1)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.lr_g,
                             betas=(config.adam_beta1, config.adam_beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr_d,
                             betas=(config.adam_beta1, config.adam_beta2))
    return TrainState(
        schema=schema, gen_config=gen_config, disc_config=disc_config,
        generator=generator, discriminator=discriminator,
        opt_g=opt_g, opt_d=opt_d,
        data_rng=np.random.default_rng(config.seed),
        train_rng=np.random.default_rng(config.seed + 1),
        train_config=config)


class Batch:
    __slots__ = ("x", "labels", "bits")

    def __init__(self, x: torch.Tensor, labels: list[LabelVector], bits: torch.Tensor):
        self.x = x
        self.labels = labels
        self.bits = bits


class BatchSampler:
    """Draws random batches (with replacement) from an in-memory dataset.

    With ``workers > 0`` a single producer thread prefetches into a bounded
    queue; because only that thread touches ``data_rng`` and batches are
    consumed in production order, prefetching never changes the sampled
    sequence. ``rng_state_at_consumed()`` reports the stream state as of the
    consumed frontier so checkpoints stay exact even while the producer has
    run ahead.
    """

    def __init__(self, records: Sequence[SampleRecord], batch_size: int,
                 data_rng: np.random.Generator, augment: bool = True,
                 workers: int | None = None):
        if not records:
            raise RangeError("dataset is empty")
        self.images = np.stack([r.image for r in records])
        self.labels = [r.label for r in records]
        self.bits = np.stack([np.asarray(r.label.bits, dtype=np.float32)
                              for r in records])
        self.batch_size = batch_size
        self.rng = data_rng
        self.augment = augment
        if workers is None:
            workers = int(os.environ.get("SWITCHGAN_NUM_WORKERS", "0") or 0)
        self._queue: queue.Queue | None = None
        self._pre_states: dict[int, dict] = {}
        self._lock = threading.Lock()
        self._produced = 0
        self._consumed = 0
        self._stop = False
        if workers > 0:
            self._queue = queue.Queue(maxsize=max(2, workers * 2))
            self._thread = threading.Thread(target=self._producer, daemon=True)
            self._thread.start()

    def _draw(self) -> Batch:
        idx = self.rng.integers(0, len(self.images), size=self.batch_size)
        imgs = self.images[idx]
        x = batch_to_tensor(imgs, augment=self.augment, rng=self.rng)
        labels = [self.labels[int(i)] for i in idx]
        bits = torch.from_numpy(self.bits[idx])
        return Batch(x, labels, bits)

    def _producer(self) -> None:
        while not self._stop:
            with self._lock:
                self._pre_states[self._produced] = copy.deepcopy(
                    self.rng.bit_generator.state)
                batch = self._draw()
                ordinal = self._produced
                self._produced += 1
            self._queue.put((ordinal, batch))

    def next_batch(self) -> Batch:
        if self._queue is None:
            with self._lock:
                self._consumed += 1
                return self._draw()
        ordinal, batch = self._queue.get()
        with self._lock:
            self._consumed = ordinal + 1
            self._pre_states.pop(ordinal, None)
        return batch

    def rng_state_at_consumed(self) -> dict:
        with self._lock:
            pending = [k for k in self._pre_states if k >= self._consumed]
            if pending:
                return copy.deepcopy(self._pre_states[min(pending)])
            return copy.deepcopy(self.rng.bit_generator.state)

    def close(self) -> None:
        self._stop = True
        if self._queue is not None:
            try:
                while True:
                    self._queue.get_nowait()
            except queue.Empty:
                pass


def _bits_tensor_of(labels: list[LabelVector]) -> torch.Tensor:
    return torch.tensor([list(l.bits) for l in labels], dtype=torch.float32)


def train_step_d(state: TrainState, batch: Batch, config: TrainConfig) -> dict:
    """One discriminator update; generator parameters are untouched."""
    g, d = state.generator, state.discriminator
    weights = config.weights
    targets = sample_target_labels(state.schema, batch.labels, state.train_rng)
    trg_bits = _bits_tensor_of(targets)
    with torch.no_grad():
        x_fake = g.translate(batch.x, trg_bits)

    # one trunk pass per distinct image batch; the heads run per use
    h_real = d.trunk_out(batch.x)
    h_fake = d.trunk_out(x_fake)

    def score(x, bits):
        if x is batch.x:
            return d.adversary_score_from(h_real, bits)
        if x is x_fake:
            return d.adversary_score_from(h_fake, bits)
        return d.adversary_score_batch(x, bits)

    adv, gp = adv_d_loss(score, batch.x, batch.bits, x_fake, trg_bits,
                         weights, state.train_rng)
    parts = {"adv_d": adv}
    if weights.lambda_c != 0.0:
        parts["cls_real"] = classification_loss(d.classify_from(h_real), batch.bits,
                                                state.schema.mode)
    total = total_d_loss(parts, weights)
    state.opt_d.zero_grad(set_to_none=True)
    total.backward()
    state.opt_d.step()
    state.d_step += 1
    report = {"adv_d": float(adv.detach()), "gp": float(gp.detach()),
              "total_d": float(total.detach())}
    if "cls_real" in parts:
        report["cls_real"] = float(parts["cls_real"].detach())
    return report


def _fused_latents_shared_source(g: Generator, x: torch.Tensor,
                                 bits_full: torch.Tensor,
                                 bits_subset: torch.Tensor | None,
                                 mask: torch.Tensor | None):
    """Source encodings are computed once and fused for two gate sets: the
    full-batch target bits and, over ``mask`` rows, the subset bits. Matches
    the per-call translate arithmetic exactly (same modules, same ascending
    accumulation order)."""
    cols = set(torch.nonzero(bits_full.sum(dim=0)).flatten().tolist())
    if bits_subset is not None:
        cols |= set(torch.nonzero(bits_subset.sum(dim=0)).flatten().tolist())
    shared = g.shared(x) if g.shared is not None else None
    outs = {i: g.branches[i](x) for i in sorted(cols)}

    def fuse(bits, row_mask):
        total = shared if row_mask is None else (
            shared[row_mask] if shared is not None else None)
        for i in sorted(outs):
            coeff = bits[:, i]
            if torch.count_nonzero(coeff) == 0:
                continue
            branch = outs[i] if row_mask is None else outs[i][row_mask]
            term = branch * coeff.view(-1, 1, 1, 1)
            total = term if total is None else total + term
        if total is None:
            b = bits.shape[0]
            c = g.config
            total = x.new_zeros((b, c.latent_channels, c.latent_size, c.latent_size))
        return total

    fused_full = fuse(bits_full, None)
    fused_subset = fuse(bits_subset, mask) if bits_subset is not None else None
    return fused_full, fused_subset


def train_step_g(state: TrainState, batch: Batch, config: TrainConfig) -> dict:
    """One generator update; discriminator parameters are untouched.

    Samples whose original label is all-zero are excluded from the cycle,
    self-reconstruction, and feature-matching terms (the generator contract
    requires a non-zero label), but still produce fakes for the adversarial
    and classification terms. The discriminator is frozen for the duration
    of the step, so its weight gradients are never computed.
    """
    g, d = state.generator, state.discriminator
    weights = config.weights
    flags = config.ablation
    targets = sample_target_labels(state.schema, batch.labels, state.train_rng)
    trg_bits = _bits_tensor_of(targets)

    mask = batch.bits.sum(dim=1) > 0
    use_recon = bool(mask.any())
    org_m = batch.bits[mask] if use_recon else None
    need_self = use_recon and "self" in flags

    d.requires_grad_(False)
    try:
        fused_fake, fused_self = _fused_latents_shared_source(
            g, batch.x, trg_bits, org_m if need_self else None,
            mask if need_self else None)
        x_fake = g.decoder(fused_fake)

        h_fake = d.trunk_out(x_fake)

        def score(x, bits):
            if x is x_fake:
                return d.adversary_score_from(h_fake, bits)
            return d.adversary_score_batch(x, bits)

        parts = {"adv_g": adv_g_loss(score, x_fake, trg_bits)}
        if weights.lambda_c != 0.0:
            parts["cls_fake"] = classification_loss(d.classify_from(h_fake),
                                                    trg_bits, state.schema.mode)

        zero = torch.zeros((), dtype=batch.x.dtype)
        if use_recon:
            x_m = batch.x[mask]
            x_cyc = g.translate(x_fake[mask], org_m)
            parts["cyc"] = reconstruction_loss(x_m, x_cyc)
            if need_self:
                parts["self"] = reconstruction_loss(x_m, g.decoder(fused_self))
            if "cfm" in flags:
                parts["cfm"] = cfm_loss(d.adversary_features_batch, x_m, x_cyc, org_m)
            if "fm" in flags:
                parts["fm"] = fm_loss(d.trunk_features, x_m, x_cyc,
                                      weights.fm_layer_count)
        else:
            parts["cyc"] = zero
            for flag in ("self", "cfm", "fm"):
                if flag in flags:
                    parts[flag] = zero

        total = total_g_loss(parts, weights)
        state.opt_g.zero_grad(set_to_none=True)
        total.backward()
        state.opt_g.step()
    finally:
        d.requires_grad_(True)
    state.g_step += 1
    report = {k: float(v.detach()) for k, v in parts.items()}
    report["total_g"] = float(total.detach())
    return report


def _write_sample_grid(state: TrainState, records: Sequence[SampleRecord],
                       path: Path) -> None:
    """Fixed evaluation grid: input, content (gated), then every
    single-attribute flip (multi-hot) or every class (one-hot)."""
    n = state.schema.n
    rows = []
    with torch.no_grad():
        for rec in records[:4]:
            x = batch_to_tensor(rec.image[None])[0]
            cells = [to_uint8(x)]
            if state.gen_config.gate_enabled:
                cells.append(to_uint8(state.generator.content_image(x)))
            for i in range(n):
                if state.schema.mode is LabelMode.ONE_HOT:
                    trg = LabelVector.one_hot(i, n)
                else:
                    bits = list(rec.label.bits)
                    bits[i] = 1 - bits[i]
                    if not any(bits):
                        bits[i] = 1
                    trg = LabelVector.of(bits)
                cells.append(to_uint8(state.generator.translate(x, trg)))
            rows.append(np.concatenate(cells, axis=1))
    grid = np.concatenate(rows, axis=0)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(path)


def train(config: TrainConfig, records: Sequence[SampleRecord],
          schema: AttributeSchema, run_dir,
          gen_config: GeneratorConfig | None = None,
          disc_config: DiscriminatorConfig | None = None,
          resume_from=None, workers: int | None = None) -> TrainState:
    """Run the optimization loop and return the final state.

    Per generator update the discriminator is updated ``n_critic`` times,
    each on a fresh batch with freshly sampled target labels. Learning rates
    follow :func:`lr_schedule` on the generator-step index. The run directory
    receives ``config.json``, ``losses.jsonl``, ``checkpoints/step_<k>.ckpt``
    and ``samples/step_<k>.png``.
    """
    run = Path(run_dir)
    run.mkdir(parents=True, exist_ok=True)
    for rec in records:
        validate_label(schema, rec.label)

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state.schema != schema:
            raise FormatError("checkpoint schema does not match the dataset schema")
        state.train_config = config
    else:
        state = init_state(schema, config, gen_config, disc_config)

    with open(run / "config.json", "w") as fh:
        json.dump({
            "train_config": config.to_json_dict(),
            "schema": schema.to_json_dict(),
            "generator_config": state.gen_config.to_json_dict(),
            "discriminator_config": state.disc_config.to_json_dict(),
        }, fh, indent=1)

    sampler = BatchSampler(records, config.batch_size, state.data_rng,
                           augment=True, workers=workers)
    log_path = run / "losses.jsonl"
    ckpt_dir = run / "checkpoints"
    try:
        with open(log_path, "a") as log:
            while state.g_step < config.total_g_steps:
                lr = lr_schedule(state.g_step, config.total_g_steps, 1.0)
                for group in state.opt_g.param_groups:
                    group["lr"] = config.lr_g * lr
                for group in state.opt_d.param_groups:
                    group["lr"] = config.lr_d * lr

                d_report: dict = {}
                for _ in range(config.n_critic):
                    d_report = train_step_d(state, sampler.next_batch(), config)
                g_report = train_step_g(state, sampler.next_batch(), config)

                step = state.g_step
                if step % config.log_every == 0 or step == config.total_g_steps:
                    record = {"step": step, **d_report, **g_report,
                              "lr_g": config.lr_g * lr, "lr_d": config.lr_d * lr}
                    log.write(json.dumps(record) + "\n")
                    log.flush()
                if (config.checkpoint_every and
                        (step % config.checkpoint_every == 0
                         or step == config.total_g_steps)):
                    save_checkpoint(state, ckpt_dir / f"step_{step}.ckpt",
                                    data_rng_state=sampler.rng_state_at_consumed())
                    _write_sample_grid(state, records, run / "samples" / f"step_{step}.png")
        if not (ckpt_dir / f"step_{config.total_g_steps}.ckpt").exists():
            save_checkpoint(state, ckpt_dir / f"step_{config.total_g_steps}.ckpt",
                            data_rng_state=sampler.rng_state_at_consumed())
    finally:
        sampler.close()
    return state


# --- checkpoint name mapping -------------------------------------------------

def _g_key_to_ckpt(key: str) -> str:
    if key.startswith("branches."):
        idx, _, tail = key[len("branches."):].partition(".")
        return f"G/E_{int(idx) + 1}/{tail}"
    if key.startswith("shared."):
        return f"G/E_m/{key[len('shared.'):]}"
    if key.startswith("decoder."):
        return f"G/M/{key[len('decoder.'):]}"
    raise FormatError(f"unmapped generator key {key!r}")


def _d_key_to_ckpt(key: str) -> str:
    if key.startswith("trunk."):
        return f"D/m/{key[len('trunk.'):]}"
    if key.startswith("cls_head."):
        return f"D/cls/{key[len('cls_head.'):]}"
    if key.startswith("adv_heads."):
        idx, _, tail = key[len("adv_heads."):].partition(".")
        return f"D/adv_{int(idx) + 1}/{tail}"
    raise FormatError(f"unmapped discriminator key {key!r}")


def _ckpt_to_g_key(name: str) -> str:
    if name.startswith("G/E_m/"):
        return "shared." + name[len("G/E_m/"):]
    if name.startswith("G/M/"):
        return "decoder." + name[len("G/M/"):]
    if name.startswith("G/E_"):
        idx, _, tail = name[len("G/E_"):].partition("/")
        return f"branches.{int(idx) - 1}.{tail}"
    raise FormatError(f"unmapped checkpoint tensor {name!r}")


def _ckpt_to_d_key(name: str) -> str:
    if name.startswith("D/m/"):
        return "trunk." + name[len("D/m/"):]
    if name.startswith("D/cls/"):
        return "cls_head." + name[len("D/cls/"):]
    if name.startswith("D/adv_"):
        idx, _, tail = name[len("D/adv_"):].partition("/")
        return f"adv_heads.{int(idx) - 1}.{tail}"
    raise FormatError(f"unmapped checkpoint tensor {name!r}")


def _optimizer_tensors(opt: torch.optim.Adam, module: torch.nn.Module,
                       mapper, prefix: str) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for key, param in module.named_parameters():
        st = opt.state.get(param)
        if not st:
            continue
        base = f"opt/{prefix}/{mapper(key)}"
        step = st["step"]
        step_val = float(step.item() if isinstance(step, torch.Tensor) else step)
        tensors[f"{base}/step"] = np.asarray(step_val, dtype=np.float32)
        tensors[f"{base}/exp_avg"] = st["exp_avg"].detach().numpy()
        tensors[f"{base}/exp_avg_sq"] = st["exp_avg_sq"].detach().numpy()
    return tensors


def save_checkpoint(state: TrainState, path, data_rng_state: dict | None = None) -> None:
    """Serialize parameters, optimizer moments, counters and rng streams."""
    tensors: dict[str, np.ndarray] = {}
    for key, value in state.generator.state_dict().items():
        tensors[_g_key_to_ckpt(key)] = value.detach().numpy()
    for key, value in state.discriminator.state_dict().items():
        tensors[_d_key_to_ckpt(key)] = value.detach().numpy()
    tensors.update(_optimizer_tensors(state.opt_g, state.generator, _g_key_to_ckpt, "G"))
    tensors.update(_optimizer_tensors(state.opt_d, state.discriminator, _d_key_to_ckpt, "D"))
    meta = {
        "format_version": 1,
        "schema": state.schema.to_json_dict(),
        "generator_config": state.gen_config.to_json_dict(),
        "discriminator_config": state.disc_config.to_json_dict(),
        "train_config": (state.train_config.to_json_dict()
                         if state.train_config else None),
        "g_step": state.g_step,
        "d_step": state.d_step,
        "data_rng": data_rng_state if data_rng_state is not None
                    else state.data_rng.bit_generator.state,
        "train_rng": state.train_rng.bit_generator.state,
    }
    write_checkpoint(path, tensors, meta)


def load_checkpoint(path) -> TrainState:
    """Rebuild a TrainState from a checkpoint file.

    Structural validation covers the meta block and the branch count: the
    number of encoder groups stored in the file must equal the schema's n.
    """
    tensors, meta = read_checkpoint(path)
    try:
        schema = AttributeSchema.from_json_dict(meta["schema"])
        gen_config = GeneratorConfig.from_json_dict(meta["generator_config"])
        disc_config = DiscriminatorConfig.from_json_dict(meta["discriminator_config"])
    except (KeyError, TypeError) as e:
        raise FormatError(f"checkpoint meta is incomplete: {e}") from e

    branch_ids = {int(name[len("G/E_"):].partition("/")[0])
                  for name in tensors if name.startswith("G/E_")
                  and not name.startswith("G/E_m/")}
    actual_n = len(branch_ids)
    if actual_n != schema.n or gen_config.n_branches != schema.n \
            or disc_config.n_branches != schema.n:
        raise FormatError(
            f"attribute count mismatch: schema says n={schema.n}, generator config "
            f"n={gen_config.n_branches}, checkpoint holds {actual_n} encoder branches")

    config = (TrainConfig.from_json_dict(meta["train_config"])
              if meta.get("train_config") else None)
    generator = Generator(gen_config, seed=0)
    discriminator = Discriminator(disc_config, seed=0)

    g_sd = {}
    d_sd = {}
    for name, arr in tensors.items():
        if name.startswith("G/"):
            g_sd[_ckpt_to_g_key(name)] = torch.from_numpy(arr)
        elif name.startswith("D/"):
            d_sd[_ckpt_to_d_key(name)] = torch.from_numpy(arr)
    try:
        generator.load_state_dict(g_sd)
        discriminator.load_state_dict(d_sd)
    except RuntimeError as e:
        raise FormatError(f"checkpoint tensors do not fit the stored configs: {e}") from e

    opt_g = torch.optim.Adam(generator.parameters(),
                             lr=config.lr_g if config else 1e-4,
                             betas=(config.adam_beta1, config.adam_beta2)
                             if config else (0.5, 0.999))
    opt_d = torch.optim.Adam(discriminator.parameters(),
                             lr=config.lr_d if config else 1e-4,
                             betas=(config.adam_beta1, config.adam_beta2)
                             if config else (0.5, 0.999))
    for opt, module, mapper, prefix in ((opt_g, generator, _g_key_to_ckpt, "G"),
                                        (opt_d, discriminator, _d_key_to_ckpt, "D")):
        for key, param in module.named_parameters():
            base = f"opt/{prefix}/{mapper(key)}"
            if f"{base}/exp_avg" in tensors:
                opt.state[param] = {
                    "step": torch.tensor(float(tensors[f"{base}/step"].reshape(()))),
                    "exp_avg": torch.from_numpy(tensors[f"{base}/exp_avg"]).clone(),
                    "exp_avg_sq": torch.from_numpy(tensors[f"{base}/exp_avg_sq"]).clone(),
                }

    data_rng = np.random.default_rng(0)
    train_rng = np.random.default_rng(0)
    if "data_rng" in meta:
        data_rng.bit_generator.state = meta["data_rng"]
    if "train_rng" in meta:
        train_rng.bit_generator.state = meta["train_rng"]

    return TrainState(
        schema=schema, gen_config=gen_config, disc_config=disc_config,
        generator=generator, discriminator=discriminator,
        opt_g=opt_g, opt_d=opt_d,
        data_rng=data_rng, train_rng=train_rng,
        g_step=int(meta.get("g_step", 0)), d_step=int(meta.get("d_step", 0)),
        train_config=config)
