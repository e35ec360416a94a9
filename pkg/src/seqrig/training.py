"""Training: losses, regimens, dev-driven LR decay, checkpointing.

Loss values are summed over tokens for the optimizer and divided by the
token count for logging, so logged loss/word is batch-size independent.
Gradients get a single global-norm clip at 5.0 before every step.

Checkpoint layout under ``<model_file>/``: ``spec.yaml`` (the dumped
experiment, runnable as-is) and ``weights.txt`` (per parameter a header
``param <name> <rank> <d1..dk>`` followed by row-major decimals with 17
significant digits, which round-trips float64 exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import tensor as T
from .data import ES, SrcBatcher, Batch
from .inference import default_max_len
from .log import Logger, fmt_value
from .metrics import sentence_bleu_smooth
from .optim import AdamTrainer
from .tensor import NonFiniteError, Runtime, clip_global_norm

GRAD_CLIP_NORM = 5.0
BASELINE_DECAY = 0.9


class TrainingError(Exception):
    pass


@dataclass
class TrainContext:
    """What a regimen needs from its surrounding experiment."""

    exp_name: str
    runtime: Runtime
    logger: Logger
    model_file: str = ""
    exp: object = None  # dumped for checkpoints when set


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def mle_loss(model, batch: Batch, smoothing: float = 0.0):
    """Teacher-forced cross-entropy with optional label smoothing.

    Per position the target distribution is (1-eps) on the gold token plus
    eps/V uniform; padded positions contribute exactly zero.  Returns the
    summed loss node and the real-token count.
    """
    return model.calc_loss(batch, train=True, label_smoothing=smoothing)


def reinforce_surrogate(neg_logprob_sum: T.Expr, reward: float, baseline: float) -> T.Expr:
    """Policy-gradient surrogate for one sampled sequence.

    The reward is treated as a constant, so backward through
    ``(reward - baseline) * sum(-log p)`` yields the REINFORCE gradient.
    """
    return T.scale(neg_logprob_sum, reward - baseline)


def _strip_eos(ids: list[int]) -> list[int]:
    return ids[:-1] if ids and ids[-1] == ES else ids


def bleu_reward(hyp_ids: list[int], ref_ids: list[int]) -> float:
    """Default REINFORCE reward: +1-smoothed sentence BLEU on token ids."""
    return sentence_bleu_smooth(_strip_eos(hyp_ids), _strip_eos(ref_ids))


def sample_sequence(model, ctx, rng: np.random.Generator, max_len: int):
    """Draw one sequence from the model, keeping -log p terms in the graph."""
    from .data import SS

    state = ctx.initial
    ids: list[int] = []
    terms = []
    for _ in range(max_len):
        prev = ids[-1] if ids else SS
        emb = model.trg_embedder.embed_step(np.asarray([prev], dtype=np.int64), False)
        state, logits = model.decoder.step(state, emb, model.attender, ctx.att, False)
        probs = T._softmax_value(logits.value[0])
        token = int(rng.choice(len(probs), p=probs))
        terms.append(T.esum(T.pick_neg_log_softmax(logits, np.asarray([token]))))
        ids.append(token)
        if token == ES:
            break
    total = terms[0]
    for term in terms[1:]:
        total = T.add(total, term)
    return ids, total


def reinforce_loss(model, batch: Batch, reward_fn: Callable = bleu_reward,
                   baseline: float = 0.0, rng: Optional[np.random.Generator] = None):
    """Sampled policy-gradient loss over a batch.

    Each row is sampled autoregressively up to 2*src_len+5 tokens; rows that
    never emit the end token are truncated and rewarded as-is.  Returns the
    surrogate loss node, the mean reward, and the sampled token count.
    """
    if rng is None:
        raise ValueError("reinforce_loss needs the experiment RNG")
    loss = None
    rewards = []
    n_tokens = 0
    for row in range(batch.size):
        if batch.src.ndim == 3:
            src_item = batch.src[row][batch.src_mask[row] > 0]
        else:
            src_item = [int(t) for t, m in zip(batch.src[row], batch.src_mask[row]) if m > 0]
        ref = [int(t) for t, m in zip(batch.trg[row], batch.trg_mask[row]) if m > 0]
        ctx = model.start_decode(src_item)
        ids, neg_logprob = sample_sequence(model, ctx, rng, default_max_len(model.src_length(src_item)))
        reward = float(reward_fn(ids, ref))
        if not np.isfinite(reward):
            raise TrainingError("reward function returned a non-finite value")
        rewards.append(reward)
        term = reinforce_surrogate(neg_logprob, reward, baseline)
        loss = term if loss is None else T.add(loss, term)
        n_tokens += len(ids)
    return loss, float(np.mean(rewards)), n_tokens


# ---------------------------------------------------------------------------
# dev evaluation and decay
# ---------------------------------------------------------------------------


@dataclass
class DevRecord:
    """History of dev scores; the counter resets exactly on strict improvement."""

    direction: str = "min"
    history: list[float] = field(default_factory=list)
    best: Optional[float] = None
    since_improvement: int = 0

    def update(self, score: float) -> bool:
        self.history.append(score)
        better = (self.best is None
                  or (self.direction == "min" and score < self.best)
                  or (self.direction == "max" and score > self.best))
        if better:
            self.best = score
            self.since_improvement = 0
        else:
            self.since_improvement += 1
        return better


DEFAULT_LR_DECAY = {"factor": 0.5, "patience": 1}


def run_dev_tasks_and_decay(dev_tasks, record: DevRecord, trainer, decay: dict,
                            model, runtime, logger: Logger) -> bool:
    """Run all dev tasks; the first task's first score drives decay/improvement.

    After ``patience`` consecutive checks without strict improvement the
    learning rate is multiplied by ``factor`` and the counter resets.
    Returns whether the driving score improved.
    """
    if not dev_tasks:
        raise ValueError("need at least one dev task")
    driving: Optional[float] = None
    for i, task in enumerate(dev_tasks):
        results = task.run(model, runtime)
        for name, score, direction in results:
            logger.write_text(f"dev {name}={fmt_value(score)} lr={fmt_value(trainer.lr)}")
            if i == 0 and driving is None:
                driving = score
                record.direction = direction
    improved = record.update(driving)
    if not improved and record.since_improvement >= decay.get("patience", 1):
        trainer.lr *= decay.get("factor", 0.5)
        record.since_improvement = 0
    return improved


# ---------------------------------------------------------------------------
# regimens
# ---------------------------------------------------------------------------


class SimpleTrainingRegimen:
    """Epoch-based training of one model on one parallel corpus."""

    def __init__(self, run_for_epochs: int, src_file: str, trg_file: str,
                 batcher: Optional[SrcBatcher] = None, dev_tasks=None, trainer=None,
                 loss: str = "mle", label_smoothing: float = 0.0,
                 lr_decay: Optional[dict] = None, model=None, name: Optional[str] = None):
        if run_for_epochs < 0:
            raise ValueError("run_for_epochs must be >= 0")
        if loss not in ("mle", "reinforce"):
            raise ValueError(f"unknown loss '{loss}'")
        decay = dict(DEFAULT_LR_DECAY)
        if lr_decay:
            decay.update(lr_decay)
        if not 0.0 < decay["factor"] < 1.0:
            raise ValueError("lr_decay factor must be in (0, 1)")
        self.run_for_epochs = run_for_epochs
        self.src_file = src_file
        self.trg_file = trg_file
        self.batcher = batcher if batcher is not None else SrcBatcher(32)
        self.dev_tasks = list(dev_tasks) if dev_tasks else []
        self.trainer = trainer if trainer is not None else AdamTrainer()
        self.loss = loss
        self.label_smoothing = label_smoothing
        self.lr_decay = decay
        self.model = model
        self.name = name
        self._baseline = 0.0
        self._record = DevRecord()

    def _calc_loss(self, model, batch: Batch, rng):
        if self.loss == "mle":
            return mle_loss(model, batch, self.label_smoothing)
        loss, mean_reward, n_tokens = reinforce_loss(model, batch, bleu_reward,
                                                     self._baseline, rng)
        self._baseline = BASELINE_DECAY * self._baseline + (1 - BASELINE_DECAY) * mean_reward
        return loss, n_tokens

    def _train_batch(self, model, batch: Batch, runtime: Runtime, epoch: int, index: int):
        try:
            loss, n_tokens = self._calc_loss(model, batch, runtime.rng)
            T.backward(loss)
        except NonFiniteError as err:
            raise TrainingError(f"aborting: {err} (epoch {epoch}, batch {index})") from err
        clip_global_norm(runtime.params, GRAD_CLIP_NORM)
        self.trainer.step(runtime.params)
        return float(loss.value), n_tokens

    def run(self, ctx: TrainContext, default_model=None) -> None:
        model = self.model if self.model is not None else default_model
        if model is None:
            raise TrainingError("training regimen has no model")
        src = model.src_reader.read(self.src_file)
        trg = model.trg_reader.read(self.trg_file, add_eos=True)
        batches = self.batcher.make_batches(src, trg)
        for epoch in range(1, self.run_for_epochs + 1):
            epoch_loss = 0.0
            words = 0
            for index, batch in enumerate(SrcBatcher.shuffled(batches, ctx.runtime.rng)):
                loss_value, n_tokens = self._train_batch(model, batch, ctx.runtime, epoch, index)
                epoch_loss += loss_value
                words += n_tokens
            ctx.logger.write({"epoch": epoch, "words": words, "loss/word": epoch_loss / max(words, 1)})
            if self.dev_tasks:
                improved = run_dev_tasks_and_decay(self.dev_tasks, self._record,
                                                   self.trainer, self.lr_decay, model,
                                                   ctx.runtime, ctx.logger)
                if improved and ctx.model_file and ctx.exp is not None:
                    save_checkpoint(ctx.exp, ctx.model_file)
        if (not self.dev_tasks and self.run_for_epochs > 0
                and ctx.model_file and ctx.exp is not None):
            save_checkpoint(ctx.exp, ctx.model_file)


class MultiTaskRegimen:
    """Round-robin multi-task training: one batch per task per cycle.

    Each task is a SimpleTrainingRegimen with its own model (components may
    be shared across tasks via config references), its own data, loss, and
    optimizer.  A task leaves the cycle once it has finished its own epoch
    budget.  Dev evaluation and decay run at each task's epoch boundaries;
    checkpointing follows the first task's dev improvements.
    """

    def __init__(self, tasks):
        if not tasks or len(tasks) < 2:
            raise ValueError("MultiTaskRegimen needs at least two tasks")
        self.tasks = list(tasks)

    def run(self, ctx: TrainContext, default_model=None) -> None:
        states = []
        for i, task in enumerate(self.tasks):
            model = task.model if task.model is not None else default_model
            if model is None:
                raise TrainingError(f"task {i} has no model")
            src = model.src_reader.read(task.src_file)
            trg = model.trg_reader.read(task.trg_file, add_eos=True)
            batches = task.batcher.make_batches(src, trg)
            states.append({
                "task": task, "model": model, "batches": batches,
                "queue": [], "epoch": 0, "loss": 0.0, "words": 0, "index": 0,
                "name": task.name or f"task{i}",
            })
        while True:
            busy = False
            for i, st in enumerate(states):
                task = st["task"]
                if st["epoch"] >= task.run_for_epochs and not st["queue"]:
                    continue
                busy = True
                if not st["queue"]:
                    st["queue"] = list(SrcBatcher.shuffled(st["batches"], ctx.runtime.rng))
                    st["loss"] = 0.0
                    st["words"] = 0
                    st["index"] = 0
                batch = st["queue"].pop(0)
                try:
                    loss_value, n_tokens = task._train_batch(
                        st["model"], batch, ctx.runtime, st["epoch"] + 1, st["index"])
                except TrainingError as err:
                    raise TrainingError(f"task {i}: {err}") from err
                st["index"] += 1
                st["loss"] += loss_value
                st["words"] += n_tokens
                if not st["queue"]:
                    st["epoch"] += 1
                    ctx.logger.write({"task": st["name"], "epoch": st["epoch"],
                                      "words": st["words"],
                                      "loss/word": st["loss"] / max(st["words"], 1)})
                    if task.dev_tasks:
                        improved = run_dev_tasks_and_decay(task.dev_tasks, task._record,
                                                           task.trainer, task.lr_decay,
                                                           st["model"], ctx.runtime, ctx.logger)
                        if i == 0 and improved and ctx.model_file and ctx.exp is not None:
                            save_checkpoint(ctx.exp, ctx.model_file)
            if not busy:
                break


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


def save_weights(params, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in params:
            dims = " ".join(str(d) for d in p.shape)
            fh.write(f"param {p.name} {len(p.shape)} {dims}".rstrip() + "\n")
            rows = p.value.reshape(-1, p.shape[-1]) if p.shape else p.value.reshape(1, 1)
            for row in rows:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_weights(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if not head or head[0] != "param":
            raise TrainingError(f"{path}:{i + 1}: expected a 'param' header")
        name, rank = head[1], int(head[2])
        dims = tuple(int(d) for d in head[3:3 + rank])
        if len(dims) != rank:
            raise TrainingError(f"{path}:{i + 1}: header dims do not match rank")
        n_rows = 1 if rank == 0 else int(np.prod(dims[:-1], dtype=np.int64)) if rank > 1 else 1
        values = []
        for r in range(n_rows):
            i += 1
            values.extend(float(v) for v in lines[i].split())
        arr = np.asarray(values, dtype=np.float64).reshape(dims)
        if name in out:
            raise TrainingError(f"{path}: duplicate parameter '{name}'")
        out[name] = arr
        i += 1
    return out


def apply_weights(params, weights: dict[str, np.ndarray]) -> None:
    """Strictly load values into an instantiated parameter set."""
    for name, arr in weights.items():
        if name not in params:
            raise TrainingError(f"weights mismatch: parameter '{name}' not in model")
        p = params.get(name)
        if p.shape != arr.shape:
            raise TrainingError(f"weights mismatch: parameter '{name}' has shape "
                                f"{p.shape}, file has {arr.shape}")
        p.value[...] = arr
    for p in params:
        if p.name not in weights:
            raise TrainingError(f"weights mismatch: parameter '{p.name}' missing from file")


def save_checkpoint(exp, model_file: str) -> Path:
    """Write ``spec.yaml`` + ``weights.txt`` under the model directory."""
    from .configlang import ConfigNode, serialize_config
    from .resolver import dump_spec

    out = Path(model_file)
    out.mkdir(parents=True, exist_ok=True)
    doc = ConfigNode.mapping([(exp.name, dump_spec(exp))])
    (out / "spec.yaml").write_text(serialize_config(doc), encoding="utf-8")
    save_weights(exp.runtime.params, out / "weights.txt")
    return out


def load_checkpoint(model_file: str):
    """Read back (spec tree root mapping, weights dict)."""
    from .configlang import parse_config

    out = Path(model_file)
    spec = parse_config((out / "spec.yaml").read_text(encoding="utf-8"))
    weights = load_weights(out / "weights.txt")
    return spec, weights
