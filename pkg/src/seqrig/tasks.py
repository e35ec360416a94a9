"""Evaluation tasks: held-out loss and decode-and-score.

A task may carry its own ``model`` (usually a config reference); otherwise
the caller supplies the experiment's model.  AccuracyEvalTask writes one
detokenized hypothesis line per input, in input order, when ``hyp_file``
is set.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Optional

from .data import SrcBatcher
from .inference import SearchSpec, decode
from .metrics import METRICS


class LossEvalTask:
    """Average per-token negative log-likelihood on a held-out set."""

    def __init__(self, src_file: str, ref_file: str, batch_size: int = 32, model=None):
        self.src_file = src_file
        self.ref_file = ref_file
        self.batch_size = batch_size
        self.model = model

    def run(self, model, runtime) -> list[tuple[str, float, str]]:
        model = self.model if self.model is not None else model
        src = model.src_reader.read(self.src_file)
        trg = model.trg_reader.read(self.ref_file, add_eos=True)
        batches = SrcBatcher(self.batch_size).make_batches(src, trg)
        total = 0.0
        tokens = 0
        for batch in batches:
            loss, n = model.calc_loss(batch, train=False)
            total += float(loss.value)
            tokens += n
        return [("loss", total / tokens, "min")]


class AccuracyEvalTask:
    """Decode a test set and score it with one or more metrics."""

    def __init__(self, src_file: str, ref_file: str, hyp_file: Optional[str] = None,
                 eval_metrics: str = "bleu", strategy: str = "greedy",
                 beam_size: int = 1, length_norm_exp: float = 0.0,
                 max_len: Optional[int] = None, sample_n: int = 1,
                 temperature: float = 1.0, model=None):
        self.src_file = src_file
        self.ref_file = ref_file
        self.hyp_file = hyp_file
        self.metrics = [m.strip() for m in eval_metrics.split(",") if m.strip()]
        for m in self.metrics:
            if m not in METRICS:
                raise ValueError(f"unknown eval metric '{m}'")
        self.spec = SearchSpec(strategy=strategy, beam_size=beam_size, max_len=max_len,
                               length_norm_exp=length_norm_exp, sample_n=sample_n,
                               temperature=temperature)
        self.model = model

    def run(self, model, runtime) -> list[tuple[str, float, str]]:
        model = self.model if self.model is not None else model
        src = model.src_reader.read(self.src_file)
        with open(self.ref_file, encoding="utf-8") as fh:
            refs = [line.split() for line in fh]
        if len(src) != len(refs):
            raise ValueError(f"source and reference counts differ: {len(src)} vs {len(refs)}")
        vocab = model.trg_vocab
        hyps: list[list[str]] = []
        for item in src:
            if model.src_length(item) == 0:
                warnings.warn("empty source sequence; emitting empty hypothesis")
                hyps.append([])
                continue
            best = decode(model, item, self.spec, rng=runtime.rng)[0]
            hyps.append([vocab.to_token(i) for i in best.surface_ids()])
        if self.hyp_file:
            path = Path(self.hyp_file)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("".join(" ".join(h) + "\n" for h in hyps), encoding="utf-8")
        results = []
        for name in self.metrics:
            fn, direction = METRICS[name]
            results.append((name, fn(hyps, refs), direction))
        return results
