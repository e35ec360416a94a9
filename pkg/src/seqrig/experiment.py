"""The experiment: global settings plus model, training, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from .log import Logger, fmt_value
from .training import TrainContext


@dataclass
class ExpGlobal:
    """Global experiment settings; templates may contain ``{EXP}``."""

    model_file: str = ""
    log_file: str = ""
    default_layer_dim: int = 512
    dropout: float = 0.0
    eval_only: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.default_layer_dim < 1:
            raise ValueError("default_layer_dim must be positive")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


class Experiment:
    """One named unit of work, built by the resolver.

    ``eval_only`` gates the training phase only; evaluation always runs.
    ``load``/``overwrite`` are workflow directives handled by the runner
    before instantiation and are inert here.
    """

    def __init__(self, exp_global=None, model=None, train=None, evaluate=None,
                 load=None, overwrite=None):
        self.exp_global = exp_global
        self.model = model
        self.train = train
        if evaluate is None:
            evaluate = []
        elif not isinstance(evaluate, list):
            evaluate = [evaluate]
        self.evaluate = evaluate
        self.load = load
        self.overwrite = overwrite
        # set by the resolver
        self.name = ""
        self.runtime = None
        self.graph = None

    def run(self, logger: Logger) -> dict[str, float]:
        """Train (unless eval_only), then run the evaluate tasks."""
        ctx = TrainContext(exp_name=self.name, runtime=self.runtime, logger=logger,
                           model_file=self.exp_global.model_file, exp=self)
        if self.train is not None and not self.exp_global.eval_only:
            self.train.run(ctx, default_model=self.model)
        metrics: dict[str, float] = {}
        for task in self.evaluate:
            model = task.model if task.model is not None else self.model
            if model is None:
                raise ValueError("evaluate task has no model")
            for name, score, _ in task.run(model, self.runtime):
                logger.write_text(f"test {name}={fmt_value(score)}")
                key = name if name not in metrics else f"{name}.{len(metrics)}"
                metrics[key] = score
        return metrics
