"""Built-in component schemas and the default registry.

Adding a component is: write the class, register a schema mapping its tag
to constructor arguments.  ``UseGlobal`` defaults read from ExpGlobal when
the config omits the argument; the opted-in args are the dimension-like
``emb_dim``/``hidden_dim``/``mlp_hidden_dim`` (from ``default_layer_dim``)
and the LSTM ``dropout`` rates (from ``dropout``).
"""

from __future__ import annotations

from .data import FeatureReader, PlainTextReader, SrcBatcher, Vocab
from .experiment import ExpGlobal, Experiment
from .nn import (BiLSTMSeqTransducer, CopyBridge, DefaultTranslator,
                 DenseWordEmbedder, MlpAttender, MlpSoftmaxDecoder,
                 NoopEmbedder, PyramidalLSTMSeqTransducer, SimpleWordEmbedder)
from .optim import AdamTrainer, SgdTrainer
from .resolver import REQUIRED, Arg, ComponentSchema, Registry, ResolveError, UseGlobal
from .tasks import AccuracyEvalTask, LossEvalTask
from .training import MultiTaskRegimen, SimpleTrainingRegimen


def _plain(cls):
    return lambda ctx, **kwargs: cls(**kwargs)


def _with_runtime(cls):
    return lambda ctx, **kwargs: cls(ctx.runtime, ctx.path, **kwargs)


def _ref_factory(ctx, **kwargs):
    raise ResolveError("!Ref is resolved by the instantiation plan, never constructed",
                       path=ctx.path)


LAYER_DIM = UseGlobal("default_layer_dim")
DROPOUT = UseGlobal("dropout")


def _check_use_global_keys(reg: Registry) -> Registry:
    """Every use-global default must name a real ExpGlobal field."""
    fields = set(ExpGlobal.__dataclass_fields__)
    for tag in reg.tags():
        for arg in reg.get(tag).args:
            if isinstance(arg.default, UseGlobal) and arg.default.key not in fields:
                raise ResolveError(f"schema '{tag}' argument '{arg.name}' uses "
                                   f"unknown global '{arg.default.key}'")
    return reg


def default_registry() -> Registry:
    reg = Registry()
    reg.register(ComponentSchema("ExpGlobal", [
        Arg("model_file", ""), Arg("log_file", ""), Arg("default_layer_dim", 512),
        Arg("dropout", 0.0), Arg("eval_only", False), Arg("seed", 0),
    ], _plain(ExpGlobal)))
    reg.register(ComponentSchema("Experiment", [
        Arg("exp_global", None), Arg("model", None), Arg("train", None),
        Arg("evaluate", None), Arg("load", None), Arg("overwrite", None),
    ], _plain(Experiment)))
    reg.register(ComponentSchema("Ref", [Arg("path", REQUIRED)], _ref_factory))

    reg.register(ComponentSchema("Vocab", [Arg("vocab_file", REQUIRED)],
                                 lambda ctx, vocab_file: Vocab.from_file(vocab_file)))
    reg.register(ComponentSchema("PlainTextReader", [Arg("vocab", REQUIRED)],
                                 _plain(PlainTextReader)))
    reg.register(ComponentSchema("FeatureReader", [Arg("feat_dim", None)],
                                 _plain(FeatureReader)))

    reg.register(ComponentSchema("SimpleWordEmbedder", [
        Arg("emb_dim", LAYER_DIM), Arg("vocab_size", None), Arg("word_dropout", 0.0),
    ], _with_runtime(SimpleWordEmbedder)))
    reg.register(ComponentSchema("DenseWordEmbedder", [
        Arg("emb_dim", LAYER_DIM), Arg("vocab_size", None), Arg("word_dropout", 0.0),
    ], _with_runtime(DenseWordEmbedder)))
    reg.register(ComponentSchema("NoopEmbedder", [Arg("emb_dim", LAYER_DIM)],
                                 _with_runtime(NoopEmbedder)))

    reg.register(ComponentSchema("BiLSTMSeqTransducer", [
        Arg("layers", 1), Arg("hidden_dim", LAYER_DIM), Arg("dropout", DROPOUT),
    ], _with_runtime(BiLSTMSeqTransducer)))
    reg.register(ComponentSchema("PyramidalLSTMSeqTransducer", [
        Arg("layers", 3), Arg("hidden_dim", LAYER_DIM), Arg("dropout", DROPOUT),
    ], _with_runtime(PyramidalLSTMSeqTransducer)))
    reg.register(ComponentSchema("MlpAttender", [Arg("hidden_dim", LAYER_DIM)],
                                 _with_runtime(MlpAttender)))
    reg.register(ComponentSchema("CopyBridge", [], _plain(CopyBridge)))
    reg.register(ComponentSchema("MlpSoftmaxDecoder", [
        Arg("layers", 1), Arg("hidden_dim", LAYER_DIM), Arg("mlp_hidden_dim", LAYER_DIM),
        Arg("bridge", None), Arg("vocab_projector", None), Arg("dropout", DROPOUT),
        Arg("vocab_size", None),
    ], _with_runtime(MlpSoftmaxDecoder)))
    reg.register(ComponentSchema("DefaultTranslator", [
        Arg("src_reader", REQUIRED), Arg("trg_reader", REQUIRED),
        Arg("src_embedder", REQUIRED), Arg("encoder", REQUIRED),
        Arg("attender", REQUIRED), Arg("trg_embedder", REQUIRED),
        Arg("decoder", REQUIRED),
    ], _with_runtime(DefaultTranslator)))

    reg.register(ComponentSchema("SrcBatcher", [Arg("batch_size", 32)],
                                 _plain(SrcBatcher)))
    reg.register(ComponentSchema("AdamTrainer", [
        Arg("lr", 0.001), Arg("beta_1", 0.9), Arg("beta_2", 0.999), Arg("eps", 1e-8),
    ], _plain(AdamTrainer)))
    reg.register(ComponentSchema("SgdTrainer", [Arg("lr", 0.1)], _plain(SgdTrainer)))

    reg.register(ComponentSchema("SimpleTrainingRegimen", [
        Arg("run_for_epochs", REQUIRED), Arg("src_file", REQUIRED),
        Arg("trg_file", REQUIRED), Arg("batcher", None), Arg("dev_tasks", None),
        Arg("trainer", None), Arg("loss", "mle"), Arg("label_smoothing", 0.0),
        Arg("lr_decay", None), Arg("model", None), Arg("name", None),
    ], _plain(SimpleTrainingRegimen)))
    reg.register(ComponentSchema("MultiTaskRegimen", [Arg("tasks", REQUIRED)],
                                 _plain(MultiTaskRegimen)))

    reg.register(ComponentSchema("LossEvalTask", [
        Arg("src_file", REQUIRED), Arg("ref_file", REQUIRED),
        Arg("batch_size", 32), Arg("model", None),
    ], _plain(LossEvalTask)))
    reg.register(ComponentSchema("AccuracyEvalTask", [
        Arg("src_file", REQUIRED), Arg("ref_file", REQUIRED), Arg("hyp_file", None),
        Arg("eval_metrics", "bleu"), Arg("strategy", "greedy"), Arg("beam_size", 1),
        Arg("length_norm_exp", 0.0), Arg("max_len", None), Arg("sample_n", 1),
        Arg("temperature", 1.0), Arg("model", None),
    ], _plain(AccuracyEvalTask)))
    return _check_use_global_keys(reg)
