"""Shared fixtures: transcribed reference configs and tiny corpora."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seqrig.data import gen_synthetic, write_vocab

# The three reference documents exercised throughout: a standard experiment,
# a tied-projector experiment, and a load/overwrite experiment.  @DATA@ and
# @OUT@ are replaced per test; all values match the documented examples.

STANDARD_CONFIG = """\
mini_experiment: !Experiment # top of experiment hierarchy
  exp_global: !ExpGlobal # global (default) experiment settings
    model_file: @OUT@/{EXP}.mod
    log_file: @OUT@/{EXP}.log
    default_layer_dim: 512
    dropout: 0.3
  model: !DefaultTranslator # attentional seq2seq model
    src_reader: !PlainTextReader
      vocab: !Vocab {vocab_file: @DATA@/vocab.txt}
    trg_reader: !PlainTextReader
      vocab: !Vocab {vocab_file: @DATA@/vocab.txt}
    src_embedder: !SimpleWordEmbedder {} # {} indicates defaults
    encoder: !BiLSTMSeqTransducer
      layers: 1
    attender: !MlpAttender {}
    trg_embedder: !SimpleWordEmbedder
      emb_dim: 128 # if not set, default_layer_dim is used
    decoder: !MlpSoftmaxDecoder
      layers: 1
      bridge: !CopyBridge {}
  train: !SimpleTrainingRegimen # training strategy
    run_for_epochs: 20
    batcher: !SrcBatcher
      batch_size: 32
    src_file: @DATA@/train.src
    trg_file: @DATA@/train.trg
    dev_tasks: # what to evaluate at every epoch
      - !LossEvalTask
        src_file: @DATA@/dev.src
        ref_file: @DATA@/dev.trg
  evaluate: # what to evaluate at the end of training
  - !AccuracyEvalTask
    src_file: @DATA@/test.src
    ref_file: @DATA@/test.trg
    eval_metrics: bleu
"""

TIED_CONFIG = """\
tied_exp: !Experiment
  exp_global: !ExpGlobal
    default_layer_dim: 64
    seed: 5
  model: !DefaultTranslator
    src_reader: !PlainTextReader
      vocab: !Vocab {vocab_file: @DATA@/vocab.txt}
    trg_reader: !PlainTextReader
      vocab: !Vocab {vocab_file: @DATA@/vocab.txt}
    src_embedder: !SimpleWordEmbedder {}
    encoder: !BiLSTMSeqTransducer
      layers: 1
    attender: !MlpAttender {}
    trg_embedder: !DenseWordEmbedder
      emb_dim: 128
    decoder: !MlpSoftmaxDecoder
      layers: 1
      bridge: !CopyBridge {}
      vocab_projector: !Ref { path: model.trg_embedder }
"""

DECODE_CONFIG = """\
decode_exp: !Experiment
 load: @OUT@/standard.mod
 overwrite:
 - path: exp_global.eval_only
   val: True
 - path: evaluate
   val: !AccuracyEvalTask
     src_file: @DATA@/test.src
     ref_file: @DATA@/test.trg
     hyp_file: @OUT@/{EXP}.test_hyp2
     eval_metrics: accuracy
"""


def fill(template: str, data_dir, out_dir) -> str:
    return template.replace("@DATA@", str(data_dir)).replace("@OUT@", str(out_dir))


@pytest.fixture(scope="session")
def copy_data(tmp_path_factory) -> Path:
    """A small copy-task corpus shared by resolver/CLI tests."""
    data = tmp_path_factory.mktemp("copydata")
    write_vocab(10, data / "vocab.txt")
    for prefix, n, seed in (("train", 60, 0), ("dev", 20, 1), ("test", 20, 2)):
        gen_synthetic("copy", 10, (1, 5), n, seed, data, prefix=prefix)
    return data
