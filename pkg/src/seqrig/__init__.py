"""seqrig: a config-driven sequence-to-sequence experiment rig."""

from .components import default_registry
from .configlang import (ConfigNode, ParseError, deep_equal, parse_config,
                         resolve_anchors, serialize_config)
from .experiment import ExpGlobal, Experiment
from .resolver import (ComponentSchema, Registry, ResolveError, apply_overwrites,
                       dump_spec, instantiate_graph)
from .tensor import Runtime

__version__ = "0.1.0"

__all__ = [
    "ConfigNode", "ParseError", "parse_config", "resolve_anchors",
    "serialize_config", "deep_equal", "Registry", "ComponentSchema",
    "ResolveError", "instantiate_graph", "dump_spec", "apply_overwrites",
    "default_registry", "ExpGlobal", "Experiment", "Runtime", "__version__",
]
