"""Streaming skeleton-based online action prediction with temporal scale selection."""

from .data import ActionInstance, AnnotatedStream, FrameLabel, derive_frame_labels, parse_stream
from .model import Model, ModelConfig
from .nn import OptConfig, ParamStore, init_params
from .streaming import Mode, Prediction, parse_mode, run_stream, stream_init, stream_step
from .synth import SynthConfig, synth_generate
from .temporal import TemporalSpec, proper_layer, scale_table
from .topology import SkeletonTopology, default_topology, parse_topology
from .trainer import TrainConfig, make_clips, train
from .treeconv import TreeHierarchy, build_tap_tables

__version__ = "0.1.0"

__all__ = [
    "ActionInstance",
    "AnnotatedStream",
    "FrameLabel",
    "Mode",
    "Model",
    "ModelConfig",
    "OptConfig",
    "ParamStore",
    "Prediction",
    "SkeletonTopology",
    "SynthConfig",
    "TemporalSpec",
    "TrainConfig",
    "TreeHierarchy",
    "build_tap_tables",
    "default_topology",
    "derive_frame_labels",
    "init_params",
    "make_clips",
    "parse_mode",
    "parse_stream",
    "parse_topology",
    "proper_layer",
    "run_stream",
    "scale_table",
    "stream_init",
    "stream_step",
    "synth_generate",
    "train",
]
