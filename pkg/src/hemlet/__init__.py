"""Performance and energy simulator for Vision Transformer inference on
heterogeneous compute-in-memory chiplet packages."""

from .engine import DataflowMode, SimReport, breakdown_speedup, run
from .glp import GLPLayerSet, LayerSetPlan, MappingError, build_layersets, interleave, make_plan
from .hwconfig import ConfigError, SystemConfig, load_config, validate, with_label
from .placement import MappingPlan, mapping_stats, place
from .workload import MODELS, VIT_B16, VIT_L16, VIT_S16, ViTModelSpec, expand_model, get_model, mac_count

__version__ = "0.1.0"

__all__ = [
    "DataflowMode", "SimReport", "breakdown_speedup", "run",
    "GLPLayerSet", "LayerSetPlan", "MappingError", "build_layersets", "interleave", "make_plan",
    "ConfigError", "SystemConfig", "load_config", "validate", "with_label",
    "MappingPlan", "mapping_stats", "place",
    "MODELS", "VIT_B16", "VIT_L16", "VIT_S16", "ViTModelSpec", "expand_model", "get_model", "mac_count",
]
