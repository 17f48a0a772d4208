"""Background-subtraction multi-object tracker.

Pipeline: per-pixel background model -> morphological cleanup -> connected
regions with colour-histogram features -> bipartite frame-to-frame
association with histogram-based occlusion recovery, plus an optional
mean-shift position refiner and a synthetic scene generator for testing.
"""

from .association import TrackSet, TrackState, build_graph, gate_distance, resolve, speed_and_direction
from .background import AdaptiveModel, GmmParams, MixtureModel
from .config import PipelineConfig, dump_config, parse_config
from .frame_io import Frame, read_frame, to_grayscale, write_frame
from .pipeline import FrameResult, Pipeline, annotate_frame, emit_results, run_pipeline
from .regions import d_total, detect_regions, downsample_histogram, extract_features, l1_distance, label_components

__version__ = "0.1.0"
