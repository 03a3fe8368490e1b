"""Instance segmentation post-processing and evaluation for microscopy.

The package splits semantic predictions into instances with an h-maxima +
seeded-watershed pipeline, generates per-instance distance-map targets,
and scores results with Pearson correlation, Jaccard index and mAP over
IoU thresholds 0.50..0.95. Hot kernels run in a compiled extension when
available, with a pure numpy fallback selected at import.
"""

from ._dispatch import backend_name, compiled_available, set_backend
from .dataset import (
    CropSpec,
    SynthSpec,
    crop_at,
    crop_offsets,
    has_instances,
    instance_bearing_crops,
    random_crops,
    split_train_test,
    synth_instances,
)
from .metrics import (
    MAP_THRESHOLDS,
    ImageRecord,
    LossInputs,
    MatchResult,
    MetricsReport,
    combined_loss,
    iou,
    map_score,
    match_instances,
    pcc,
    precision_at,
    shifted_sigmoid,
    summarize,
)
from .morphology import (
    Connectivity,
    connected_components,
    distance_map,
    h_maxima,
    reconstruct_by_dilation,
    regional_maxima,
)
from .pipeline import (
    PipelineConfig,
    SeedSet,
    extract_seeds,
    instance_segment,
    seeded_watershed,
    threshold_semantic,
)
from .raster import (
    BinaryMask,
    LabelMap,
    Raster,
    ZStack,
    load_labels,
    load_raster,
    load_stack,
    max_project,
    save_labels,
    save_raster,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "Connectivity",
    "CropSpec",
    "ImageRecord",
    "LabelMap",
    "LossInputs",
    "MAP_THRESHOLDS",
    "MatchResult",
    "MetricsReport",
    "PipelineConfig",
    "Raster",
    "SeedSet",
    "SynthSpec",
    "ZStack",
    "backend_name",
    "combined_loss",
    "compiled_available",
    "connected_components",
    "crop_at",
    "crop_offsets",
    "distance_map",
    "extract_seeds",
    "h_maxima",
    "has_instances",
    "instance_bearing_crops",
    "instance_segment",
    "iou",
    "load_labels",
    "load_raster",
    "load_stack",
    "map_score",
    "match_instances",
    "max_project",
    "pcc",
    "precision_at",
    "random_crops",
    "reconstruct_by_dilation",
    "regional_maxima",
    "save_labels",
    "save_raster",
    "seeded_watershed",
    "set_backend",
    "shifted_sigmoid",
    "split_train_test",
    "summarize",
    "synth_instances",
    "threshold_semantic",
]
