"""Vessel morphometry and segmentation-bias analysis toolkit."""

__version__ = "0.1.0"

from .raster import (
    DEFAULT_SPACING_UM,
    BinaryMask,
    GrayImage,
    ImageStack,
    load_image,
    load_mask,
    max_intensity_projection,
    save_image,
    save_mask,
)
from .rng import Rng
from .segmentation import (
    SegmenterParams,
    adaptive_threshold,
    gaussian_filter,
    remove_small_components,
    segment,
)
from .skeleton import Segment, Skeleton, SkeletonGraph, decompose, skeletonize
from .tortuosity import (
    TortuosityMap,
    TortuosityParams,
    image_tortuosity,
    point_tortuosity,
    tortuosity_map,
)
from .elastic import DisplacementField, ElasticParams, augment_pair, make_field, warp_image, warp_mask
from .metrics import LabelSet, TortuositySet, dice, iou, relative_iou, relative_tortuosity, repetitions
from .synth import VesselSpec, oracle_tortuosity, render
from .manifest import DatasetManifest, ManifestEntry, rank_and_select, scan_corpus, windows_and_split
from .backends import Backend, BackendError, resolve_backend, run_backend
from .sweep import SweepConfig, SweepResult, emit_results, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
