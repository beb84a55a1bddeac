"""Cue-decomposition toolkit.

Decomposes image datasets into shape-cue (edge-enhancing diffusion) and
texture-cue (Voronoi-shuffled) versions, builds cue-conflict composites and
corruption sweeps, and computes shape-bias and robustness metrics from
externally produced model prediction logs.
"""
from .conflict import ConflictPair, ConflictSpec, build_pairing, compose
from .corrupt import (DEFAULT_GRIDS, IDENTITY_INTENSITY, KINDS, apply_corruption,
                      contrast, highpass, lowpass, phase_noise, sweep, uniform_noise)
from .eed import (DEFAULT_STEPS_CLASSIFICATION, DEFAULT_STEPS_SEGMENTATION, EedParams,
                  TAU_LIMIT, charbonnier, diffuse_step, diffusion_tensor,
                  gaussian_kernel, gaussian_smooth, run_eed, structure_tensor)
from .estimators import (Corruptor, DiamondShuffler, EdgeEnhancingDiffusion,
                         PatchShuffler, TextureResidual, VoronoiShuffler)
from .image import (ImageDecodeError, ImageLoadError, UnsupportedBitDepthError,
                    load_image, load_mask, quantize, resize_bilinear,
                    resize_center_crop, save_image, save_mask)
from .manifest import DatasetManifest, ManifestEntry
from .metrics import (ClassificationRecord, ConflictRecord, MetricTable,
                      QualityRecord, QualityTriple, SegmentationRecord, accuracy,
                      build_metric_table, confusion_from_labels, cue_conflict_bias,
                      cue_normalizers, cue_robustness, mean_iou, mean_quality,
                      rankdata, read_prediction_log, relative_robustness,
                      shape_bias, spearman)
from .rng import RngStream, derive_stream
from .shuffle import (VoronoiDiagram, assign_cells, default_half_diag, diamond_shuffle,
                      patch_shuffle, sample_shifts, sample_sites, texture_residual,
                      texture_residual_patched, voronoi_shuffle)

__version__ = "0.1.0"
