"""Tabletop object extraction, object-image classification and MUSIC sound localization
for a home-service robot, with deterministic simulators for desk-scale testing."""

from .classifier import (ColorHistogramClassifier, ConfusionTable, Dataset, LabeledImage,
                         augment_brightness, evaluate, make_view_protocol, preprocess, split)
from .cloud import OrganizedCloud
from .geometry import (CameraIntrinsics, PlaneModel, RigidTransform, compose, invert, project_point,
                       signed_plane_distance, transform_point)
from .localization import MicArray, MultichannelSignal, localize, music_spectrum, stft
from .segmentation import (ClusterParams, PassThroughLimits, PipelineConfig, RansacParams,
                           euclidean_cluster, extract_above_plane, make_candidate, pass_through,
                           ransac_plane, run_pipeline, to_robot_frame)

__version__ = "0.1.0"
