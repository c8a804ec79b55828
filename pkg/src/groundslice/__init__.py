"""Ground segmentation toolkit for sliced-frame parallel LiDAR processing."""

from .config import RunConfig, default_config, load_config, save_config
from .kitti_io import PointCloud, load_frame, load_labels, load_velodyne_bin
from .metrics import EvalStats, aggregate, confusion, f1, iou
from .parallel_exec import (Frame, SliceExecutor, allocate, frame_from_cloud,
                            frame_from_ssl, run_sliced, time_baseline)
from .range_image import RangeImage, merge_masks, project_spherical, slice_columns
from .ssl_frame import SslFrame, SslRawFrame, decode_ssl_frame, encode_ssl_frame

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "default_config", "load_config", "save_config",
    "PointCloud", "load_frame", "load_labels", "load_velodyne_bin",
    "EvalStats", "aggregate", "confusion", "f1", "iou",
    "Frame", "SliceExecutor", "allocate", "frame_from_cloud", "frame_from_ssl",
    "run_sliced", "time_baseline",
    "RangeImage", "merge_masks", "project_spherical", "slice_columns",
    "SslFrame", "SslRawFrame", "decode_ssl_frame", "encode_ssl_frame",
    "__version__",
]
