"""Video-to-keypoint adapter for the rep-judging engine's file formats."""

from .adapter import AdapterConfig, decode_video, export_frames, extract
from .backends import AdapterError, BackendInfo, available_backends, register_backend

__version__ = "0.1.0"
