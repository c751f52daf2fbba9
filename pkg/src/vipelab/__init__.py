"""View-invariant 3D pose embeddings with a numpy VAE, a 2D mapper and cross-view retrieval."""

from .camera import Camera, project, to_camera
from .errors import VipeError
from .pose import canonicalize, mpjpe, pa_mpjpe, procrustes_align
from .skeleton import Skeleton, default_skeleton

__version__ = "0.1.0"

__all__ = [
    "Camera", "Skeleton", "VipeError", "canonicalize", "default_skeleton", "mpjpe", "pa_mpjpe",
    "procrustes_align", "project", "to_camera",
]
