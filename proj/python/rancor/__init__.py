"""Deformable image registration with TV-regularized dual optimization."""

from ._rancor import (
    certify,
    endpoint_error,
    make_smooth_deformation,
    make_test_pair,
    normalize,
    register_volumes,
    sad,
    target_overlap,
    warp,
    warp_labels,
    RancorError,
)

__all__ = [
    "certify",
    "endpoint_error",
    "make_smooth_deformation",
    "make_test_pair",
    "normalize",
    "register_volumes",
    "sad",
    "target_overlap",
    "warp",
    "warp_labels",
    "RancorError",
]
