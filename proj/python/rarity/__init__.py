"""Rare-block detection in grayscale images."""

import json as _json

from ._rarity import (
    GeometryError,
    InputError,
    Shape,
    default_threshold,
    nn_distance_map,
    project,
    projection_histogram,
    rarest_block,
    read_image,
    run_network,
    sample_operator,
    score_image,
    top_candidates,
)
from ._rarity import synthesize as _synthesize


def synthesize(spec):
    """Generate (image, plant origins) from a spec dict or JSON string."""
    if not isinstance(spec, str):
        spec = _json.dumps(spec)
    return _synthesize(spec)


__all__ = [
    "GeometryError",
    "InputError",
    "Shape",
    "default_threshold",
    "nn_distance_map",
    "project",
    "projection_histogram",
    "rarest_block",
    "read_image",
    "run_network",
    "sample_operator",
    "score_image",
    "synthesize",
    "top_candidates",
]
