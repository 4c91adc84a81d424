"""Neural networks of both stages."""

from anchor_scene.networks.codec import Codebook, CodecModel
from anchor_scene.networks.generator import AttributePrediction, GeneratorModel, ShapePrediction

__all__ = [
    "AttributePrediction",
    "Codebook",
    "CodecModel",
    "GeneratorModel",
    "ShapePrediction",
]
