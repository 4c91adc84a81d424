"""Service layer - training, sampling and evaluation."""

from anchor_scene.services.codec_service import CodecShapeDecoder, CodecShapeEncoder, CodecTrainer
from anchor_scene.services.corpus_service import ScenePlan, generate_corpus, generate_procedural_scene, plan_corpus
from anchor_scene.services.evaluation_service import MetricReport
from anchor_scene.services.generator_service import GeneratorBundle, GeneratorTrainer
from anchor_scene.services.ports import (
    CheckpointStorePort,
    EventBusPort,
    SceneRepositoryPort,
    ShapeDecoderPort,
    ShapeEncoderPort,
)
from anchor_scene.services.synthesis_service import Region, SceneSynthesizer, mix_anchor_latents

__all__ = [
    "CheckpointStorePort",
    "CodecShapeDecoder",
    "CodecShapeEncoder",
    "CodecTrainer",
    "EventBusPort",
    "GeneratorBundle",
    "GeneratorTrainer",
    "MetricReport",
    "Region",
    "ScenePlan",
    "SceneRepositoryPort",
    "SceneSynthesizer",
    "ShapeDecoderPort",
    "ShapeEncoderPort",
    "generate_corpus",
    "generate_procedural_scene",
    "mix_anchor_latents",
    "plan_corpus",
]
