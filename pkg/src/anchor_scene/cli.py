"""Command-line interface for anchor-scene."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING

from anchor_scene import __version__
from anchor_scene.domain.errors import AnchorSceneError, CheckpointMismatchError, DataError, OutputExistsError

if TYPE_CHECKING:
    from anchor_scene.domain.models import FloorPlanMask, Scene
    from anchor_scene.infrastructure.checkpoint import CheckpointStore
    from anchor_scene.networks.codec import CodecModel
    from anchor_scene.schemas import RunConfig
    from anchor_scene.services.generator_service import GeneratorBundle
    from anchor_scene.services.synthesis_service import SceneSynthesizer

logger = logging.getLogger(__name__)

CODEC_CHECKPOINT = "codec"
GENERATOR_CHECKPOINT = "generator"
LOSS_CSV = "loss.csv"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=Path, help="Run configuration JSON (default: desk preset)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument("--force", action="store_true", help="Overwrite existing outputs")


def _add_generation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", "-m", type=Path, help="Generator checkpoint directory (default: $RD_HOME/generator)")
    parser.add_argument("--out", "-o", type=Path, required=True, help="Output scene JSON")
    parser.add_argument("--obj-dir", type=Path, help="Write one OBJ per furniture here (needs --codec)")
    parser.add_argument("--codec", type=Path, help="Codec checkpoint directory")
    parser.add_argument("--max-objects", type=int, help="Object cap (default: generator config)")


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser."""
    parser = argparse.ArgumentParser(
        prog="anchor-scene",
        description="Anchor-latent furniture codec and permutation-invariant scene generator",
    )
    parser.add_argument(
        "--version",
        "-v",
        action="version",
        version=f"anchor-scene {__version__}",
    )
    parser.add_argument(
        "--log-level",
        "-l",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level (default: RD_LOG_LEVEL or INFO)",
    )

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    # gen-data command
    gen_parser = subparsers.add_parser("gen-data", help="Author a procedural scene corpus")
    _add_common(gen_parser)
    gen_parser.add_argument("--out", "-o", type=Path, required=True, help="Corpus NDJSON path")
    gen_parser.add_argument("--count", "-n", type=int, default=100, help="Number of scenes (default: 100)")
    gen_parser.add_argument("--codec", type=Path, help="Encode shapes with this codec checkpoint directory")

    # train-codec command
    codec_parser = subparsers.add_parser("train-codec", help="Train the shape codec")
    _add_common(codec_parser)
    codec_parser.add_argument("--data", "-d", type=Path, required=True, help="Corpus NDJSON")
    codec_parser.add_argument("--out", "-o", type=Path, help="Checkpoint directory (default: $RD_HOME/codec)")
    codec_parser.add_argument("--epochs", type=int, help="Override codec.epochs")

    # train-scene command
    scene_parser = subparsers.add_parser("train-scene", help="Train the scene generator")
    _add_common(scene_parser)
    scene_parser.add_argument("--data", "-d", type=Path, required=True, help="Encoded corpus NDJSON")
    scene_parser.add_argument("--codec", type=Path, help="Codec checkpoint directory (default: $RD_HOME/codec)")
    scene_parser.add_argument("--out", "-o", type=Path, help="Checkpoint directory (default: $RD_HOME/generator)")
    scene_parser.add_argument("--epochs", type=int, help="Override training.epochs")

    # generate command
    generate_parser = subparsers.add_parser("generate", help="Generate a scene for a floor plan")
    _add_common(generate_parser)
    _add_generation(generate_parser)
    source = generate_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--mask", type=Path, help="Floor document JSON")
    source.add_argument("--mask-from-scene", type=Path, help="Scene JSON or corpus NDJSON")
    generate_parser.add_argument("--index", type=int, default=0, help="Scene line in --mask-from-scene")

    # complete command
    complete_parser = subparsers.add_parser("complete", help="Complete a partial scene")
    _add_common(complete_parser)
    _add_generation(complete_parser)
    complete_parser.add_argument("--partial", type=Path, required=True, help="Partial scene JSON")

    # correct command
    correct_parser = subparsers.add_parser("correct", help="Resample mismatched furniture shapes")
    _add_common(correct_parser)
    _add_generation(correct_parser)
    correct_parser.add_argument("--scene", type=Path, required=True, help="Scene JSON")
    correct_parser.add_argument(
        "--threshold-pct", type=float, default=20.0, help="Likelihood percentile to flag (default: 20)"
    )

    # edit command
    edit_parser = subparsers.add_parser("edit", help="Mix the anchor-latents of two shapes")
    _add_common(edit_parser)
    edit_parser.add_argument("--codec", type=Path, required=True, help="Codec checkpoint directory")
    edit_parser.add_argument("--shape-a", required=True, help="Base shape as CATEGORY:STYLE_SEED")
    edit_parser.add_argument("--shape-b", required=True, help="Donor shape as CATEGORY:STYLE_SEED")
    edit_parser.add_argument("--region", required=True, help="Donor region x0,y0,z0,x1,y1,z1 (canonical frame)")
    edit_parser.add_argument("--out", "-o", type=Path, required=True, help="Output directory")
    edit_parser.add_argument("--scene", type=Path, help="Insert the mixed shape into this scene and complete it")
    edit_parser.add_argument("--index", type=int, default=0, help="Furniture index replaced in --scene")
    edit_parser.add_argument("--model", "-m", type=Path, help="Generator checkpoint directory (with --scene)")

    # eval command
    eval_parser = subparsers.add_parser("eval", help="Evaluate generated scenes")
    _add_common(eval_parser)
    eval_parser.add_argument("--model", "-m", type=Path, help="Generator checkpoint directory")
    eval_parser.add_argument("--codec", type=Path, help="Codec checkpoint directory (shape metrics)")
    eval_parser.add_argument("--data", "-d", type=Path, required=True, help="Reference corpus NDJSON")
    eval_parser.add_argument(
        "--metrics", default="collision,ckl,consistency,diversity", help="Comma-separated metric names"
    )
    eval_parser.add_argument("--n", type=int, help="Generated scenes (default: evaluation.n_scenes)")
    eval_parser.add_argument("--out", "-o", type=Path, required=True, help="Report JSON-lines path")
    eval_parser.add_argument("--on-corpus", action="store_true", help="Score the corpus itself, no generation")

    return parser


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------


def _load_config(args: argparse.Namespace) -> "RunConfig":
    from anchor_scene.schemas import RunConfig

    config = RunConfig.load(args.config)
    logger.info(f"config {config.config_hash()}: {config.canonical_json()}")
    return config


def _checkpoint_dir(path: Path | None, name: str) -> Path:
    """Explicit directory, or ``$RD_HOME/<name>``."""
    from anchor_scene.config import get_config

    return path if path is not None else get_config().home / name


def _guard(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise OutputExistsError(f"{path} exists; pass --force to overwrite")


def _discard_run(store: "CheckpointStore", name: str) -> None:
    """Drop a previous run's checkpoint and loss log so training starts fresh."""
    store.remove(name)
    (store.directory / LOSS_CSV).unlink(missing_ok=True)
    logger.info(f"discarded previous {name} run in {store.directory}")


def _write_scene(path: Path, scene: "Scene", force: bool) -> None:
    from anchor_scene.schemas import scene_to_json

    _guard(path, force)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scene_to_json(scene) + "\n", encoding="utf-8")
    logger.info(f"scene written: {path} ({len(scene)} objects)")


def _read_scene(path: Path, index: int = 0) -> "Scene":
    from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository

    for i, scene in enumerate(NdjsonSceneRepository(path)):
        if i == index:
            return scene
    raise DataError(f"{path} has no scene at index {index}")


def _load_codec(directory: Path) -> tuple["CodecModel", str]:
    from anchor_scene.infrastructure.checkpoint import CheckpointStore
    from anchor_scene.services.codec_service import load_codec

    return load_codec(CheckpointStore(directory), CODEC_CHECKPOINT)


def _load_generator(directory: Path) -> "GeneratorBundle":
    from anchor_scene.infrastructure.checkpoint import CheckpointStore
    from anchor_scene.services.generator_service import load_generator

    return load_generator(CheckpointStore(directory), GENERATOR_CHECKPOINT)


def _synthesizer(bundle: "GeneratorBundle", config: "RunConfig", max_objects: int | None) -> "SceneSynthesizer":
    from anchor_scene.services.synthesis_service import SceneSynthesizer

    return SceneSynthesizer(
        bundle.model,
        bundle.table,
        bundle.stats,
        temperature=config.generator.temperature,
        max_objects=max_objects,
    )


def _export_objs(scene: "Scene", args: argparse.Namespace, bundle: "GeneratorBundle", config: "RunConfig") -> None:
    if args.obj_dir is None:
        return
    if args.codec is None:
        raise DataError("--obj-dir needs --codec to decode shapes")
    from anchor_scene.geometry.grids import export_obj
    from anchor_scene.services.codec_service import CodecShapeDecoder

    codec, codec_hash = _load_codec(args.codec)
    if bundle.codec_hash and bundle.codec_hash != codec_hash:
        raise CheckpointMismatchError("generator was trained against a different codec")
    decoder = CodecShapeDecoder(codec)
    resolution = config.evaluation.grid_resolution
    for i, item in enumerate(scene.furniture):
        if item.shape is None:
            continue
        path = args.obj_dir / f"{i:02d}_{item.category}.obj"
        _guard(path, args.force)
        grid = decoder.decode_grid(item.shape, resolution)
        export_obj(grid, path, config.evaluation.threshold, to_world=item.canonical_to_world)
    logger.info(f"OBJ files written to {args.obj_dir}")


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_gen_data(args: argparse.Namespace) -> None:
    """Author a corpus; with --codec every instance also gets its anchor-latents."""
    import numpy as np

    from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository, sidecar_path
    from anchor_scene.services.codec_service import CodecShapeEncoder
    from anchor_scene.services.corpus_service import generate_corpus

    config = _load_config(args)
    _guard(args.out, args.force)
    _guard(sidecar_path(args.out), args.force)
    extras: dict[str, object] = {"seed": args.seed, "config_hash": config.config_hash()}
    encoder = None
    if args.codec is not None:
        codec, codec_hash = _load_codec(args.codec)
        encoder = CodecShapeEncoder(codec)
        extras["codec_hash"] = codec_hash
    scenes = generate_corpus(config.scene, args.count, np.random.default_rng(args.seed), encoder)
    NdjsonSceneRepository(args.out).write(scenes, extras)


def cmd_train_codec(args: argparse.Namespace) -> None:
    """Train the codec; resumes from the checkpoint in --out unless --force."""
    import numpy as np

    from anchor_scene.domain.events import TrainingStepEvent
    from anchor_scene.infrastructure.checkpoint import CheckpointStore
    from anchor_scene.infrastructure.event_bus import InMemoryEventBus
    from anchor_scene.infrastructure.loss_log import LossCsvWriter
    from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository
    from anchor_scene.networks.codec import CodecModel
    from anchor_scene.services.codec_service import CodecTrainer, solids_from_scenes

    config = _load_config(args)
    out = _checkpoint_dir(args.out, CODEC_CHECKPOINT)
    store = CheckpointStore(out)
    if args.force:
        _discard_run(store, CODEC_CHECKPOINT)
    solids = solids_from_scenes(NdjsonSceneRepository(args.data), config.codec.shapes)
    logger.info(f"training codec on {len(solids)} shapes")

    bus = InMemoryEventBus()
    bus.subscribe(TrainingStepEvent, LossCsvWriter(out / LOSS_CSV, ["L_occ", "L_commit"]))
    rng = np.random.default_rng(args.seed)
    trainer = CodecTrainer(
        CodecModel(config.codec, rng),
        solids,
        rng,
        config_hash=config.config_hash(),
        event_bus=bus,
        store=store,
        checkpoint_name=CODEC_CHECKPOINT,
    )
    trainer.resume()
    trainer.train(args.epochs or config.codec.epochs)


def cmd_train_scene(args: argparse.Namespace) -> None:
    """Train the generator on an encoded corpus; resumes from --out unless --force."""
    import numpy as np

    from anchor_scene.domain.events import TrainingStepEvent
    from anchor_scene.domain.models import CategoryTable
    from anchor_scene.infrastructure.checkpoint import CheckpointStore
    from anchor_scene.infrastructure.event_bus import InMemoryEventBus
    from anchor_scene.infrastructure.loss_log import LossCsvWriter
    from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository
    from anchor_scene.services.generator_service import GeneratorTrainer, build_generator, encode_scene

    config = _load_config(args)
    codec_dir = _checkpoint_dir(args.codec, CODEC_CHECKPOINT)
    out = _checkpoint_dir(args.out, GENERATOR_CHECKPOINT)
    codec, codec_hash = _load_codec(codec_dir)
    repository = NdjsonSceneRepository(args.data)
    if repository.sidecar().get("codec_hash") != codec_hash:
        raise CheckpointMismatchError(f"{args.data} was not encoded with the codec in {codec_dir}")
    store = CheckpointStore(out)
    if args.force:
        _discard_run(store, GENERATOR_CHECKPOINT)

    table = CategoryTable()
    stats = repository.stats()
    scenes = [encode_scene(scene, table, stats) for scene in repository.load_all()]
    floor_shape = (int(scenes[0].floor.shape[0]), int(scenes[0].floor.shape[1]))
    logger.info(f"training generator on {len(scenes)} scenes")

    bus = InMemoryEventBus()
    bus.subscribe(TrainingStepEvent, LossCsvWriter(out / LOSS_CSV, ["L_layout", "L_shape"]))
    rng = np.random.default_rng(args.seed)
    model = build_generator(
        config.generator,
        table,
        codebook_size=codec.config.codebook_size,
        n_anchors=codec.config.n_anchors,
        floor_shape=floor_shape,
        rng=rng,
    )
    trainer = GeneratorTrainer(
        model,
        scenes,
        table,
        stats,
        config.training,
        rng,
        config_hash=config.config_hash(),
        codec_hash=codec_hash,
        event_bus=bus,
        store=store,
        checkpoint_name=GENERATOR_CHECKPOINT,
    )
    trainer.resume()
    trainer.train(args.epochs or config.training.epochs)


def _mask(args: argparse.Namespace) -> tuple["FloorPlanMask", str]:
    from anchor_scene.schemas import floor_from_document

    if args.mask is not None:
        try:
            document = json.loads(args.mask.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise DataError(f"mask not found: {args.mask}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"mask is not valid JSON: {e}") from e
        return floor_from_document(document), "bedroom"
    scene = _read_scene(args.mask_from_scene, args.index)
    return scene.floor, scene.room_type


def cmd_generate(args: argparse.Namespace) -> None:
    """Sample a scene for one floor plan."""
    import numpy as np

    config = _load_config(args)
    _guard(args.out, args.force)
    bundle = _load_generator(_checkpoint_dir(args.model, GENERATOR_CHECKPOINT))
    floor, room_type = _mask(args)
    scene = _synthesizer(bundle, config, args.max_objects).generate_scene(
        floor, np.random.default_rng(args.seed), room_type=room_type
    )
    _write_scene(args.out, scene, args.force)
    _export_objs(scene, args, bundle, config)


def cmd_complete(args: argparse.Namespace) -> None:
    """Continue a partial scene; its furniture is kept verbatim."""
    import numpy as np

    config = _load_config(args)
    _guard(args.out, args.force)
    bundle = _load_generator(_checkpoint_dir(args.model, GENERATOR_CHECKPOINT))
    partial = _read_scene(args.partial)
    scene = _synthesizer(bundle, config, args.max_objects).complete_scene(partial, np.random.default_rng(args.seed))
    _write_scene(args.out, scene, args.force)
    _export_objs(scene, args, bundle, config)


def cmd_correct(args: argparse.Namespace) -> None:
    """Flag low-likelihood furniture and resample its shape."""
    import numpy as np

    config = _load_config(args)
    _guard(args.out, args.force)
    bundle = _load_generator(_checkpoint_dir(args.model, GENERATOR_CHECKPOINT))
    scene = _read_scene(args.scene)
    result = _synthesizer(bundle, config, args.max_objects).correct(
        scene, np.random.default_rng(args.seed), args.threshold_pct
    )
    for i, score in enumerate(result.scores):
        mark = " (flagged)" if i in result.flagged else ""
        logger.info(f"object {i} {scene.furniture[i].category}: log-likelihood {score:.3f}{mark}")
    _write_scene(args.out, result.scene, args.force)
    _export_objs(result.scene, args, bundle, config)


def _shape_spec(text: str) -> tuple[str, int]:
    category, _, seed = text.partition(":")
    try:
        return category, int(seed)
    except ValueError as e:
        raise DataError(f"shape must look like CATEGORY:STYLE_SEED, got {text!r}") from e


def cmd_edit(args: argparse.Namespace) -> None:
    """Mix two shapes' anchor-latents, decode the result, optionally place it in a scene."""
    import numpy as np

    from anchor_scene.domain.errors import ContractViolation
    from anchor_scene.geometry.grids import export_obj
    from anchor_scene.geometry.solids import make_furniture
    from anchor_scene.infrastructure.checkpoint import save_grid
    from anchor_scene.services.codec_service import CodecShapeEncoder, reconstruct_grid
    from anchor_scene.services.synthesis_service import Region, mix_anchor_latents

    config = _load_config(args)
    codec, codec_hash = _load_codec(args.codec)
    encoder = CodecShapeEncoder(codec)
    a = encoder.encode(make_furniture(*_shape_spec(args.shape_a)))
    b = encoder.encode(make_furniture(*_shape_spec(args.shape_b)))
    mixed = mix_anchor_latents(a, b, Region.parse(args.region))
    logger.info(f"mixed shape has {len(mixed)} anchors")

    grid_path, obj_path = args.out / "mixed.rdck", args.out / "mixed.obj"
    _guard(grid_path, args.force)
    _guard(obj_path, args.force)
    grid = reconstruct_grid(codec, mixed, config.codec.grid_resolution)
    save_grid(grid_path, grid)
    export_obj(grid, obj_path, config.evaluation.threshold)

    if args.scene is None:
        return
    if args.model is None:
        raise DataError("--scene needs --model to complete the edited scene")
    bundle = _load_generator(args.model)
    if bundle.codec_hash and bundle.codec_hash != codec_hash:
        raise CheckpointMismatchError("generator was trained against a different codec")
    if len(mixed) != bundle.model.n_anchors:
        raise ContractViolation(
            f"mixed shape has {len(mixed)} anchors; the generator needs exactly {bundle.model.n_anchors}"
        )
    scene = _read_scene(args.scene)
    if not 0 <= args.index < len(scene):
        raise DataError(f"scene has no furniture at index {args.index}")
    kept = scene.furniture[args.index].with_shape(mixed)
    partial = scene.with_furniture([kept])
    completed = _synthesizer(bundle, config, None).complete_scene(partial, np.random.default_rng(args.seed))
    _write_scene(args.out / "scene.json", completed, args.force)


def cmd_eval(args: argparse.Namespace) -> None:
    """Generate scenes from corpus masks and write the selected metric reports."""
    import numpy as np

    from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository
    from anchor_scene.services import evaluation_service as ev
    from anchor_scene.services.codec_service import CodecShapeDecoder

    config = _load_config(args)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = sorted(set(metrics) - set(ev.METRICS))
    if unknown:
        raise DataError(f"unknown metrics {unknown}; choose from {list(ev.METRICS)}")
    _guard(args.out, args.force)
    rng = np.random.default_rng(args.seed)
    reference = NdjsonSceneRepository(args.data).load_all()
    evaluation = config.evaluation
    config_hash = config.config_hash()

    decoder = None
    codec_hash = ""
    if args.codec is not None:
        codec, codec_hash = _load_codec(args.codec)
        decoder = CodecShapeDecoder(codec, evaluation.grid_resolution, evaluation.threshold)

    masks = [scene.floor for scene in reference]
    synthesizer = None
    if args.on_corpus:
        scenes = reference
    else:
        if args.model is None:
            raise DataError("--model is required unless --on-corpus is given")
        bundle = _load_generator(args.model)
        if decoder is not None and bundle.codec_hash and bundle.codec_hash != codec_hash:
            raise CheckpointMismatchError("generator was trained against a different codec")
        synthesizer = _synthesizer(bundle, config, None)
        n = args.n or evaluation.n_scenes
        scenes = [
            synthesizer.generate_scene(
                reference[i % len(reference)].floor,
                np.random.default_rng(int(rng.integers(2**32))),
                room_type=reference[i % len(reference)].room_type,
            )
            for i in range(n)
        ]
        logger.info(f"generated {len(scenes)} scenes")

    def collision() -> tuple[float, list[float]]:
        occupied = [s for s in scenes if len(s)]
        if not occupied:
            raise ev.UndefinedMetricError("every generated scene is empty")
        per_scene = ev.collision_breakdown(occupied, evaluation.collision_eps)
        return float(np.mean(per_scene)), per_scene

    def ckl() -> tuple[float, list[float]]:
        return ev.category_kl(scenes, reference, alpha=evaluation.kl_smoothing), [float(len(s)) for s in scenes]

    def consistency() -> tuple[float, list[float]]:
        if decoder is None:
            raise ev.UndefinedMetricError("consistency needs --codec")
        per_scene = ev.consistency_breakdown(scenes, evaluation.category, decoder)
        if not per_scene:
            raise ev.UndefinedMetricError(f"no scene holds two or more '{evaluation.category}' instances")
        return float(np.mean(per_scene)), per_scene

    def diversity() -> tuple[float, list[float]]:
        if decoder is None or synthesizer is None:
            raise ev.UndefinedMetricError("diversity needs --model and --codec")
        sampler = synthesizer
        per_mask = ev.diversity_breakdown(
            masks[: evaluation.diversity_masks],
            lambda mask, seed_rng: sampler.generate_scene(mask, seed_rng),
            evaluation.diversity_runs,
            evaluation.category,
            decoder,
            rng,
        )
        if not per_mask:
            raise ev.UndefinedMetricError(f"fewer than two runs produced a '{evaluation.category}'")
        return float(np.mean(per_mask)), per_mask

    def inside() -> tuple[float, list[float]]:
        return ev.inside_fraction(scenes), [s.inside_fraction() for s in scenes if len(s)]

    computations = {
        "collision": collision,
        "ckl": ckl,
        "consistency": consistency,
        "diversity": diversity,
        "inside": inside,
    }
    reports = [ev.report(metric, computations[metric], config_hash) for metric in metrics]
    ev.write_reports(args.out, reports)
    logger.info(f"report written: {args.out}")


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point."""
    from anchor_scene.config import get_config, setup_logging

    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 1

    try:
        app_config = get_config()
        app_config.apply_thread_limit()
        setup_logging(args.log_level or app_config.log_level)
    except AnchorSceneError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    commands = {
        "gen-data": cmd_gen_data,
        "train-codec": cmd_train_codec,
        "train-scene": cmd_train_scene,
        "generate": cmd_generate,
        "complete": cmd_complete,
        "correct": cmd_correct,
        "edit": cmd_edit,
        "eval": cmd_eval,
    }

    cmd_func = commands[args.command]
    try:
        cmd_func(args)
    except AnchorSceneError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
