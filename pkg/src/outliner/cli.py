"""Command-line front end.

Subcommands: ``gen-supervision``, ``rollout``, ``explore``, ``score``.
Exit codes: 0 success, 1 runtime failure, 2 usage error.  ``--config`` points
at a JSON file of per-command option defaults; explicit flags win.  The
``OUTLINE_LOG`` environment variable sets the log level.  Seeded commands are
bit-reproducible: equal inputs and seeds give byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import click
import numpy as np

from . import __version__
from .coco_ingest import letterbox, load_letterboxed_image, parse_annotations, pixel_polygons
from .env import EpisodeConfig, OutlineEnv, scripted_rollout, Action
from .evaluation import evaluate
from .geometry import PixelPoint, Polygon
from .io_formats import check_manifest, export_dataset, write_episode_trace, write_json_atomic
from .replay import (
    ExplorationContext,
    HistoryQueue,
    PhasePlan,
    queue_file_name,
    random_policy,
    run_phase,
    seed_queue_from_samples,
)
from .statemap import ActionKind
from .supervision import generate_dataset

log = logging.getLogger("outliner")

TARGET = 640


def _setup_logging() -> None:
    level = os.environ.get("OUTLINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


@click.group()
@click.version_option(__version__)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file of per-command option defaults; explicit flags override it.",
)
@click.pass_context
def main(ctx, config):
    """Outline-drawing data tooling."""
    _setup_logging()
    if config:
        try:
            ctx.default_map = json.loads(Path(config).read_text())
        except ValueError as e:
            raise click.UsageError(f"bad config file {config}: {e}")


def _load_letterboxed(ann_path, category_id):
    try:
        raw = parse_annotations(Path(ann_path).read_bytes(), category_id)
    except OSError as e:
        raise click.ClickException(f"cannot read annotations: {e}")
    except Exception as e:
        raise click.ClickException(f"bad annotations: {e}")
    boxed, transforms = letterbox(raw, TARGET)
    return raw, boxed, transforms


def _image_truth(boxed, image_id):
    """Letterboxed ground-truth polygons (integer pixels) for one image."""
    polys = []
    for inst in boxed.instances:
        if inst.image_id == image_id:
            polys.extend(pixel_polygons(inst, TARGET, TARGET))
    return polys


@main.command("gen-supervision")
@click.option("--ann", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--category-id", default=1, show_default=True, type=int)
@click.option("--samples-per-image", default=2, show_default=True, type=int,
              help="Samples of each kind generated per image.")
@click.option("--seed", default=0, show_default=True, type=int)
def gen_supervision(ann, images, out, category_id, samples_per_image, seed):
    """Generate manufactured supervision samples and export them."""
    _, boxed, _ = _load_letterboxed(ann, category_id)
    if not boxed.instances:
        click.echo(f"warning: no instances for category {category_id}", err=True)
    try:
        samples = generate_dataset(boxed, images, samples_per_image, seed, TARGET)
        manifest = export_dataset(samples, out)
        count = check_manifest(manifest)
    except Exception as e:
        raise click.ClickException(str(e))
    click.echo(f"wrote {count} samples to {out}")


def _scripted_episodes(boxed, images_dir, stride, out_dir, config):
    env = OutlineEnv(config)
    predictions = {}
    for image_id in sorted(boxed.images):
        info = boxed.images[image_id]
        truth = _image_truth(boxed, image_id)
        if not truth:
            log.warning("image %d has no usable instances; skipped", image_id)
            continue
        image = load_letterboxed_image(Path(images_dir) / info.file_name, info.width, info.height, TARGET)
        outcomes = scripted_rollout(env, image, truth, stride)
        write_episode_trace(outcomes, Path(out_dir) / f"trace_{image_id:08d}.json")
        predictions[image_id] = list(env.state.found)
    return predictions


def _replayed_episodes(boxed, images_dir, policy_path, out_dir, config):
    try:
        script = json.loads(Path(policy_path).read_text())
        episodes = script["episodes"]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise click.ClickException(f"bad policy script {policy_path}: {e}")
    env = OutlineEnv(config)
    predictions = {}
    for ep in episodes:
        image_id = int(ep["image_id"])
        if image_id not in boxed.images:
            raise click.ClickException(f"policy script references unknown image id {image_id}")
        info = boxed.images[image_id]
        truth = _image_truth(boxed, image_id)
        image = load_letterboxed_image(Path(images_dir) / info.file_name, info.width, info.height, TARGET)
        env.reset(image, truth)
        outcomes = []
        try:
            for a in ep.get("actions", []):
                kind = ActionKind(a["kind"])
                pos = a.get("position")
                action = Action(kind, PixelPoint(int(pos[0]), int(pos[1])) if pos else None)
                outcomes.append(env.step(action))
                if outcomes[-1].done:
                    break
        except Exception as e:
            log.warning("episode for image %d aborted: %s", image_id, e)
        write_episode_trace(outcomes, Path(out_dir) / f"trace_{image_id:08d}.json")
        predictions[image_id] = list(env.state.found)
    return predictions


def _to_original(predictions, transforms):
    """Map letterboxed prediction polygons back to original pixel integers."""
    out = {}
    for image_id, polys in predictions.items():
        tr = transforms[image_id]
        originals = []
        for poly in polys:
            arr = np.array([[v.x, v.y] for v in poly.vertices], dtype=np.float64)
            inv = tr.invert(arr)
            pts = []
            for x, y in inv:
                p = PixelPoint(int(round(x)), int(round(y)))
                if not pts or p != pts[-1]:
                    pts.append(p)
            if len(pts) > 1 and pts[0] == pts[-1]:
                pts.pop()
            try:
                originals.append(Polygon(tuple(pts)))
            except Exception:
                log.warning("prediction for image %d degenerated during unboxing", image_id)
        out[image_id] = originals
    return out


def _predictions_document(predictions):
    return {
        "format": "outline-predictions",
        "coordinates": "original",
        "predictions": [
            {"image_id": image_id, "polygons": [[[v.x, v.y] for v in p.vertices] for p in polys]}
            for image_id, polys in sorted(predictions.items())
        ],
    }


@main.command()
@click.option("--ann", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--scripted-stride", type=float, default=None,
              help="Trace ground truth with pen-downs this many pixels apart.")
@click.option("--policy", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON action script to replay instead of the ground-truth trace.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--category-id", default=1, show_default=True, type=int)
@click.option("--force", is_flag=True, help="Allow writing into a non-empty --out directory.")
def rollout(ann, images, scripted_stride, policy, out, category_id, force):
    """Run episodes (scripted or replayed), score them, write traces."""
    if (scripted_stride is None) == (policy is None):
        raise click.UsageError("exactly one of --scripted-stride / --policy is required")
    config = EpisodeConfig()
    if scripted_stride is not None and scripted_stride > config.max_step_px:
        raise click.UsageError(
            f"stride {scripted_stride:g} exceeds the {config.max_step_px:.0f}-pixel "
            "limit between consecutive pen positions"
        )
    out_dir = Path(out)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise click.ClickException(f"output directory {out} is not empty (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)

    raw, boxed, transforms = _load_letterboxed(ann, category_id)
    try:
        if scripted_stride is not None:
            predictions = _scripted_episodes(boxed, images, scripted_stride, out_dir, config)
        else:
            predictions = _replayed_episodes(boxed, images, policy, out_dir, config)
        originals = _to_original(predictions, transforms)
        report = evaluate(originals, raw)
    except click.ClickException:
        raise
    except Exception as e:
        raise click.ClickException(str(e))
    write_json_atomic(_predictions_document(originals), out_dir / "predictions.json")
    write_json_atomic(report.to_dict(), out_dir / "report.json")
    (out_dir / "report.txt").write_text(report.to_text() + "\n")
    click.echo(report.to_text())


@main.command()
@click.option("--ann", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--queues", required=True, type=click.Path(file_okay=False),
              help="Directory of per-image queue files; existing files are resumed.")
@click.option("--phases", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--category-id", default=1, show_default=True, type=int)
@click.option("--images-per-phase", default=10, show_default=True, type=int)
@click.option("--steps-per-phase", default=500, show_default=True, type=int)
@click.option("--seed-samples", default=1, show_default=True, type=int,
              help="Manufactured samples of each kind used to seed a fresh queue.")
def explore(ann, images, queues, phases, seed, category_id, images_per_phase, steps_per_phase, seed_samples):
    """Epsilon-greedy exploration phases over the annotated images."""
    if phases <= 0:
        click.echo("nothing to do (0 phases)")
        return
    _, boxed, _ = _load_letterboxed(ann, category_id)
    queue_dir = Path(queues)
    queue_dir.mkdir(parents=True, exist_ok=True)

    contexts = {}
    try:
        for image_id in sorted(boxed.images):
            info = boxed.images[image_id]
            truth = _image_truth(boxed, image_id)
            if not truth:
                log.warning("image %d has no usable instances; skipped", image_id)
                continue
            image = load_letterboxed_image(Path(images) / info.file_name, info.width, info.height, TARGET)
            qpath = queue_dir / queue_file_name(image_id)
            if qpath.is_file():
                queue = HistoryQueue.load(qpath)
            else:
                queue = HistoryQueue(image_id)
                only_this = type(boxed)(
                    images={image_id: info},
                    instances=[i for i in boxed.instances if i.image_id == image_id],
                    category_id=boxed.category_id,
                )
                seeded = seed_queue_from_samples(
                    queue, generate_dataset(only_this, images, seed_samples, seed, TARGET)
                )
                log.info("seeded queue for image %d with %d samples", image_id, seeded)
            contexts[image_id] = ExplorationContext(
                image_id=image_id, env=OutlineEnv(), image=image, truth=truth, queue=queue
            )
        if not contexts:
            raise click.ClickException("no usable images to explore")

        plan = PhasePlan(images_per_phase=images_per_phase, steps_per_phase=steps_per_phase, seed=seed)
        callback = random_policy(seed)
        t = 0
        for _ in range(phases):
            t = run_phase(plan, contexts, callback, t, queue_dir=queue_dir)
    except click.ClickException:
        raise
    except Exception as e:
        raise click.ClickException(str(e))
    click.echo(f"explored {t} steps over {phases} phase(s); queues in {queues}")


@main.command()
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Predictions JSON (as written by rollout).")
@click.option("--ann", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--category-id", default=1, show_default=True, type=int)
def score(pred, ann, category_id):
    """Score a predictions file against annotations."""
    try:
        doc = json.loads(Path(pred).read_text())
        entries = doc["predictions"]
    except (OSError, ValueError, KeyError) as e:
        raise click.ClickException(f"bad predictions file {pred}: {e}")
    try:
        raw = parse_annotations(Path(ann).read_bytes(), category_id)
        predictions = {}
        for entry in entries:
            polys = []
            for ring in entry.get("polygons", []):
                polys.append(Polygon(tuple(PixelPoint(int(x), int(y)) for x, y in ring)))
            predictions[int(entry["image_id"])] = polys
        report = evaluate(predictions, raw)
    except click.ClickException:
        raise
    except Exception as e:
        raise click.ClickException(str(e))
    report_path = Path(pred).with_suffix(Path(pred).suffix + ".report.json")
    write_json_atomic(report.to_dict(), report_path)
    click.echo(report.to_text())
    click.echo(f"report written to {report_path}")


if __name__ == "__main__":
    main()
