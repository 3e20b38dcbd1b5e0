"""Command-line entry points for the full pipeline.

Subcommands: distill, gen-clicks, train-decoder, train-joint, segment,
eval-stability, eval-consistency, export-selection, render-views, serve.
Exit codes: 0 success, 2 validation error, 3 numeric abort. With --json
the primary result is printed as one JSON document on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .checkpoint import (Checkpoint, CheckpointError, STAGE_DECODER, STAGE_ENCODER,
                         STAGE_JOINT, load_checkpoint, save_checkpoint)
from .config import ConfigError, load_config
from .evaluation import (binarize, consistency_check, fusion_baseline, otsu_threshold,
                         stability_eval)
from .geometry import ClickSet, MeshError, NEGATIVE, POSITIVE, export_selection, load_obj
from .model import Model, ModelError
from .numerics import NumericError
from .rasterizer import ViewSampler, rasterize, render_color, visible_vertices, write_png
from .service import MeshSegService, serve_forever
from .teacher import SyntheticTeacher, TeacherError
from .training import (distill_encoder, evaluate_click_iou, generate_click_dataset,
                       load_click_dataset, save_click_dataset, train_decoder,
                       train_joint_ablation)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def parse_clicks(text: str) -> ClickSet:
    """Parse "12:+,40:-" into a ClickSet."""
    pos, neg = [], []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        if len(parts) != 2 or parts[1] not in ("+", "-"):
            raise ValueError(f"bad click token {token!r}, expected VID:+ or VID:-")
        vid = int(parts[0])
        (pos if parts[1] == "+" else neg).append(vid)
    return ClickSet.of(pos, neg)


def _emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload))
    else:
        for key, value in payload.items():
            if isinstance(value, (list, dict)):
                value = json.dumps(value) if len(json.dumps(value)) < 200 else "…"
            print(f"{key}: {value}")


def _setup(args):
    mesh = load_obj(args.mesh)
    train_cfg, enc_cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, seed=args.seed)
    return mesh, train_cfg, enc_cfg


def cmd_distill(args) -> int:
    mesh, cfg, enc_cfg = _setup(args)
    os.makedirs(args.out, exist_ok=True)
    teacher = SyntheticTeacher(d=enc_cfg.out_dim)
    log_path = os.path.join(args.out, "distill_log.jsonl")
    params, enc_cfg, summary = distill_encoder(mesh, cfg, teacher, enc_cfg,
                                               log_path=log_path)
    ckpt_path = os.path.join(args.out, "encoder.ckpt")
    save_checkpoint(ckpt_path, Checkpoint(
        stage=STAGE_ENCODER, seed=cfg.seed, mesh_hash=mesh.content_hash(),
        enc_cfg=enc_cfg, enc_params=params))
    summary["checkpoint"] = ckpt_path
    summary["log"] = log_path
    _emit(args, summary)
    return EXIT_NUMERIC if summary["aborted"] else EXIT_OK


def cmd_gen_clicks(args) -> int:
    mesh, cfg, enc_cfg = _setup(args)
    teacher = SyntheticTeacher(d=enc_cfg.out_dim)
    records, samples, _, summary = generate_click_dataset(mesh, cfg, teacher)
    dataset_dir = os.path.join(args.out, "clicks")
    save_click_dataset(dataset_dir, records, samples, teacher.d)
    summary["dataset"] = dataset_dir
    summary["records"] = len(records)
    summary["samples"] = len(samples)
    _emit(args, summary)
    return EXIT_OK


def cmd_train_decoder(args) -> int:
    mesh, cfg, _ = _setup(args)
    ckpt = load_checkpoint(args.encoder, mesh=mesh)
    records, samples = load_click_dataset(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "decoder_log.jsonl")
    dec_params, dec_cfg, summary = train_decoder(
        mesh, ckpt.enc_params, ckpt.enc_cfg, records, samples, cfg, log_path=log_path)
    ckpt_path = os.path.join(args.out, "decoder.ckpt")
    save_checkpoint(ckpt_path, Checkpoint(
        stage=STAGE_DECODER, seed=cfg.seed, mesh_hash=mesh.content_hash(),
        enc_cfg=ckpt.enc_cfg, enc_params=ckpt.enc_params,
        dec_cfg=dec_cfg, dec_params=dec_params))
    summary["checkpoint"] = ckpt_path
    summary["log"] = log_path
    _emit(args, summary)
    return EXIT_NUMERIC if summary["aborted"] else EXIT_OK


def cmd_train_joint(args) -> int:
    mesh, cfg, enc_cfg = _setup(args)
    teacher = SyntheticTeacher(d=enc_cfg.out_dim)
    records, samples = load_click_dataset(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "joint_log.jsonl")
    enc_params, dec_params, enc_cfg, dec_cfg, summary = train_joint_ablation(
        mesh, cfg, teacher, records, samples, w=args.weight, enc_cfg=enc_cfg,
        epochs=args.epochs, log_path=log_path)
    ckpt_path = os.path.join(args.out, "joint.ckpt")
    save_checkpoint(ckpt_path, Checkpoint(
        stage=STAGE_JOINT, seed=cfg.seed, mesh_hash=mesh.content_hash(),
        enc_cfg=enc_cfg, enc_params=enc_params, dec_cfg=dec_cfg, dec_params=dec_params))
    summary["checkpoint"] = ckpt_path
    summary["log"] = log_path
    _emit(args, summary)
    return EXIT_NUMERIC if summary["aborted"] else EXIT_OK


def cmd_segment(args) -> int:
    mesh = load_obj(args.mesh)
    clicks = parse_clicks(args.clicks)
    model = Model(mesh, load_checkpoint(args.checkpoint, mesh=mesh))
    t0 = time.perf_counter()
    field = model.predict(clicks)
    elapsed = (time.perf_counter() - t0) * 1000.0
    thr, degenerate = otsu_threshold(field.p)
    payload = {
        "probabilities": [float(x) for x in field.p],
        "threshold_otsu": float(thr),
        "threshold_degenerate": bool(degenerate),
        "model_id": model.model_id,
        "elapsed_ms": elapsed,
    }
    if args.json:
        print(json.dumps(payload))
    else:
        sel = field.p > (0.5 if degenerate else thr)
        print(f"n={mesh.n} mean_p={field.p.mean():.4f} "
              f"threshold={thr:.4f} selected={int(sel.sum())} "
              f"elapsed_ms={elapsed:.1f}")
    return EXIT_OK


def cmd_eval_stability(args) -> int:
    mesh, cfg, enc_cfg = _setup(args)
    model = Model(mesh, load_checkpoint(args.checkpoint, mesh=mesh))
    model.require_trained()
    rng = np.random.default_rng(cfg.seed + 17)
    clicks = rng.choice(mesh.n, size=min(args.clicks_count, mesh.n), replace=False)
    payload = {}
    if args.method in ("engine", "both"):
        rep = stability_eval(mesh, model.predictor(), clicks, method="engine")
        payload["engine"] = rep.to_dict()
    if args.method in ("fusion", "both"):
        teacher = SyntheticTeacher(d=enc_cfg.out_dim)
        sampler = ViewSampler(cfg.view_policy(), cfg.seed + 18)
        cams = sampler.take(args.fusion_views)
        rasters = [rasterize(mesh, c) for c in cams]

        def predict(cs: ClickSet):
            return fusion_baseline(mesh, teacher, cs.positive[0], cams, rasters).p

        rep = stability_eval(mesh, predict, clicks, method="fusion")
        payload["fusion"] = rep.to_dict()
    if "engine" in payload and "fusion" in payload:
        payload["engine_not_worse"] = \
            payload["engine"]["mean_iou"] >= payload["fusion"]["mean_iou"]
    _emit(args, payload)
    return EXIT_OK


def cmd_eval_consistency(args) -> int:
    mesh, cfg, _ = _setup(args)
    model = Model(mesh, load_checkpoint(args.checkpoint, mesh=mesh))
    model.require_trained()
    rng = np.random.default_rng(cfg.seed + 19)
    clicks = rng.choice(mesh.n, size=min(args.clicks_count, mesh.n), replace=False)
    sampler = ViewSampler(cfg.view_policy(), cfg.seed + 20)
    views = sampler.take(args.views)
    per_click = []
    for vid in clicks:
        field = model.predict(ClickSet.of([int(vid)]))
        per_click.append(bool(consistency_check(mesh, field.p, views)))
    payload = {
        "views": args.views,
        "clicks": len(per_click),
        "per_click": per_click,
        "all_consistent": all(per_click),
    }
    _emit(args, payload)
    return EXIT_OK


def cmd_export_selection(args) -> int:
    mesh = load_obj(args.mesh)
    clicks = parse_clicks(args.clicks)
    model = Model(mesh, load_checkpoint(args.checkpoint, mesh=mesh))
    field = model.predict(clicks)
    if args.threshold == "otsu":
        selected = binarize(field.p)
    else:
        selected = field.p > float(args.threshold)
    ply_path = args.out + ".ply"
    sidecar_path = args.out + ".json"
    export_selection(mesh, field.p, selected, ply_path, sidecar_path)
    _emit(args, {"ply": ply_path, "sidecar": sidecar_path,
                 "selected": int(selected.sum()), "n": mesh.n})
    return EXIT_OK


def cmd_render_views(args) -> int:
    mesh, cfg, _ = _setup(args)
    os.makedirs(os.path.join(args.out, "images"), exist_ok=True)
    sampler = ViewSampler(cfg.view_policy(), cfg.seed + 21)
    rng = np.random.default_rng(cfg.seed + 22)
    views = []
    for i in range(args.count):
        cam = sampler.sample()
        raster = rasterize(mesh, cam)
        img = render_color(mesh, cam)
        image_file = f"images/v{i:05d}.png"
        write_png(os.path.join(args.out, image_file), img)
        vis = np.where(visible_vertices(mesh, cam, raster))[0]
        prompts = []
        guard = 0
        from .rasterizer import project_vertices

        screen, _ = project_vertices(mesh.vertices, cam)
        while len(prompts) < args.prompts_per_view and guard < 200:
            guard += 1
            vid = int(rng.choice(vis))
            px = int(np.floor(screen[vid, 0]))
            py = int(np.floor(screen[vid, 1]))
            if not raster.coverage[py, px]:
                continue
            prompts.append({"x": px, "y": py, "sign": POSITIVE, "vertex": vid})
        views.append({
            "view_id": f"v{i:05d}",
            "camera": cam.to_dict(),
            "image_file": image_file,
            "prompts": prompts,
        })
    bundle = {
        "version": 1,
        "kind": "render-bundle",
        "width": cfg.image_size,
        "height": cfg.image_size,
        "mesh_hash": mesh.content_hash(),
        "views": views,
    }
    with open(os.path.join(args.out, "bundle.json"), "w") as fh:
        json.dump(bundle, fh, indent=1, sort_keys=True)
    _emit(args, {"bundle": os.path.join(args.out, "bundle.json"),
                 "views": len(views)})
    return EXIT_OK


def cmd_serve(args) -> int:
    mesh = load_obj(args.mesh)
    model = Model(mesh, load_checkpoint(args.checkpoint, mesh=mesh))
    model.require_trained()
    serve_forever(MeshSegService(model), args.host, args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshseg",
        description="Interactive click-conditioned 3D mesh segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True, config=True):
        p.add_argument("--mesh", required=True, help="OBJ mesh path")
        if config:
            p.add_argument("--config", default=None, help="JSON config path")
            p.add_argument("--seed", type=int, default=None, help="seed override")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--json", action="store_true", help="machine-readable stdout")

    p = sub.add_parser("distill", help="stage-1 feature field distillation")
    common(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("gen-clicks", help="simulate click supervision data")
    common(p)
    p.set_defaults(func=cmd_gen_clicks)

    p = sub.add_parser("train-decoder", help="stage-2 decoder training")
    common(p)
    p.add_argument("--encoder", required=True, help="stage-1 checkpoint")
    p.add_argument("--dataset", required=True, help="click dataset directory")
    p.set_defaults(func=cmd_train_decoder)

    p = sub.add_parser("train-joint", help="joint-training ablation")
    common(p)
    p.add_argument("--dataset", required=True, help="click dataset directory")
    p.add_argument("--weight", type=float, default=None, help="encoder loss weight")
    p.add_argument("--epochs", type=int, default=None, help="epoch budget override")
    p.set_defaults(func=cmd_train_joint)

    p = sub.add_parser("segment", help="query a trained model")
    common(p, out=False, config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clicks", required=True, help='e.g. "12:+,40:-"')
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval-stability", help="one-ring stability report")
    common(p, out=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clicks-count", type=int, default=100)
    p.add_argument("--fusion-views", type=int, default=100)
    p.add_argument("--method", choices=("engine", "fusion", "both"), default="both")
    p.set_defaults(func=cmd_eval_stability)

    p = sub.add_parser("eval-consistency", help="multi-view agreement check")
    common(p, out=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--views", type=int, default=16)
    p.add_argument("--clicks-count", type=int, default=20)
    p.set_defaults(func=cmd_eval_consistency)

    p = sub.add_parser("export-selection", help="write PLY + JSON selection")
    common(p, out=False, config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clicks", required=True)
    p.add_argument("--threshold", default="otsu", help='"otsu" or a number')
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_export_selection)

    p = sub.add_parser("render-views", help="emit image+prompt bundle")
    common(p)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--prompts-per-view", type=int, default=1)
    p.set_defaults(func=cmd_render_views)

    p = sub.add_parser("serve", help="HTTP segmentation service")
    common(p, out=False, config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8761)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MeshError, TeacherError, CheckpointError, ModelError, ConfigError,
            ValueError, IndexError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
