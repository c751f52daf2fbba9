"""Command-line entry point: ``vipelab <subcommand> [flags]``.

Exit codes: 0 on success, 2 on usage errors, 1 on I/O or validation errors
(with a one-line JSON error record on stderr). Result tables go to stdout;
``--out`` files hold line-delimited JSON records.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .camera import normalize_2d
from .errors import DatasetError, DimensionError, FrozenDecoderError, VipeError
from .experiment import (evaluate, heldout_pairs, keypoint_indexes, label_poses,
                         mapper_indexes, mapper_training_data, train_models, vae_training_poses)
from .genlab import DEFAULT_ALPHAS, embedding_viz_export, interpolate, perturb, random_direction
from .mapper import Mapper2D, encode2d, lift, train_mapper
from .pose import canonicalize
from .skeleton import Skeleton
from .retrieval import EmbeddingIndex, hit_at_k_rig, knn_query, mpjpe_eval
from .synth import generate_dataset, read_dataset, read_pose_records, write_pose_records
from .vae import VaeModel, encode, train_vae

SUBCOMMANDS = ("gen-data", "train-vae", "train-mapper", "eval-hit", "eval-mpjpe", "lift", "retrieve",
               "generate", "interpolate", "export-viz", "ablate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (sections: synth, vae, mapper, eval)")
    p.add_argument("--seed", type=int, help="random seed (overrides VIPELAB_SEED and the config)")
    p.add_argument("--workers", type=int, help="parallel workers (overrides VIPELAB_WORKERS and the config)")


def _vae_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", type=int, help="minibatch size")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--hidden-dim", type=int, help="hidden width of the residual MLPs")
    p.add_argument("--augment", action="store_true", default=None,
                   help="add a randomly rotated copy of every batch")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vipelab", description="View-invariant pose embeddings: data, training, evaluation.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a synthetic multi-camera dataset")
    _common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n-poses", type=int, help="number of poses (overrides synth.n_poses)")

    p = sub.add_parser("train-vae", help="train the 3D pose VAE")
    _common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint path prefix")
    p.add_argument("--log", help="training log file (default: <out>.log.jsonl)")
    _vae_flags(p)
    p.add_argument("--latent-dim", type=int, help="embedding dimension")
    p.add_argument("--w-kl", type=float, help="KL loss weight")
    p.add_argument("--w-triplet", type=float, help="triplet loss weight")
    p.add_argument("--no-canonical-rotation", action="store_true",
                   help="train on camera-frame poses instead of rotation-canonicalized ones")

    p = sub.add_parser("train-mapper", help="train the 2D-to-embedding mapper against a frozen decoder")
    _common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--decoder", required=True, help="VAE checkpoint whose decoder is frozen")
    p.add_argument("--out", required=True, help="checkpoint path prefix")
    p.add_argument("--log", help="training log file (default: <out>.log.jsonl)")
    _vae_flags(p)
    p.add_argument("--w-triplet", type=float, help="triplet loss weight")

    p = sub.add_parser("eval-hit", help="cross-view retrieval Hit@k")
    _common(p)
    p.add_argument("--mapper", required=True, help="mapper checkpoint")
    p.add_argument("--decoder", required=True, help="VAE checkpoint the mapper was trained against")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--ks", type=_int_list, help="comma-separated k values (default 1,10,20)")
    p.add_argument("--threshold", type=float, help="PA-MPJPE threshold for a hit (default 0.1)")
    p.add_argument("--split", help="split to evaluate (default from config, else test)")
    p.add_argument("--pairs", choices=("heldout", "all"), default="heldout",
                   help="camera pairs: train/held-out combinations, or every ordered pair")
    p.add_argument("--exclude-self", action="store_true", default=None,
                   help="drop the query's own entry (same pose and camera) from the gallery")
    p.add_argument("--baseline", action="store_true", help="also report the 2D keypoint baseline")
    p.add_argument("--out", help="write result records (JSON lines) here")

    p = sub.add_parser("eval-mpjpe", help="lifting error of the mapper + decoder")
    _common(p)
    p.add_argument("--mapper", required=True, help="mapper checkpoint")
    p.add_argument("--decoder", required=True, help="VAE checkpoint")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", help="split to evaluate (default from config, else test)")
    p.add_argument("--cameras", type=_int_list, help="comma-separated camera ids (default: all)")
    p.add_argument("--out", help="write result records (JSON lines) here")

    p = sub.add_parser("lift", help="lift 2D keypoint records to 3D")
    _common(p)
    p.add_argument("--mapper", required=True, help="mapper checkpoint")
    p.add_argument("--decoder", required=True, help="VAE checkpoint")
    p.add_argument("--in", dest="inp", required=True, help="records with joints2d")
    p.add_argument("--out", required=True, help="output records with joints3d")

    p = sub.add_parser("retrieve", help="nearest gallery poses for 2D query records")
    _common(p)
    p.add_argument("--mapper", required=True, help="mapper checkpoint")
    p.add_argument("--data", required=True, help="gallery dataset directory")
    p.add_argument("--query", required=True, help="records with joints2d")
    p.add_argument("--k", type=int, default=10, help="neighbours per query (default 10)")
    p.add_argument("--cameras", type=_int_list, help="gallery camera ids (default: all)")
    p.add_argument("--split", help="gallery split (default from config, else test)")
    p.add_argument("--out", help="write neighbour records (JSON lines) here")

    p = sub.add_parser("generate", help="decode noise-perturbed embeddings")
    _common(p)
    p.add_argument("--decoder", required=True, help="VAE checkpoint")
    p.add_argument("--embed", required=True, help="records with an embedding or joints3d")
    p.add_argument("--alphas", type=_float_list, help="comma-separated step sizes (default 0.2,0.3,0.4,0.5)")
    p.add_argument("--n-directions", type=int, default=1, help="random directions per embedding (default 1)")
    p.add_argument("--out", required=True, help="output pose records")

    p = sub.add_parser("interpolate", help="decode a straight path between two poses' embeddings")
    _common(p)
    p.add_argument("--decoder", required=True, help="VAE checkpoint")
    p.add_argument("--a", required=True, help="record file for the start pose (first record used)")
    p.add_argument("--b", required=True, help="record file for the end pose (first record used)")
    p.add_argument("--steps", type=int, default=5, help="poses on the path, endpoints included (default 5)")
    p.add_argument("--out", required=True, help="output pose records")

    p = sub.add_parser("export-viz", help="2D PCA projection of embeddings as CSV")
    _common(p)
    p.add_argument("--decoder", required=True, help="VAE checkpoint (its encoder embeds 3D poses)")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--mapper", help="embed 2D records with this mapper instead of 3D poses")
    p.add_argument("--split", help="split to export (default from config, else test)")
    p.add_argument("--out", required=True, help="output CSV (x,y,label)")

    p = sub.add_parser("ablate", help="train and evaluate a reference run and ablated variants")
    _common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory for checkpoints and results")
    p.add_argument("--no-triplet", action="store_true", help="variant with the triplet weight set to 0")
    p.add_argument("--no-canonical-rotation", action="store_true",
                   help="variant trained without rotation canonicalization")
    p.add_argument("--vae-epochs", type=int, help="VAE epochs for every run")
    p.add_argument("--mapper-epochs", type=int, help="mapper epochs for every run")
    p.add_argument("--hidden-dim", type=int, help="hidden width for every network")
    return parser


# ---------------------------------------------------------------- helpers

def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


def _write_jsonl(records, path) -> None:
    try:
        Path(path).write_text("".join(_dump(r) + "\n" for r in records), encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


def _table(rows: list[dict], columns: list[str]) -> str:
    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)
    body = [[cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def _array(records, key: str, shape_tail: tuple, source) -> np.ndarray:
    try:
        arr = np.array([r[key] for r in records], dtype=float)
    except KeyError as exc:
        raise DatasetError(f"{source}: every record needs a {key!r} field") from exc
    except ValueError as exc:
        raise DatasetError(f"{source}: malformed {key!r}: {exc}") from exc
    if arr.shape[1:] != shape_tail:
        raise DimensionError(f"{source}: {key} has shape {arr.shape[1:]}, expected {shape_tail}")
    return arr


def _check_pair(mapper: Mapper2D, vae: VaeModel) -> None:
    if mapper.decoder_digest and mapper.decoder_digest != vae.decoder.digest():
        raise FrozenDecoderError("mapper was trained against a different decoder")


def _split(doc: dict, flag: str | None) -> str:
    return flag or doc.get("eval", {}).get("split", "test")


def _log_path(args) -> Path:
    return Path(args.log) if args.log else Path(str(args.out) + ".log.jsonl")


# ---------------------------------------------------------------- commands

def cmd_gen_data(args, doc, seed, workers):
    cfg = cfgmod.generator_config(doc, seed, n_poses=args.n_poses)
    m = generate_dataset(cfg, cfgmod.skeleton_from(doc), args.out)
    print(_table([{"poses": m.n_poses, "records": m.n_records, "cameras": m.n_cameras,
                   **m.split_counts}], ["poses", "records", "cameras", "train", "val", "test"]))


def cmd_train_vae(args, doc, seed, workers):
    ds = read_dataset(args.data)
    exp = cfgmod.experiment_config(doc, seed, canonical_rotation=False if args.no_canonical_rotation else None)
    cfg = cfgmod.vae_config(doc, seed, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                            hidden_dim=args.hidden_dim, latent_dim=args.latent_dim, augment=args.augment,
                            w_kl=args.w_kl, w_triplet=args.w_triplet)
    x, world = vae_training_poses(ds, exp.train_cameras, exp.canonical_rotation)

    def preprocess(rotated):
        return label_poses(rotated, cfg.augment_config.camera, ds.skeleton, exp.canonical_rotation)

    model, history = train_vae(x, cfg, preprocess=preprocess, world_poses=world)
    model.meta.update(canonical_rotation=exp.canonical_rotation, skeleton=ds.skeleton.to_dict(),
                      train=cfg.to_dict())
    model.save(args.out)
    _write_jsonl(history, _log_path(args))
    print(_table(history[-1:], ["epoch", "mse", "kl", "triplet", "total"]))


def cmd_train_mapper(args, doc, seed, workers):
    ds = read_dataset(args.data)
    vae = VaeModel.load(args.decoder)
    canonical = bool(vae.meta.get("canonical_rotation", True))
    exp = cfgmod.experiment_config(doc, seed)
    cfg = cfgmod.mapper_config(doc, seed, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                               hidden_dim=args.hidden_dim, augment=args.augment, w_triplet=args.w_triplet)
    x2d, y3d, world = mapper_training_data(ds, exp.train_cameras, canonical)

    def label_fn(rotated, cam):
        return label_poses(rotated, cam, ds.skeleton, canonical)

    mapper, history = train_mapper(x2d, y3d, vae.decoder, cfg, world3d=world, label_fn=label_fn,
                                   root_idx=ds.skeleton.root_idx)
    mapper.meta.update(canonical_rotation=canonical, train=cfg.to_dict())
    mapper.save(args.out)
    _write_jsonl(history, _log_path(args))
    print(_table(history[-1:], ["epoch", "mse", "triplet", "total"]))


def _hit_rows(result: dict, method: str) -> list[dict]:
    rows = [{"method": method, "query_camera": r["query_camera"], "gallery_camera": r["gallery_camera"],
             **{k: v for k, v in r.items() if k.startswith("hit@")}} for r in result["pairs"]]
    rows.append({"method": method, "query_camera": "avg", "gallery_camera": "avg", **result["average"]})
    return rows


def cmd_eval_hit(args, doc, seed, workers):
    ds = read_dataset(args.data)
    mapper = Mapper2D.load(args.mapper)
    _check_pair(mapper, VaeModel.load(args.decoder))
    exp = cfgmod.experiment_config(doc, seed)
    hit = cfgmod.hit_config(doc, args.ks, args.threshold, args.exclude_self)
    split = _split(doc, args.split)
    cams = sorted(set(exp.train_cameras) | set(exp.heldout_cameras)) if args.pairs == "heldout" \
        else sorted(set(ds.camera_ids.tolist()))
    pairs = heldout_pairs(exp.train_cameras, exp.heldout_cameras) if args.pairs == "heldout" else None
    root = ds.skeleton.root_idx
    rows = _hit_rows(hit_at_k_rig(mapper_indexes(mapper, ds, cams, split), hit, pairs, workers, root), "mapper")
    if args.baseline:
        rows += _hit_rows(hit_at_k_rig(keypoint_indexes(ds, cams, split), hit, pairs, workers, root),
                          "baseline_2d")
    print(_table(rows, ["method", "query_camera", "gallery_camera"] + [f"hit@{k}" for k in hit.ks]))
    if args.out:
        _write_jsonl(rows, args.out)


def cmd_eval_mpjpe(args, doc, seed, workers):
    ds = read_dataset(args.data)
    mapper = Mapper2D.load(args.mapper)
    vae = VaeModel.load(args.decoder)
    _check_pair(mapper, vae)
    canonical = bool(mapper.meta.get("canonical_rotation", True))
    split = _split(doc, args.split)
    cams = args.cameras or sorted(set(ds.camera_ids.tolist()))
    rows = []
    for c in cams:
        x, y, _ = mapper_training_data(ds, [c], canonical, split)
        if not len(x):
            raise DatasetError(f"no {split} records for camera {c}")
        pred = vae.decoder(encode2d(mapper, x)).reshape(len(x), -1, 3).astype(float)
        rows.append({"camera": c, "n": len(x), "mpjpe": mpjpe_eval(pred, y),
                     "pa_mpjpe": mpjpe_eval(pred, y, aligned=True, root_idx=ds.skeleton.root_idx)})
    print(_table(rows, ["camera", "n", "mpjpe", "pa_mpjpe"]))
    if args.out:
        _write_jsonl(rows, args.out)


def cmd_lift(args, doc, seed, workers):
    mapper = Mapper2D.load(args.mapper)
    vae = VaeModel.load(args.decoder)
    _check_pair(mapper, vae)
    recs = read_pose_records(args.inp)
    x = _array(recs, "joints2d", (mapper.n_joints, 2), args.inp)
    out3d = lift(mapper, vae.decoder, x, _skeleton(vae, doc).root_idx)
    out = []
    for i, (r, j3, j2) in enumerate(zip(recs, out3d, x)):
        rec = {"id": r.get("id", i)}
        for key in ("split", "camera_id"):
            if key in r:
                rec[key] = r[key]
        out.append({**rec, "joints3d": j3, "joints2d": j2})
    write_pose_records(out, args.out)
    print(f"lifted {len(out)} records -> {args.out}")


def cmd_retrieve(args, doc, seed, workers):
    if args.k < 1:
        raise UsageError("retrieve: --k must be at least 1")
    ds = read_dataset(args.data)
    mapper = Mapper2D.load(args.mapper)
    split = _split(doc, args.split)
    idx = ds.select(split, args.cameras)
    if not len(idx):
        raise DatasetError(f"gallery is empty for split {split!r}")
    root = ds.skeleton.root_idx
    gallery = EmbeddingIndex(ds.ids[idx], ds.camera_ids[idx],
                             encode2d(mapper, normalize_2d(ds.joints2d[idx], root)),
                             canonicalize(ds.joints3d[idx], ds.skeleton))
    recs = read_pose_records(args.query)
    q = encode2d(mapper, normalize_2d(_array(recs, "joints2d", (mapper.n_joints, 2), args.query), root))
    rows = []
    for i, (r, e) in enumerate(zip(recs, q)):
        order, dist = knn_query(gallery, e, args.k)
        for rank, (j, d) in enumerate(zip(order, dist), start=1):
            rows.append({"query": r.get("id", i), "rank": rank, "pose_id": int(gallery.pose_ids[j]),
                         "camera_id": int(gallery.camera_ids[j]), "distance": float(d)})
    print(_table(rows, ["query", "rank", "pose_id", "camera_id", "distance"]))
    if args.out:
        _write_jsonl(rows, args.out)


def _skeleton(vae: VaeModel, doc: dict) -> Skeleton:
    if "skeleton" in vae.meta:
        return Skeleton.from_dict(vae.meta["skeleton"])
    return cfgmod.skeleton_from(doc)


def _embeddings(vae: VaeModel, recs, source, skel: Skeleton) -> np.ndarray:
    if all("embedding" in r for r in recs):
        return _array(recs, "embedding", (vae.latent_dim,), source)
    poses = _array(recs, "joints3d", (vae.n_joints, 3), source)
    rotate = bool(vae.meta.get("canonical_rotation", True))
    mu, _, _ = encode(vae, canonicalize(poses, skel, rotate=rotate), check=False)
    return mu.astype(float)


def cmd_generate(args, doc, seed, workers):
    if args.n_directions < 1:
        raise UsageError("generate: --n-directions must be at least 1")
    vae = VaeModel.load(args.decoder)
    recs = read_pose_records(args.embed)
    emb = _embeddings(vae, recs, args.embed, _skeleton(vae, doc))
    alphas = DEFAULT_ALPHAS if args.alphas is None else tuple(args.alphas)
    rng = np.random.default_rng(seed)
    out = []
    for i, (r, e) in enumerate(zip(recs, emb)):
        for d in range(args.n_directions):
            z = random_direction(rng, len(e))
            for a, pose in zip(alphas, perturb(vae.decoder, e, z, alphas)):
                out.append({"id": len(out), "source_id": r.get("id", i), "direction": d, "alpha": float(a),
                            "joints3d": pose})
    write_pose_records(out, args.out)
    print(f"generated {len(out)} poses -> {args.out}")


def cmd_interpolate(args, doc, seed, workers):
    vae = VaeModel.load(args.decoder)
    skel = _skeleton(vae, doc)
    ends = [_embeddings(vae, read_pose_records(path)[:1], path, skel)[0] for path in (args.a, args.b)]
    poses = interpolate(vae.decoder, ends[0], ends[1], args.steps)
    out = [{"id": t, "step": t, "t": t / (args.steps - 1), "joints3d": p} for t, p in enumerate(poses)]
    write_pose_records(out, args.out)
    print(f"interpolated {len(out)} poses -> {args.out}")


def cmd_export_viz(args, doc, seed, workers):
    ds = read_dataset(args.data)
    vae = VaeModel.load(args.decoder)
    split = _split(doc, args.split)
    if args.mapper:
        mapper = Mapper2D.load(args.mapper)
        _check_pair(mapper, vae)
        idx = ds.select(split)
        emb = encode2d(mapper, normalize_2d(ds.joints2d[idx], ds.skeleton.root_idx))
        labels = [f"{p}:{c}" for p, c in zip(ds.ids[idx], ds.camera_ids[idx])]
    else:
        ids, world = ds.poses(split)
        rotate = bool(vae.meta.get("canonical_rotation", True))
        emb, _, _ = encode(vae, canonicalize(world, ds.skeleton, rotate=rotate), check=False)
        labels = [str(p) for p in ids]
    if len(emb) < 2:
        raise DatasetError(f"need at least 2 embeddings in split {split!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        embedding_viz_export(np.asarray(emb, dtype=float), labels, args.out)
    print(f"exported {len(labels)} points -> {args.out}")


def cmd_ablate(args, doc, seed, workers):
    if not (args.no_triplet or args.no_canonical_rotation):
        raise UsageError("ablate: choose at least one of --no-triplet, --no-canonical-rotation")
    ds = read_dataset(args.data)
    base = cfgmod.experiment_config(doc, seed)
    base.vae = replace(base.vae, **{k: v for k, v in (("epochs", args.vae_epochs),
                                                       ("hidden_dim", args.hidden_dim)) if v is not None})
    base.mapper = replace(base.mapper, **{k: v for k, v in (("epochs", args.mapper_epochs),
                                                             ("hidden_dim", args.hidden_dim)) if v is not None})
    runs = [("reference", base)]
    if args.no_triplet:
        runs.append(("no_triplet", replace(base, vae=replace(base.vae, weights=replace(base.vae.weights, triplet=0.0)),
                                           mapper=replace(base.mapper, w_triplet=0.0))))
    if args.no_canonical_rotation:
        runs.append(("no_canonical_rotation", replace(base, canonical_rotation=False)))
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create {out_dir}: {exc}") from exc
    rows = []
    for name, cfg in runs:
        vae, _, mapper, _ = train_models(ds, cfg)
        vae.save(out_dir / f"{name}.vae")
        mapper.save(out_dir / f"{name}.mapper")
        hits, _, errors = evaluate(ds, mapper, vae.decoder, cfg, workers)
        row = {"run": name, **hits["average"]}
        for group, vals in errors.items():
            row[f"{group}_mpjpe"] = vals["mpjpe"]
        rows.append(row)
    print(_table(rows, ["run"] + [f"hit@{k}" for k in base.hit.ks]))
    _write_jsonl(rows, out_dir / "results.jsonl")


COMMANDS = {
    "gen-data": cmd_gen_data, "train-vae": cmd_train_vae, "train-mapper": cmd_train_mapper,
    "eval-hit": cmd_eval_hit, "eval-mpjpe": cmd_eval_mpjpe, "lift": cmd_lift, "retrieve": cmd_retrieve,
    "generate": cmd_generate, "interpolate": cmd_interpolate, "export-viz": cmd_export_viz,
    "ablate": cmd_ablate,
}


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _error("UsageError", str(exc), 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return _error("UsageError", "a subcommand is required", 2)
    try:
        doc = cfgmod.load_config(args.config)
        seed = cfgmod.resolve_seed(doc, args.seed)
        workers = cfgmod.resolve_workers(doc, args.workers)
        COMMANDS[args.command](args, doc, seed, workers)
    except UsageError as exc:
        return _error("UsageError", str(exc), 2)
    except (VipeError, OSError, ValueError, KeyError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
