"""``avsum`` command-line entry point.

Subcommands: synth, train-cer, eval-cer, extract-affect, train-sum,
eval-sum, kld, gradcheck. Exit codes: 0 success, 1 gradient check failed,
2 invalid input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from avsum.config import RunConfig, absolutize, apply_seed_env, load_config, write_resolved
from avsum.errors import AvsumError, ValidationError

log = logging.getLogger("avsum")


# ----------------------------------------------------------------- helpers

def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(text)


def _resolve(args, **overrides) -> RunConfig:
    """Config file, then ``AVSUM_SEED``, then CLI flags that were given."""
    cfg = apply_seed_env(load_config(args.config))
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = cfg
        *path, last = dotted.split(".")
        for p in path:
            target = getattr(target, p)
        setattr(target, last, value)
    return absolutize(cfg)


def _need(value, what: str, flag: str):
    if value is None:
        raise ValidationError(f"missing {what}: pass {flag} or set it in --config")
    return value


def _manifest(cfg: RunConfig):
    from avsum.data.formats import read_manifest

    path = _need(cfg.data.manifest, "corpus manifest", "--manifest")
    if not Path(path).exists():
        raise ValidationError(f"manifest not found: {path}")
    return read_manifest(path)


def _tracks(cfg: RunConfig, ids: list[str]):
    from avsum.affect import load_affect

    affect_dir = _need(cfg.data.affect_dir, "affect track directory (run `avsum extract-affect` first)",
                       "--affect")
    return {i: load_affect(affect_dir, i) for i in ids}


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    from avsum.data.synthetic import SynthParams, generate_synthetic_corpus

    cfg = _resolve(args, out=args.out, seed=args.seed, **{
        "data.synth.n_videos": args.videos, "data.synth.n_frames": args.frames, "data.synth.dim": args.dim,
        "data.synth.sep": args.sep, "data.synth.affect_sep": args.affect_sep,
        "data.synth.face_corr": args.face_corr, "data.synth.n_groups": args.groups,
        "data.synth.key_affect_boost": args.key_affect_boost,
    })
    params = SynthParams(**asdict(cfg.data.synth))
    manifest = generate_synthetic_corpus(params, cfg.seed, cfg.out)
    cfg.data.manifest = str(Path(cfg.out) / "manifest.json")
    write_resolved(cfg, cfg.out, "synth.config.json")
    keys = [int(manifest.load_video(i)[1].key_frames.sum()) for i in manifest.ids]
    payload = {"manifest": cfg.data.manifest, "videos": len(manifest.videos), "frames": params.n_frames,
               "dim": params.dim, "groups": len(set(manifest.groups().values())), "key_frames": sum(keys)}
    _emit(args, payload, f"wrote {len(manifest.videos)} videos ({params.n_frames} frames, D={params.dim}, "
                         f"{payload['groups']} groups) to {cfg.out}")
    return 0


def cmd_train_cer(args) -> int:
    from avsum.cer import CerTrainConfig, save_cer, train_cer

    cfg = _resolve(args, out=args.out, seed=args.seed, **{
        "data.manifest": args.manifest, "cer.attribute": args.attribute, "cer.epochs": args.epochs})
    manifest = _manifest(cfg)
    c = cfg.cer
    tc = CerTrainConfig(attribute=c.attribute, lr=c.lr, batch_size=c.batch_size, epochs=c.epochs,
                        ratios=tuple(c.ratios), split_seed=c.split_seed, seed=cfg.seed, delta=c.delta,
                        filters=c.filters, kernel=c.kernel, hidden=c.hidden)
    result = train_cer(manifest, tc)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"cer-{c.attribute}.ckpt"
    save_cer(result, ckpt)
    (out / f"cer-{c.attribute}.history.json").write_text(json.dumps(result.history, indent=1), encoding="utf-8")
    write_resolved(cfg, out, f"train-cer-{c.attribute}.config.json")
    payload = {"checkpoint": str(ckpt), "attribute": c.attribute, "best_epoch": result.best_epoch,
               "val_ccc": result.best_val_ccc}
    _emit(args, payload, f"{c.attribute}: best epoch {result.best_epoch}, validation CCC "
                         f"{result.best_val_ccc:.4f} -> {ckpt}")
    return 0


def cmd_eval_cer(args) -> int:
    from avsum.cer import evaluate_cer, load_cer

    model, meta = load_cer(args.ckpt)
    manifest_path = args.manifest
    if manifest_path is None:
        sibling = Path(args.ckpt).parent / f"train-cer-{meta['attribute']}.config.json"
        if sibling.exists():
            manifest_path = load_config(sibling).data.manifest
    cfg = RunConfig()
    cfg.data.manifest = manifest_path
    manifest = _manifest(absolutize(cfg))
    split = meta["split"]
    ids = manifest.ids if args.split == "all" else split[args.split]
    if not ids:
        raise ValidationError(f"split {args.split!r} of this checkpoint is empty")
    value = evaluate_cer(model, [manifest.load_video(i) for i in ids], meta["attribute"])
    payload = {"attribute": meta["attribute"], "split": args.split, "epoch": meta["epoch"], "ccc": value}
    _emit(args, payload, f"{meta['attribute']} CCC on {args.split} ({len(ids)} videos): {value:.4f}")
    return 0


def cmd_extract_affect(args) -> int:
    from avsum.affect import extract_affect, save_affect
    from avsum.cer import checkpoint_id, load_cer

    cfg = _resolve(args, out=args.out, **{"data.manifest": args.manifest})
    manifest = _manifest(cfg)
    model_a, meta_a = load_cer(args.ckpt_a)
    model_v, meta_v = load_cer(args.ckpt_v)
    if meta_a["attribute"] != "activation" or meta_v["attribute"] != "valence":
        raise ValidationError("--ckpt-a must be an activation model and --ckpt-v a valence model")
    prov = (checkpoint_id(args.ckpt_a), checkpoint_id(args.ckpt_v))
    for vid in manifest.ids:
        seq, _ = manifest.load_video(vid)
        save_affect(extract_affect(seq, model_a, model_v, prov), cfg.out)
    cfg.data.affect_dir = cfg.out
    write_resolved(cfg, cfg.out, "extract-affect.config.json")
    payload = {"affect_dir": cfg.out, "videos": len(manifest.ids), "provenance": list(prov)}
    _emit(args, payload, f"wrote affect tracks for {len(manifest.ids)} videos to {cfg.out}")
    return 0


def _spec_for(cfg: RunConfig, visual_dim: int, affect_dim: int):
    from avsum.summarizers.models import SummarizerSpec

    s = cfg.summarizer
    return SummarizerSpec(
        variant=s.variant, visual_dim=visual_dim, affect_dim=affect_dim, n_frames=cfg.data.n_frames,
        enc_channels=tuple(s.enc_channels), bottleneck=s.bottleneck, dec_channels=s.dec_channels,
        heads=s.heads, attn_scale=s.attn_scale, residual=s.residual, sa_dim=s.sa_dim,
        encoder_skip=s.encoder_skip,
    )


def _prepared(cfg: RunConfig, manifest, variant_kind):
    from avsum.summarizers.train import prepare_corpus

    videos = [manifest.load_video(i) for i in manifest.ids]
    tracks = _tracks(cfg, manifest.ids) if variant_kind is not None else None
    affect_dim = 2 * next(iter(tracks.values())).hidden if tracks else 2
    spec = _spec_for(cfg, videos[0][0].dim, affect_dim)
    return spec, prepare_corpus(videos, spec, tracks, cfg.data.sampling)


def cmd_train_sum(args) -> int:
    from avsum.data.folds import make_folds
    from avsum.summarizers.models import AFFECT_KIND, VARIANTS
    from avsum.summarizers.train import CRITERIA, TrainRunConfig, train_summarizer

    cfg = _resolve(args, out=args.out, seed=args.seed, **{
        "data.manifest": args.manifest, "data.affect_dir": args.affect, "summarizer.variant": args.variant,
        "summarizer.criterion": args.criterion, "summarizer.epochs": args.epochs, "summarizer.jobs": args.jobs})
    s = cfg.summarizer
    if s.variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {s.variant!r}")
    if s.criterion not in CRITERIA:
        raise ValidationError(f"criterion must be one of {CRITERIA}, got {s.criterion!r}")
    manifest = _manifest(cfg)
    spec, prepared = _prepared(cfg, manifest, AFFECT_KIND[s.variant])
    folds = make_folds(manifest, cfg.data.folds, ratios=tuple(cfg.data.ratios), seed=cfg.seed,
                       test_size=cfg.data.test_size)
    run_cfg = TrainRunConfig(epochs=s.epochs, batch_size=s.batch_size, lr=s.lr, n_frames=cfg.data.n_frames,
                             seed=cfg.seed, sampling=cfg.data.sampling)
    out = Path(cfg.out)
    run = train_summarizer(prepared, folds, spec, run_cfg, out, jobs=s.jobs)
    write_resolved(cfg, out, "train-sum.config.json")
    reports = {}
    for crit in CRITERIA:
        rep = run.report(crit, prepared)
        (out / f"report-{crit.lower()}.json").write_text(rep.to_json() + "\n", encoding="utf-8")
        reports[crit] = rep
    rep = reports[s.criterion]
    payload = {"run_dir": str(out), "variant": s.variant, "criterion": s.criterion, "F1": rep.f1,
               "R": rep.face_recall, "epochs": rep.provenance["epochs"]}
    _emit(args, payload, f"{s.variant} [{s.criterion}] F1 {100 * rep.f1:.2f}  R {100 * rep.face_recall:.2f}  "
                         f"-> {out}")
    return 0


def _evaluate_run(run_dir: Path, criterion: str):
    from avsum.summarizers.models import AFFECT_KIND
    from avsum.summarizers.train import evaluate_run_dir

    cfg_path = run_dir / "train-sum.config.json"
    if not cfg_path.exists():
        raise ValidationError(f"{run_dir} is not a train-sum run directory (no train-sum.config.json)")
    cfg = load_config(cfg_path)
    manifest = _manifest(cfg)
    _, prepared = _prepared(cfg, manifest, AFFECT_KIND[cfg.summarizer.variant])
    return evaluate_run_dir(run_dir, prepared, criterion)


def cmd_eval_sum(args) -> int:
    from avsum.evalkit.plots import plot_delta_curves, plot_scatter
    from avsum.evalkit.report import delta_f1, render_table
    from avsum.summarizers.train import CRITERIA

    cfg = _resolve(args, out=args.out, **{"eval.runs": args.runs or None, "eval.baseline": args.baseline,
                                          "eval.top_l": args.topL})
    e = cfg.eval
    if not e.runs:
        raise ValidationError("no run directories given: pass --runs or set eval.runs")
    for c in e.criteria:
        if c not in CRITERIA:
            raise ValidationError(f"unknown criterion {c!r}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, payload = {}, {"runs": {}}
    for run in e.runs:
        by_crit = {c: _evaluate_run(Path(run), c) for c in e.criteria}
        model = next(iter(by_crit.values())).model
        rows[model] = by_crit
        payload["runs"][model] = {c: r.to_dict(min(e.top_l, len(r.videos))) for c, r in by_crit.items()}
        for c, r in by_crit.items():
            (out / f"report-{model}-{c.lower()}.json").write_text(
                r.to_json(min(e.top_l, len(r.videos))) + "\n", encoding="utf-8")
    if e.baseline is not None:
        base = {c: _evaluate_run(Path(e.baseline), c) for c in e.criteria}
        curves = {}
        for model, by_crit in rows.items():
            for c, r in by_crit.items():
                d = delta_f1(r, base[c])
                curves[f"{model} {c}"] = d
                payload["runs"][model][c]["delta_f1"] = {"order": d.order, "curve": d.curve, "excluded": d.excluded}
                if e.plots:
                    plot_scatter(r, base[c], out / f"scatter-{model}-{c.lower()}.png", top_l=e.top_l)
        (out / "delta_f1.json").write_text(json.dumps(
            {k: {"order": d.order, "curve": d.curve, "per_video": d.per_video, "excluded": d.excluded}
             for k, d in curves.items()}, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        if e.plots:
            plot_delta_curves(curves, out / "delta_f1.png")
    table = render_table(rows, e.top_l)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    write_resolved(cfg, out, "eval-sum.config.json")
    _emit(args, payload, table)
    return 0


def cmd_kld(args) -> int:
    from avsum.affect import dimension_labels, kld_face_analysis
    from avsum.evalkit.plots import plot_kld_bars

    cfg = _resolve(args, out=args.out, **{"data.manifest": args.manifest, "data.affect_dir": args.affect,
                                          "eval.kld_bins": args.bins})
    manifest = _manifest(cfg)
    tracks = _tracks(cfg, manifest.ids)
    faces = [manifest.load_video(i)[1].face_flags for i in manifest.ids]
    kld = kld_face_analysis([tracks[i] for i in manifest.ids], faces, bins=cfg.eval.kld_bins)
    labels = dimension_labels(next(iter(tracks.values())).hidden)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"bins": cfg.eval.kld_bins, "kld": dict(zip(labels, kld.tolist()))}
    (out / "kld.json").write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    if cfg.eval.plots:
        plot_kld_bars(kld, labels, out / "kld.png")
    write_resolved(cfg, out, "kld.config.json")
    _emit(args, payload, "\n".join(f"{lab:>6}  {v:.4f}" for lab, v in zip(labels, kld)))
    return 0


def cmd_gradcheck(args) -> int:
    from avsum.gradchecks import resolve, run_gradchecks

    seed = apply_seed_env(RunConfig()).seed if args.seed is None else args.seed
    names = resolve(args.ops)
    run = run_gradchecks(names, seed, args.seeds, args.tol, inject_fault=args.inject_fault)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<13} seed {r.seed}  max rel err {r.max_rel_err:.2e}  "
             f"({r.n_entries} entries, worst {r.worst})" for r in run.reports]
    _emit(args, run.to_dict(), "\n".join(lines))
    print(f"gradcheck: {sum(r.passed for r in run.reports)}/{len(run.reports)} passed in {run.seconds:.1f}s",
          file=sys.stderr)
    return 0 if run.passed else 1


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="avsum", description="Affect-aware video summarization pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a seeded synthetic corpus")
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.add_argument("--videos", type=int)
    sp.add_argument("--frames", type=int)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sep", type=float)
    sp.add_argument("--affect-sep", type=float)
    sp.add_argument("--face-corr", type=float)
    sp.add_argument("--groups", type=int)
    sp.add_argument("--key-affect-boost", type=float)

    sp = add("train-cer", cmd_train_cer, "train one emotion model (activation or valence)")
    sp.add_argument("--config")
    sp.add_argument("--manifest")
    sp.add_argument("--attribute", choices=["activation", "valence"])
    sp.add_argument("--out")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)

    sp = add("eval-cer", cmd_eval_cer, "CCC of an emotion-model checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--split", choices=["train", "val", "test", "all"], default="val")
    sp.add_argument("--manifest")

    sp = add("extract-affect", cmd_extract_affect, "run frozen emotion models over a corpus")
    sp.add_argument("--config")
    sp.add_argument("--manifest")
    sp.add_argument("--ckpt-a", required=True)
    sp.add_argument("--ckpt-v", required=True)
    sp.add_argument("--out")

    sp = add("train-sum", cmd_train_sum, "train a summarizer with cross-validation")
    sp.add_argument("--config")
    sp.add_argument("--manifest")
    sp.add_argument("--affect", help="affect track directory (affective variants)")
    sp.add_argument("--variant")
    sp.add_argument("--criterion", choices=["MaxF1", "MaxR"])
    sp.add_argument("--out")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--jobs", type=int)

    sp = add("eval-sum", cmd_eval_sum, "score run directories; tables, gain curves and plots")
    sp.add_argument("--config")
    sp.add_argument("--runs", nargs="+")
    sp.add_argument("--topL", type=int)
    sp.add_argument("--baseline")
    sp.add_argument("--out")

    sp = add("kld", cmd_kld, "face/non-face KL divergence of each affective dimension")
    sp.add_argument("--config")
    sp.add_argument("--manifest")
    sp.add_argument("--affect")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--out")

    sp = add("gradcheck", cmd_gradcheck, "finite-difference check of operators and models")
    sp.add_argument("--ops", default="all", help="'all' or comma-separated names")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--seeds", type=int, default=3, help="number of consecutive seeds")
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AvsumError, OSError, RuntimeError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
