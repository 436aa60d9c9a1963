"""Command-line entry point: synth, train, diarize, eval, report."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import io
from .graph import GraphConfig, build_graph
from .metrics import (
    GroundTruthFace, ScoredDetection, asd_map_at_iou, asd_map_report, der_corpus, wer_corpus,
)
from .model import ModelConfig, checkpoint_metadata, load_checkpoint, save_checkpoint, train
from .pipeline import PostConfig, diarize_scores, score_video
from .synth import ScenarioConfig, generate_scenario
from .types import BBox, NodeType, reference_segments

log = logging.getLogger("sthg")

CONFIG_CLASSES = (ScenarioConfig, GraphConfig, ModelConfig, PostConfig)


class UsageError(Exception):
    pass


def _coerce(raw: str, ftype: str, name: str):
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if name == "agg_schedule":
            return tuple(s.strip() for s in raw.split(","))
        return raw
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {raw!r} as {ftype}") from None


def split_config(kv: dict[str, str]) -> dict[type, dict]:
    """Route flat key=value pairs to every config dataclass that declares the key."""
    out: dict[type, dict] = {cls: {} for cls in CONFIG_CLASSES}
    for key, raw in kv.items():
        hit = False
        for cls in CONFIG_CLASSES:
            for f in fields(cls):
                if f.name == key:
                    ftype = f.type if isinstance(f.type, str) else f.type.__name__
                    if ftype in ("VadTarget", "VadMode"):
                        ftype = "str"
                    out[cls][key] = _coerce(raw, ftype, key)
                    hit = True
        if not hit:
            raise UsageError(f"unknown config key {key!r}")
    return out


def _load_config(path) -> dict[type, dict]:
    if path is None:
        return {cls: {} for cls in CONFIG_CLASSES}
    return split_config(io.read_kv(path))


def _threads() -> int:
    raw = os.environ.get("STHG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"STHG_THREADS must be an integer, got {raw!r}") from None


def cmd_synth(args) -> None:
    conf = _load_config(args.config)[ScenarioConfig]
    if args.seed is not None:
        conf["seed"] = args.seed
    cfg = ScenarioConfig(**conf)
    sc = generate_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for b in sc.bundles:
        records.extend(io.records_from_bundle(b, sc.vad[b.video_id], sc.transcripts[b.video_id]))
    io.write_manifest(out / "manifest.tsv", records)
    io.write_rttm(out / "ref.rttm", {b.video_id: reference_segments(b) for b in sc.bundles})
    io.write_kv(out / "scenario.cfg", {f.name: getattr(cfg, f.name) for f in fields(cfg)})
    print(f"wrote {len(sc.bundles)} videos to {out}")


def _dims(ds: io.Dataset) -> tuple[int, int]:
    d_av = d_a = None
    for b in ds.bundles.values():
        if b.tracks:
            d_av = b.tracks[0].dim
        if len(b.wearer.frames):
            d_a = b.wearer.dim
    if d_av is None or d_a is None:
        raise UsageError("data must contain at least one visible track and one wearer stream")
    return d_av, d_a


def cmd_train(args) -> None:
    confs = _load_config(args.config)
    ds = io.load_dataset(args.data)
    d_av, d_a = _dims(ds)
    mconf = dict(confs[ModelConfig], d_av=d_av, d_a=d_a)
    for key, val in (("seed", args.seed), ("epochs", args.epochs), ("learning_rate", args.lr)):
        if val is not None:
            mconf[key] = val
    mcfg = ModelConfig(**mconf)
    gcfg = GraphConfig(**confs[GraphConfig])
    graphs = [g for vid in sorted(ds.bundles) for g in build_graph(ds.bundles[vid], gcfg)]
    params, hist = train(graphs, mcfg)
    meta = {f"graph.{f.name}": getattr(gcfg, f.name) for f in fields(gcfg)}
    save_checkpoint(args.checkpoint, params, mcfg, meta)
    history = {"best_epoch": hist.best_epoch, "epochs": len(hist.epochs)}
    for r in hist.epochs:
        history[f"loss.{r.epoch}"] = r.loss
        history[f"train_ap.{r.epoch}"] = r.train_ap
    io.write_kv(args.history or f"{args.checkpoint}.history", history)
    last = hist.epochs[-1] if hist.epochs else None
    print(f"trained {len(graphs)} graphs; best epoch {hist.best_epoch}" + (f", final loss {last.loss:.4f}" if last else ""))


def _graph_cfg_from_checkpoint(path) -> GraphConfig:
    meta = checkpoint_metadata(path)
    kw = {k[6:]: int(v) for k, v in meta.items() if k.startswith("graph.")}
    return GraphConfig(**kw)


def cmd_diarize(args) -> None:
    confs = _load_config(args.config)
    pcfg = PostConfig(**confs[PostConfig])
    params, mcfg = load_checkpoint(args.checkpoint)
    gcfg = _graph_cfg_from_checkpoint(args.checkpoint)
    if confs[GraphConfig]:
        gcfg = replace(gcfg, **confs[GraphConfig])
    ds = io.load_dataset(args.data)
    vad = io.load_dataset(args.vad).vad if args.vad else ds.vad
    vids = sorted(ds.bundles)

    def work(vid):
        b = ds.bundles[vid]
        ns = score_video(b, params, gcfg, mcfg)
        return ns, diarize_scores(ns, b, pcfg, vad.get(vid, []), gcfg.node_stride)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(work, vids))
    io.write_rttm(args.out, {vid: segs for vid, (_, segs) in zip(vids, results)})
    if args.scores:
        recs = []
        for vid, (ns, _) in zip(vids, results):
            b = ds.bundles[vid]
            tracks = {t.track_id: t for t in b.tracks}
            for kind, pid, tid, f, s in zip(ns.node_types, ns.person_ids, ns.track_ids, ns.frames, ns.scores):
                box = None
                if kind == NodeType.VISIBLE:
                    e = tracks[tid].by_frame[int(f)].box
                    box = (e.x1, e.y1, e.x2, e.y2)
                recs.append(io.ScoreRecord(vid, pid, tid or "-", int(f),
                                           "visible" if kind == NodeType.VISIBLE else "wearer", float(s), box))
        io.write_scores(args.scores, recs)
    print(f"diarized {len(vids)} videos -> {args.out}")


def _map_metrics(scores: list[io.ScoreRecord], ds: io.Dataset) -> dict[str, float]:
    s, y, k = [], [], []
    for r in scores:
        b = ds.bundles.get(r.video_id)
        if b is None or b.labels is None or (r.person_id, r.frame) not in b.labels:
            raise UsageError(f"no label for {r.video_id}/{r.person_id}/frame {r.frame}")
        s.append(r.score)
        y.append(b.labels[(r.person_id, r.frame)])
        k.append(NodeType.VISIBLE if r.kind == "visible" else NodeType.WEARER)
    rep = asd_map_report([np.array(s)], [np.array(y)], [np.array(k)])
    return {f"map_{pop}": v for pop, v in rep.items()}


def _map_iou(scores: list[io.ScoreRecord], ds: io.Dataset, thr: float) -> float:
    preds = [ScoredDetection(r.frame, BBox(*r.box), r.score, r.person_id, r.video_id) for r in scores if r.box]
    gt = []
    for vid, b in ds.bundles.items():
        for t in b.tracks:
            for e in t.entries:
                gt.append(GroundTruthFace(e.frame, e.box, int(b.labels.get((t.person_id, e.frame), 0)), vid))
    return asd_map_at_iou(preds, gt, thr)


def _words(transcripts) -> list[str]:
    return [w for _, _, _, text in sorted(transcripts, key=lambda t: (t[1], t[0])) for w in text.split()]


def cmd_eval(args) -> None:
    report: dict[str, object] = {}
    want_der = args.der or not (args.map or args.map_iou or args.wer)
    if want_der:
        if not (args.ref_rttm and args.hyp_rttm):
            raise UsageError("--der needs --ref-rttm and --hyp-rttm")
        ref, hyp = io.read_rttm(args.ref_rttm), io.read_rttm(args.hyp_rttm)
        b = der_corpus(((ref[v], hyp.get(v, [])) for v in sorted(ref)), collar=args.collar)
        report.update(der=b.der, missed_speech=b.missed_speech, false_alarm=b.false_alarm,
                      speaker_confusion=b.speaker_confusion, total_ref_speech=b.total_ref_speech, collar=args.collar)
    if args.map or args.map_iou:
        if not (args.labels and args.scores):
            raise UsageError("--map/--map-iou need --labels and --scores")
        ds = io.load_dataset(args.labels)
        scores = io.read_scores(args.scores)
        if args.map:
            report.update(_map_metrics(scores, ds))
        if args.map_iou:
            report[f"map_iou_{args.iou_threshold:g}"] = _map_iou(scores, ds, args.iou_threshold)
    if args.wer:
        if not (args.labels and args.hyp_transcripts):
            raise UsageError("--wer needs --labels (reference transcripts) and --hyp-transcripts")
        ref_t = io.load_dataset(args.labels).transcripts
        hyp_t = io.load_dataset(args.hyp_transcripts).transcripts
        report["wer"] = wer_corpus((_words(ref_t[v]), _words(hyp_t.get(v, []))) for v in sorted(ref_t))
    if args.out:
        io.write_kv(args.out, report)
    sys.stdout.write(io.format_kv(report))


def _history_summary(path) -> dict[str, str]:
    kv = io.read_kv(path)
    n = int(kv.get("epochs", 0))
    best = kv.get("best_epoch", "0")
    return {"file": str(path), "epochs": str(n), "best_epoch": best,
            "best_loss": kv.get(f"loss.{best}", "nan"), "final_train_ap": kv.get(f"train_ap.{n}", "nan")}


def _table(title: str, rows: list[dict[str, str]]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    width = {c: max(len(c), *(len(_short(r.get(c, ""))) for r in rows)) for c in cols}
    lines = [title, "  ".join(c.ljust(width[c]) for c in cols), "  ".join("-" * width[c] for c in cols)]
    for r in rows:
        lines.append("  ".join(_short(r.get(c, "")).ljust(width[c]) for c in cols))
    return "\n".join(lines) + "\n\n"


def _short(v: str) -> str:
    try:
        f = float(v)
    except ValueError:
        return v
    return v if f.is_integer() and "." not in v else f"{f:.4f}"


def cmd_report(args) -> None:
    text = ""
    if args.history:
        text += _table("Training", [_history_summary(p) for p in args.history])
    if args.metrics:
        rows = []
        keys: list[str] = []
        for p in args.metrics:
            kv = io.read_kv(p)
            rows.append(kv)
            keys += [k for k in kv if k not in keys]
        text += _table("Evaluation", [{"file": str(p), **{k: r.get(k, "-") for k in keys}} for p, r in zip(args.metrics, rows)])
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sthg", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the heterogeneous GNN")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("diarize", help="score nodes and write an RTTM")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="post-processing (and optional graph) config")
    p.add_argument("--vad", help="manifest with VAD records (default: the data manifest)")
    p.add_argument("--out", required=True)
    p.add_argument("--scores", help="also write per-node scores here")
    p.set_defaults(func=cmd_diarize)

    p = sub.add_parser("eval", help="compute DER / mAP / mAP@IoU / WER")
    p.add_argument("--ref-rttm")
    p.add_argument("--hyp-rttm")
    p.add_argument("--labels", help="manifest with LABEL/TRACK/TRANSCRIPT records")
    p.add_argument("--scores")
    p.add_argument("--hyp-transcripts")
    p.add_argument("--der", action="store_true")
    p.add_argument("--map", action="store_true")
    p.add_argument("--map-iou", action="store_true")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--wer", action="store_true")
    p.add_argument("--collar", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarise history and metrics files")
    p.add_argument("--history", nargs="*", default=[])
    p.add_argument("--metrics", nargs="*", default=[])
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ValueError, FileNotFoundError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sthg {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
