"""Command-line entry point.

Subcommands: simulate, train, eval, report, gradcheck. Exit codes:
0 ok, 2 config/usage error, 3 missing artifact, 4 numeric failure.
All outputs land under --out; every command is idempotent under a fixed
seed (measured wall-clock goes to timing sidecars or is overridden by the
config's latency.inference_ms pin).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, echo_config, parse_config
from .dataset import DatasetReader, synthesize_records, write_dataset
from .errors import ConfigError, InvalidArgumentError, MissingArtifactError, NumericError
from .evaluator import evaluate_combination
from .scenario import MODALITIES
from .trainer import train as run_train


def _combo_slug(modalities) -> str:
    ordered = [m for m in MODALITIES if m in set(modalities)]
    return "_".join(ordered)


def _parse_modalities(text: str):
    names = [t.strip() for t in text.split(",") if t.strip()]
    unknown = set(names) - set(MODALITIES)
    if unknown or not names:
        raise ConfigError(f"--modalities: bad value '{text}' (choose from {', '.join(MODALITIES)})")
    return tuple(m for m in MODALITIES if m in set(names))


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.scenario.global_seed = args.seed
    out = Path(args.out)
    records = synthesize_records(cfg.scenario)
    manifest = write_dataset(
        records, out, cfg.scenario.num_elements, cfg.scenario.num_beams, cfg.scenario.noise_var
    )
    echo_config(cfg, out)
    labels = np.array([r.oracle for r in records])
    hist = np.bincount(labels, minlength=cfg.scenario.num_beams)
    used = np.nonzero(hist)[0]
    print(f"wrote {manifest['num_samples']} samples to {out}")
    print(
        f"labels: {len(used)} distinct beams, index range [{used.min()}, {used.max()}], "
        f"most frequent beam {int(hist.argmax())} ({int(hist.max())} samples)"
    )
    return 0


def _reader(path) -> DatasetReader:
    return DatasetReader(path)


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.modalities is not None:
        cfg.train.modalities = _parse_modalities(args.modalities)
    reader = _reader(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_train(cfg.train, cfg.model, reader)
    save_checkpoint(result.model, out / "checkpoint")
    result.log.to_csv(out / "trainlog.csv")
    result.log.timing_to_csv(out / "trainlog_timing.csv")
    echo_config(cfg, out)
    print(
        f"trained on {'+'.join(cfg.train.modalities)}; best val top1 "
        f"{result.best_val_top1:.4f} at epoch {result.best_epoch}"
    )
    return 0


def cmd_eval(args) -> int:
    cfg = parse_config(args.config)
    reader = _reader(args.data)
    model = load_checkpoint(Path(args.checkpoint))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.modalities is not None:
        sets = [_parse_modalities(args.modalities)]
    else:
        sets = [tuple(s) for s in cfg.eval.modality_sets]
    split = args.split or cfg.eval.split
    for mset in sets:
        report, measured = evaluate_combination(
            model,
            reader,
            mset,
            cfg.latency,
            cfg.eval.noise_var,
            split=split,
            batch_size=cfg.eval.batch_size,
            lambda_gap=cfg.train.lambda_gap,
            lambda_tau=cfg.train.lambda_tau,
            pinned_inference_ms=cfg.inference_ms_pin,
        )
        slug = _combo_slug(mset)
        report.to_json(out / f"metrics_{slug}.json")
        with open(out / f"metrics_{slug}.csv", "w") as fh:
            fh.write(report.CSV_HEADER + "\n")
            fh.write(report.csv_row() + "\n")
        print(
            f"{slug}: top1 {report.top1:.4f} top5 {report.top5:.4f} "
            f"snr_gap {report.mean_snr_gap:.4f} dB, measured inference {measured:.3f} ms/sample"
        )
    echo_config(cfg, out)
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    reports = []
    for path in sorted(out.glob("metrics_*.json")):
        with open(path) as fh:
            reports.append(json.load(fh))
    if not reports:
        raise MissingArtifactError(f"report: no metrics_*.json under {out}")
    # rank by the latency-weighted score; ties prefer fewer sensors
    reports.sort(key=lambda r: (r["eval_score"], len(r["modalities"]), "+".join(r["modalities"])))

    def combo(r):
        return "+".join(r["modalities"])

    with open(out / "report_table.csv", "w") as fh:
        fh.write(
            "combo,top1,top3,top5,se_pred,se_opt,mean_rate_loss,mean_snr_gap_db,"
            "gain_ratio,mean_ce,sensing_ms,inference_ms,end_to_end_ms,eval_score\n"
        )
        for r in reports:
            lat = r["latency"]
            cells = [combo(r)] + [
                f"{r[k]:.10g}"
                for k in (
                    "top1",
                    "top3",
                    "top5",
                    "se_pred",
                    "se_opt",
                    "mean_rate_loss",
                    "mean_snr_gap_db",
                    "gain_ratio",
                    "mean_ce",
                )
            ] + [
                f"{lat['sensing_ms']:.10g}",
                f"{lat['inference_ms']:.10g}",
                f"{lat['end_to_end_ms']:.10g}",
                f"{r['eval_score']:.10g}",
            ]
            fh.write(",".join(cells) + "\n")

    with open(out / "se_comparison.csv", "w") as fh:
        fh.write("combo,se_pred,se_opt\n")
        for r in reports:
            fh.write(f"{combo(r)},{r['se_pred']:.10g},{r['se_opt']:.10g}\n")
    with open(out / "snr_gap.csv", "w") as fh:
        fh.write("combo,mean_snr_gap_db\n")
        for r in reports:
            fh.write(f"{combo(r)},{r['mean_snr_gap_db']:.10g}\n")
    with open(out / "topk_by_combo.csv", "w") as fh:
        fh.write("combo,top1,top3,top5\n")
        for r in reports:
            fh.write(f"{combo(r)},{r['top1']:.10g},{r['top3']:.10g},{r['top5']:.10g}\n")
    with open(out / "latency_stack.csv", "w") as fh:
        fh.write("combo,component,ms\n")
        for r in reports:
            lat = r["latency"]
            fh.write(f"{combo(r)},sensing,{lat['sensing_ms']:.10g}\n")
            fh.write(f"{combo(r)},inference,{lat['inference_ms']:.10g}\n")

    trainlog = out / "trainlog.csv"
    if trainlog.exists():
        (out / "learning_curves.csv").write_bytes(trainlog.read_bytes())
    print(f"report over {len(reports)} combinations -> {out / 'report_table.csv'}")
    for r in reports:
        print(f"  {combo(r)}: eval_score {r['eval_score']:.6g}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import MODEL_TOL, model_fd_check, run_op_suite

    failures = 0
    for name, err, ok in run_op_suite(seed=args.seed or 0):
        print(f"gradcheck {name}: max rel err {err:.3e} {'ok' if ok else 'FAIL'}")
        failures += 0 if ok else 1
    err, n = model_fd_check(seed=args.seed or 0)
    ok = err <= MODEL_TOL
    print(f"gradcheck full_model ({n} sampled params): max rel err {err:.3e} {'ok' if ok else 'FAIL'}")
    failures += 0 if ok else 1
    if failures:
        raise NumericError(f"gradcheck: {failures} case(s) failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beambench",
        description="Beam-prediction workbench: simulate, train, evaluate, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("train", help="train the fusion model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--modalities", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint per sensor combination")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modalities", default=None)
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="merge eval outputs into ranked tables and figure CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except InvalidArgumentError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
