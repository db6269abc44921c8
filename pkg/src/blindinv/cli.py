"""Command-line entry point: ``blindinv <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .channel import make_saturated_testset
from .corpus import synth_corpus
from .errors import BlindInvError
from .experiment import ExperimentConfig, report_from_json, report_render, report_to_json, run_experiment
from .inversion import InversionConfig, estimate_inverse
from .recognition import PipelineConfig, SpeakerModelSet, enroll, identify
from .signal import normalize_peak, read_wav, write_wav


def _load_json(path):
    return json.loads(Path(path).read_text()) if path else {}


def cmd_synth(args):
    d = _load_json(args.config)
    cfg = ExperimentConfig.from_dict(d) if d else ExperimentConfig(seed=args.seed)
    corpus = synth_corpus(cfg.n_speakers, cfg.train_seconds, cfg.n_test_sentences,
                          cfg.test_seconds, cfg.sample_rate, cfg.seed)
    out = Path(args.out_dir)
    for mic, train in corpus.training.items():
        (out / mic / "train").mkdir(parents=True, exist_ok=True)
        (out / mic / "test").mkdir(parents=True, exist_ok=True)
        for sid, x in train.items():
            write_wav(out / mic / "train" / f"{sid}.wav", x)
        for sid, xs in corpus.tests[mic].items():
            for j, x in enumerate(xs):
                write_wav(out / mic / "test" / f"{sid}_t{j}.wav", x)
    print(f"wrote corpus for {cfg.n_speakers} speakers to {out}")


def cmd_saturate(args):
    src, dst = Path(args.inp), Path(args.out)
    pairs = ([(p, dst / p.name) for p in sorted(src.glob("*.wav"))] if src.is_dir() else [(src, dst)])
    if src.is_dir():
        dst.mkdir(parents=True, exist_ok=True)
    for a, b in pairs:
        (y,) = make_saturated_testset([read_wav(a)], args.k)
        write_wav(b, y)
    print(f"saturated {len(pairs)} file(s) with k={args.k}")


def cmd_invert(args):
    cfg = InversionConfig.from_dict(_load_json(args.config)) if args.config else InversionConfig()
    e = read_wav(args.inp)
    inv, trace = estimate_inverse(e, cfg)
    y = inv.transform(e) if args.apply == "g" else inv.apply(e)
    write_wav(args.out, normalize_peak(y))
    if args.dump_model:
        Path(args.dump_model).write_text(inv.to_json())
    if args.dump_trace:
        Path(args.dump_trace).write_text(trace.to_csv())
    print(json.dumps({"iterations": trace.n_iterations, "terminated_by": trace.terminated_by,
                      "initial_cost": trace.cost_per_iteration[0], "final_cost": trace.final_cost}))


def cmd_enroll(args):
    cfg = PipelineConfig.from_dict(_load_json(args.config)) if args.config else PipelineConfig()
    train = {p.stem: read_wav(p) for p in sorted(Path(args.train_dir).glob("*.wav"))}
    models = enroll(train, cfg)
    Path(args.models).write_text(models.to_json())
    print(f"enrolled {len(models.models)} speakers")


def cmd_identify(args):
    models = SpeakerModelSet.from_json(Path(args.models).read_text())
    decision, dist = identify(read_wav(args.test), models)
    print(json.dumps({"decision": decision, "distances": dist}, sort_keys=True))


def cmd_experiment(args):
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    report = run_experiment(cfg)
    Path(args.out).write_text(report_to_json(report))
    sys.stdout.write(report_render(report, "text-table"))


def cmd_report(args):
    report = report_from_json(Path(args.inp).read_text())
    sys.stdout.write(report_render(report, args.format))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blindinv", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic corpus as WAV files")
    s.add_argument("--config", help="experiment config JSON")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("saturate", help="peak-normalize and apply tanh(k x)")
    s.add_argument("--k", type=float, default=2.0)
    s.add_argument("--in", dest="inp", required=True, help="WAV file or directory")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_saturate)

    s = sub.add_parser("invert", help="blindly estimate and apply an inverse")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dump-model")
    s.add_argument("--dump-trace")
    s.add_argument("--config", help="inversion config JSON")
    s.add_argument("--apply", choices=("g", "gw"), default="g",
                   help="apply the map only (default) or map then filter")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("enroll", help="build speaker models from <id>.wav files")
    s.add_argument("--train-dir", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--config", help="pipeline config JSON")
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("identify", help="identify the speaker of one WAV file")
    s.add_argument("--models", required=True)
    s.add_argument("--test", required=True)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("experiment", help="run the full saturation experiment")
    s.add_argument("--config", help="experiment config JSON (defaults if omitted)")
    s.add_argument("--out", required=True, help="report JSON path")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="render a saved report")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--format", choices=("text-table", "json", "csv"), default="text-table")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except BlindInvError as exc:
        print(json.dumps(exc.to_record()), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
