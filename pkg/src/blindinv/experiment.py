"""End-to-end saturation experiment: clean, saturated and compensated tests, plus fusion."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

from .channel import make_saturated_testset
from .corpus import MICROPHONES, synth_corpus
from .errors import BlindInvError, ConfigError
from .inversion import InversionConfig, estimate_inverse
from .recognition import (
    PipelineConfig,
    decide,
    distances_to_opinions,
    enroll,
    fuse,
    identification_rate,
    identify,
)
from .signal import normalize_peak

log = logging.getLogger(__name__)

FUSION_RULES = ("arithmetic", "geometric")


def default_inversion() -> InversionConfig:
    # Per-sentence budget: a 2 s sentence needs far fewer steps than the
    # library default to settle, and the experiment runs one per sentence.
    return InversionConfig(n_knots=11, w_len=21, max_iters=40)


@dataclass
class ExperimentConfig:
    n_speakers: int = 10
    train_seconds: float = 60.0
    n_test_sentences: int = 5
    test_seconds: float = 2.0
    k: float = 2.0
    sample_rate: int = 16000
    inversion: InversionConfig = field(default_factory=default_inversion)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    fusion_subsets: list = field(default_factory=lambda: [[1, 2], [1, 3], [2, 4], [1, 2, 3, 4]])
    compensate: str = "g"  # "g": apply the estimated map only; "gw": map then filter
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.inversion, dict):
            self.inversion = InversionConfig.from_dict(self.inversion)
        if isinstance(self.pipeline, dict):
            self.pipeline = PipelineConfig.from_dict(self.pipeline)
        if self.n_speakers < 2:
            raise ConfigError("n_speakers must be >= 2")
        if not (self.train_seconds > 0 and self.test_seconds > 0 and self.n_test_sentences >= 1):
            raise ConfigError("durations must be positive and at least one test sentence is needed")
        if not self.k > 0:
            raise ConfigError("saturation constant k must be positive")
        if self.compensate not in ("g", "gw"):
            raise ConfigError("compensate must be 'g' or 'gw'")
        for subset in self.fusion_subsets:
            if not subset or any(c not in CLASSIFIERS for c in subset):
                raise ConfigError(f"fusion subset {subset} must name classifiers among 1..4")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


# Table-style classifier numbering: odd = with compensation.
CLASSIFIERS = {
    1: ("mic1", True),
    2: ("mic1", False),
    3: ("mic2", True),
    4: ("mic2", False),
}


def classifier_label(c: int) -> str:
    mic, comp = CLASSIFIERS[c]
    return f"{c} ({mic}+NL compensation)" if comp else f"{c} ({mic})"


@dataclass
class ExperimentReport:
    rates: dict  # condition/mic -> percentage
    classifier_rates: dict  # classifier id (str) -> percentage
    fusion: list  # {"subset": [...], "rule": str, "rate": float}
    fusion_agreement: float  # % of (subset, sentence) where both rules decide alike
    decisions: list  # per sentence and stream
    scores: list  # classifier, sentence_id, speaker_id, distance, opinion
    inversions: list  # per saturated sentence
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**d)

    def best_single(self) -> float:
        return max(self.classifier_rates.values())

    def best_fused(self) -> float:
        return max((f["rate"] for f in self.fusion), default=float("nan"))


def _classify(signal, models, temperature):
    decision, dist = identify(signal, models)
    return decision, dist, distances_to_opinions(dist, temperature)


def run_experiment(cfg: ExperimentConfig | None = None) -> ExperimentReport:
    cfg = cfg or ExperimentConfig()
    corpus = synth_corpus(cfg.n_speakers, cfg.train_seconds, cfg.n_test_sentences,
                          cfg.test_seconds, cfg.sample_rate, cfg.seed)
    decisions, scores, inversions = [], [], []
    truths, per_stream = {}, {}  # (condition, mic) -> {sentence_id: decision}
    opinions = {c: {} for c in CLASSIFIERS}  # classifier -> sentence_id -> opinion

    for mic in MICROPHONES:
        models = enroll(corpus.training[mic], cfg.pipeline)
        for sid in sorted(corpus.tests[mic]):
            clean = corpus.tests[mic][sid]
            saturated = make_saturated_testset(clean, cfg.k)
            for j, (x_clean, x_sat) in enumerate(zip(clean, saturated)):
                sent = f"{sid}_t{j}"
                truths[sent] = sid
                streams = {"clean": lambda: x_clean, "sat": lambda: x_sat}

                def compensated(x_sat=x_sat, sent=sent):
                    inv, trace = estimate_inverse(x_sat, cfg.inversion)
                    inversions.append({
                        "mic": mic, "sentence_id": sent, "iterations": trace.n_iterations,
                        "terminated_by": trace.terminated_by,
                        "initial_cost": trace.cost_per_iteration[0], "final_cost": trace.final_cost,
                    })
                    y = inv.transform(x_sat) if cfg.compensate == "g" else inv.apply(x_sat)
                    return normalize_peak(y)

                streams["satcomp"] = compensated
                for cond, make in streams.items():
                    entry = {"mic": mic, "condition": cond, "sentence_id": sent, "truth": sid}
                    try:
                        decision, dist, op = _classify(make(), models, cfg.temperature)
                    except BlindInvError as exc:
                        log.warning("%s %s %s failed: %s", mic, cond, sent, exc)
                        entry.update(decision=None, error=exc.to_record())
                    else:
                        entry.update(decision=decision, error=None)
                        if cond != "clean":
                            c = next(c for c, (m, comp) in CLASSIFIERS.items()
                                     if m == mic and comp == (cond == "satcomp"))
                            opinions[c][sent] = op
                            scores.extend({"classifier": c, "sentence_id": sent, "speaker_id": spk,
                                           "distance": dist[spk], "opinion": op[spk]} for spk in sorted(dist))
                    decisions.append(entry)
                    per_stream.setdefault((cond, mic), {})[sent] = entry["decision"]

    sentences = sorted(truths)
    truth = [truths[s] for s in sentences]
    rates = {f"{cond}/{mic}": identification_rate([d[s] for s in sentences], truth)
             for (cond, mic), d in sorted(per_stream.items())}
    classifier_rates = {
        str(c): identification_rate([decide_or_none(opinions[c].get(s)) for s in sentences], truth)
        for c in CLASSIFIERS
    }
    fusion, agree, total = [], 0, 0
    for subset in cfg.fusion_subsets:
        fused = {}
        for rule in FUSION_RULES:
            fused[rule] = []
            for s in sentences:
                ops = [opinions[c].get(s) for c in subset]
                fused[rule].append(None if any(o is None for o in ops) else decide_or_none(fuse(ops, rule)))
            fusion.append({"subset": list(subset), "rule": rule,
                           "rate": identification_rate(fused[rule], truth)})
        agree += sum(a == b for a, b in zip(*fused.values()))
        total += len(sentences)
    agreement = 100.0 * agree / total if total else 100.0
    return ExperimentReport(rates, classifier_rates, fusion, agreement, decisions, scores,
                            inversions, cfg.to_dict())


def decide_or_none(opinion):
    if opinion is None:
        return None
    # argmax of opinions, ties to the smallest id, via the distance-style helper
    return decide({k: -v for k, v in opinion.items()})


# -- rendering ------------------------------------------------------------

def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1)


def report_from_json(text: str) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(text))


def render_table(report: ExperimentReport) -> str:
    rows = [("Combination", "Recognition rate")]
    for key in sorted(report.rates):
        cond, mic = key.split("/")
        if cond == "clean":
            rows.append((f"{mic} clean", f"{report.rates[key]:.2f} %"))
    for c in sorted(CLASSIFIERS):
        rows.append((classifier_label(c), f"{report.classifier_rates[str(c)]:.2f} %"))
    for f in report.fusion:
        name = "&".join(str(c) for c in f["subset"])
        rows.append((f"fusion {name} {f['rule'].capitalize()} mean", f"{f['rate']:.2f} %"))
    width = max(len(r[0]) for r in rows) + 4
    lines = [f"{a:<{width}}{b}" for a, b in rows]
    lines.append(f"{'arithmetic/geometric agreement':<{width}}{report.fusion_agreement:.2f} %")
    return "\n".join(lines) + "\n"


def render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "sentence_id", "speaker_id", "distance", "opinion"])
    for r in report.scores:
        w.writerow([r["classifier"], r["sentence_id"], r["speaker_id"], repr(r["distance"]), repr(r["opinion"])])
    return buf.getvalue()


def report_render(report: ExperimentReport, fmt: str = "text-table") -> str:
    if fmt == "text-table":
        return render_table(report)
    if fmt == "json":
        return report_to_json(report)
    if fmt == "csv":
        return render_csv(report)
    raise ConfigError(f"unknown report format {fmt!r}")
