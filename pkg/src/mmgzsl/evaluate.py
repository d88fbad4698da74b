"""Generalized zero-shot evaluation: classifier, metrics and the experiment driver."""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import checkpoint, nn
from .dataio import FeatureSet, PairedDataset, SplitSpec, split
from .errors import CheckpointError, ConfigError, DataError, LeakageError, ShapeError
from .synth import CvaeModel, SynthTrainConfig, generate_features, init_cvae, train_synth
from .transform import (CycleModel, CycleTrainConfig, init_cycle, train_cycle, translate,
                        translate_back)

log = logging.getLogger(__name__)

ABLATIONS = ("full", "wCPC", "wReg", "wC", "wE", "MR_only", "DP_only", "reverse")
LABELS = {"full": "MM_GZSL", "wCPC": "MM_wCPC", "wReg": "MM_wReg", "wC": "MM_wC",
          "wE": "MM_wE", "MR_only": "MM_MR", "DP_only": "MM_DP", "reverse": "MM_reverse"}
TABLE_COLUMNS = ("acc_S", "acc_U", "H", "p", "sen_S", "spe_S", "sen_U", "spe_U")
_ZEROED_LAMBDA = {"wCPC": "lambda_cpc", "wReg": "lambda_reg", "wC": "lambda_c", "wE": "lambda_E"}


def combine(mri, dp, dim_mri: int | None = None, dim_dp: int | None = None) -> np.ndarray:
    """MRI-first concatenation; works on single vectors or row batches."""
    mri, dp = np.asarray(mri, dtype=np.float64), np.asarray(dp, dtype=np.float64)
    if dim_mri is not None and mri.shape[-1] != dim_mri:
        raise ShapeError(f"MRI feature has dim {mri.shape[-1]}, expected {dim_mri}")
    if dim_dp is not None and dp.shape[-1] != dim_dp:
        raise ShapeError(f"DP feature has dim {dp.shape[-1]}, expected {dim_dp}")
    if mri.shape[:-1] != dp.shape[:-1]:
        raise ShapeError(f"cannot pair MRI batch {mri.shape} with DP batch {dp.shape}")
    return np.concatenate([mri, dp], axis=-1)


@dataclass
class ClassifierConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-2
    hidden: tuple[int, ...] = ()
    seed: int = 0
    init_stddev: float = 0.01

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if self.epochs < 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ConfigError("classifier epochs must be >= 0; batch_size, learning_rate > 0")


@dataclass
class Classifier:
    model: nn.Mlp
    classes: np.ndarray  # class value of each output unit, ascending

    def logits(self, features) -> np.ndarray:
        return nn.forward(self.model, np.asarray(features, dtype=np.float64))

    def predict(self, features) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. ties go to the lowest class index
        return self.classes[np.argmax(self.logits(features), axis=1)]


def train_classifier(features, labels, classes, config: ClassifierConfig | None = None
                     ) -> tuple[Classifier, list[float]]:
    """Softmax classifier over ``classes`` (input standardized, Adam on the mean NLL)."""
    config = config or ClassifierConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.array(sorted(int(c) for c in set(classes)))
    missing = sorted(set(classes.tolist()) - set(np.unique(y).tolist()))
    if missing:
        raise DataError(f"no training features for classes {missing}")
    extra = sorted(set(np.unique(y).tolist()) - set(classes.tolist()))
    if extra:
        raise DataError(f"training labels {extra} are not among the declared classes")
    mean, scale = x.mean(axis=0), x.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    dims = [x.shape[1], *config.hidden, len(classes)]
    acts = [nn.LEAKY] * len(config.hidden) + [nn.IDENTITY]
    rng = np.random.default_rng([config.seed, 5])
    model = nn.init_mlp(dims, acts, rng, config.init_stddev, input_shift=mean, input_scale=scale)
    target = np.searchsorted(classes, y)
    params = model.params()
    opt = nn.adam_init(params, learning_rate=config.learning_rate)
    losses = []
    for _ in range(config.epochs):
        perm = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = perm[start:start + config.batch_size]
            logits, cache = nn.forward_cached(model, x[idx])
            loss, d_logits = nn.softmax_nll(logits, target[idx])
            grads, _ = nn.backward(model, x[idx], d_logits, cache)
            nn.adam_step(params, grads, opt)
            total += loss * len(idx)
        losses.append(total / len(x))
    return Classifier(model, classes), losses


def confusion_matrix(true, pred, classes) -> np.ndarray:
    classes = np.asarray(classes)
    ti, pi = np.searchsorted(classes, true), np.searchsorted(classes, pred)
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(out, (ti, pi), 1)
    return out


def sensitivity_specificity(confusion, include=None) -> dict:
    """Macro one-vs-rest sensitivity and specificity in percent.

    ``confusion[i, j]`` counts true class ``i`` predicted as ``j``. Only the
    class indices in ``include`` (default: all) enter the average; any of them
    without positive samples is dropped with a warning.
    """
    cm = np.asarray(confusion, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeError("confusion matrix must be square")
    include = range(len(cm)) if include is None else include
    total = cm.sum()
    sens, specs, excluded = [], [], []
    for k in include:
        tp = cm[k, k]
        fn = cm[k].sum() - tp
        fp = cm[:, k].sum() - tp
        tn = total - tp - fn - fp
        if tp + fn == 0:
            excluded.append(int(k))
            continue
        sens.append(tp / (tp + fn))
        specs.append(tn / (tn + fp) if tn + fp > 0 else 1.0)
    if excluded:
        warnings.warn(f"classes at indices {excluded} have no positive samples; "
                      "excluded from sensitivity/specificity", stacklevel=2)
    if not sens:
        raise DataError("no class with positive samples in the confusion matrix")
    return {"sen": 100.0 * float(np.mean(sens)), "spe": 100.0 * float(np.mean(specs)),
            "excluded": excluded}


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    if acc_s + acc_u <= 0:
        return 0.0
    return 2.0 * acc_s * acc_u / (acc_s + acc_u)


@dataclass
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float
    method: str  # "exact_binomial" | "chi2_continuity" | "none"
    note: str = ""


def mcnemar(correct_a, correct_b, exact_below: int = 25) -> McNemarResult:
    """Paired comparison from per-sample correctness of two classifiers.

    ``b`` counts samples only A gets right, ``c`` those only B gets right.
    Below ``exact_below`` discordant pairs the two-sided exact binomial test
    is used (statistic = min(b, c)); otherwise the continuity-corrected
    chi-square with one degree of freedom.
    """
    a, bb = np.asarray(correct_a, dtype=bool), np.asarray(correct_b, dtype=bool)
    if a.shape != bb.shape:
        raise ShapeError("both classifiers must be scored on the same samples")
    b = int(np.sum(a & ~bb))
    c = int(np.sum(~a & bb))
    n = b + c
    if n == 0:
        return McNemarResult(0, 0, 0.0, 1.0, "none", "no discordant pairs")
    if n < exact_below:
        p = stats.binomtest(min(b, c), n, 0.5, alternative="two-sided").pvalue
        return McNemarResult(b, c, float(min(b, c)), float(min(1.0, p)), "exact_binomial")
    statistic = (abs(b - c) - 1.0) ** 2 / n
    return McNemarResult(b, c, float(statistic), float(stats.chi2.sf(statistic, 1)),
                         "chi2_continuity")


@dataclass
class SettingResult:
    setting: str
    acc: float
    per_class: dict[int, float]
    sen: float
    spe: float
    confusion: np.ndarray = field(repr=False)
    predictions: np.ndarray = field(repr=False)
    correct: np.ndarray = field(repr=False)


def classifier_inputs(features, source: str, translate_fn: Callable | None, input_mode: str):
    """Build classifier inputs from features of modality ``source``.

    ``input_mode`` is "combined" (MRI first), "MRI" or "DP"; the missing
    modality comes from ``translate_fn``.
    """
    x = np.asarray(features, dtype=np.float64)
    if input_mode not in ("combined", "MRI", "DP"):
        raise ConfigError(f"unknown input_mode {input_mode!r}")
    if input_mode == source:
        return x
    if translate_fn is None:
        raise ConfigError(f"input_mode {input_mode!r} needs a translate_fn")
    other = translate_fn(x)
    mri, dp = (x, other) if source == "MRI" else (other, x)
    if input_mode == "combined":
        return combine(mri, dp)
    return mri if input_mode == "MRI" else dp


def evaluate(classifier: Classifier, features, labels, setting: str,
             translate_fn: Callable | None = None, input_mode: str = "combined",
             source: str = "MRI") -> SettingResult:
    """Score real test features of one setting ("A": held-out seen, "B": unseen).

    Accuracy is the mean of per-class recalls over the classes present in the test set.
    """
    if setting not in ("A", "B"):
        raise ConfigError(f"setting must be 'A' or 'B', got {setting!r}")
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError(f"empty test set for setting {setting}")
    x = classifier_inputs(features, source, translate_fn, input_mode)
    if x.shape[1] != classifier.model.in_dim:
        raise ShapeError(f"classifier expects dim {classifier.model.in_dim}, got {x.shape[1]}")
    unknown = sorted(set(np.unique(labels).tolist()) - set(classifier.classes.tolist()))
    if unknown:
        raise DataError(f"test labels {unknown} are not classifier classes")
    pred = classifier.predict(x)
    correct = pred == labels
    present = np.unique(labels)
    per_class = {int(k): 100.0 * float(correct[labels == k].mean()) for k in present}
    cm = confusion_matrix(labels, pred, classifier.classes)
    ss = sensitivity_specificity(cm, include=np.searchsorted(classifier.classes, present))
    return SettingResult(setting, float(np.mean(list(per_class.values()))), per_class,
                         ss["sen"], ss["spe"], cm, pred, correct)


@dataclass
class GzslReport:
    """Scores of one run. Fields of a setting that was not evaluated are ``None``."""

    label: str
    ablation: str
    seed: int
    acc_S: float | None
    acc_U: float | None
    H: float | None
    sen_S: float | None
    spe_S: float | None
    sen_U: float | None
    spe_U: float | None
    per_class_accuracy: dict[str, dict[int, float]]
    classifier_input_dim: int
    mcnemar: dict | None = None
    provenance: list[dict] = field(default_factory=list)
    correct: np.ndarray | None = field(default=None, repr=False)  # settings A then B

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("correct")
        out["per_class_accuracy"] = {s: {str(k): v for k, v in d.items()}
                                     for s, d in self.per_class_accuracy.items()}
        return out


def report_from_settings(label, ablation, seed, a: SettingResult | None,
                         b: SettingResult | None, input_dim: int, provenance=()) -> GzslReport:
    if a is None and b is None:
        raise ConfigError("at least one setting must be evaluated")
    both = a is not None and b is not None
    return GzslReport(
        label, ablation, seed,
        a.acc if a else None, b.acc if b else None,
        harmonic_mean(a.acc, b.acc) if both else None,
        a.sen if a else None, a.spe if a else None,
        b.sen if b else None, b.spe if b else None,
        {r.setting: r.per_class for r in (a, b) if r is not None},
        input_dim, None, list(provenance),
        np.concatenate([r.correct for r in (a, b) if r is not None]))


@dataclass
class EvalConfig:
    synth_per_class: int = 200
    decoder_stddev: float = 1.0
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seeds: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if isinstance(self.classifier, dict):
            self.classifier = ClassifierConfig(**self.classifier)
        if self.synth_per_class <= 0 or self.seeds <= 0:
            raise ConfigError("synth_per_class and seeds must be positive")
        if self.decoder_stddev < 0:
            raise ConfigError("decoder_stddev must be non-negative")


@dataclass
class ExperimentConfig:
    split: SplitSpec
    cycle: CycleTrainConfig = field(default_factory=CycleTrainConfig)
    synth: SynthTrainConfig = field(default_factory=SynthTrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


@dataclass(frozen=True)
class AblationPlan:
    tag: str
    label: str
    zeroed: str | None  # lambda field set to 0
    input_mode: str  # "combined" | "MRI" | "DP"
    source: str  # modality the CVAE synthesizes


def ablation_plan(tag: str) -> AblationPlan:
    if tag not in ABLATIONS:
        raise ConfigError(f"unknown ablation {tag!r}; choose from {', '.join(ABLATIONS)}")
    mode = {"MR_only": "MRI", "DP_only": "DP"}.get(tag, "combined")
    return AblationPlan(tag, LABELS[tag], _ZEROED_LAMBDA.get(tag), mode,
                        "DP" if tag == "reverse" else "MRI")


def audit(stage: str, data: FeatureSet, unseen, source: str = "real") -> dict:
    """Provenance record for a training input; real unseen-class samples raise."""
    classes = sorted(int(c) for c in np.unique(data.classes))
    if source == "real":
        leaked = sorted(set(classes) & set(int(c) for c in unseen))
        if leaked:
            raise LeakageError(f"stage {stage!r} received real samples of unseen classes {leaked}")
    return {"stage": stage, "source": source, "modality": data.modality,
            "classes": classes, "count": len(data)}


def _fingerprint(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part).tobytes())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
    return h.hexdigest()


class StageCache:
    """Trained models keyed by their inputs, optionally mirrored as checkpoint files.

    ``mode``: "train" retrains and overwrites files; "resume" loads an existing
    file for a key and trains otherwise; "require" loads and fails when the
    file is missing.
    """

    def __init__(self, directory: str | Path | None = None, mode: str = "train"):
        if mode not in ("train", "resume", "require"):
            raise ConfigError(f"unknown cache mode {mode!r}")
        if mode == "require" and directory is None:
            raise ConfigError("require mode needs a checkpoint directory")
        self.directory = Path(directory) if directory is not None else None
        self.mode = mode
        self.memory: dict[str, tuple] = {}
        self.files: dict[str, Path] = {}

    def path(self, kind: str, key: str) -> Path | None:
        return None if self.directory is None else self.directory / f"{kind}-{key[:16]}.ckpt"

    def get_or_train(self, kind: str, key: str, train: Callable[[], tuple]):
        name = f"{kind}-{key[:16]}"
        if name in self.memory:
            return self.memory[name]
        path = self.path(kind, key)
        if path is not None and self.mode != "train" and path.exists():
            loader = checkpoint.load_cycle if kind == "cycle" else checkpoint.load_cvae
            model, meta = loader(path)
            if meta.get("key") != key:
                raise CheckpointError(f"{path} was written for different inputs")
            value = (model, meta.get("history"))
            log.info("loaded %s from %s", kind, path)
        elif self.mode == "require":
            raise CheckpointError(f"no {kind} checkpoint for this configuration at {path}; "
                                  "run the train command first")
        else:
            model, history = train()
            value = (model, history)
            if path is not None:
                saver = checkpoint.save_cycle if kind == "cycle" else checkpoint.save_cvae
                saver(path, model, {"key": key, "history": history})
        self.memory[name] = value
        if path is not None:
            self.files[name] = path
        return value


def _cycle_history_dict(h) -> dict:
    return {c: list(getattr(h, c)) for c in h.columns} | {
        "restart_scores": list(h.restart_scores), "selected_restart": h.selected_restart}


@dataclass
class TrainedStages:
    """Everything a seed's evaluation needs from the training stages."""

    plan: AblationPlan
    seed: int
    split: object
    cycle: CycleModel
    cvae: CvaeModel
    cycle_history: dict | None
    synth_history: list | None
    classes: list[int]
    provenance: list[dict]
    checkpoints: dict[str, Path]

    def translate_fn(self) -> Callable:
        if self.plan.source == "MRI":
            return lambda v: translate(self.cycle, v)
        return lambda v: translate_back(self.cycle, v)


def train_stages(dataset: PairedDataset, config: ExperimentConfig, ablation: str, seed: int,
                 cache: StageCache | None = None, log_fn=None) -> TrainedStages:
    """Split, then fit (or fetch) the translation and synthesis models for one seed.

    Only seen-class training samples reach either model; every input is audited.
    """
    plan = ablation_plan(ablation)
    cache = cache or StageCache()
    classes_all = sorted(set(config.split.seen_classes) | set(config.split.unseen_classes))
    unseen = list(config.split.unseen_classes)
    if not unseen:
        raise ConfigError("the split declares no unseen classes")
    spl = split(dataset, replace(config.split, seed=seed))
    train = dataset.take(spl.train)
    provenance = [audit("transform", train.mri, unseen), audit("transform", train.dp, unseen)]
    data_key = _fingerprint(dataset.mri.features, dataset.dp.features, dataset.mri.classes,
                            spl.train)

    cycle_cfg = replace(config.cycle, seed=seed)
    cycle_key = _fingerprint("cycle", data_key, asdict(cycle_cfg))

    def fit_cycle():
        model = init_cycle(train.mri.dim, train.dp.dim, cycle_cfg,
                           mri=train.mri.features, dp=train.dp.features)
        trained, hist = train_cycle(model, train.mri.features, train.dp.features, cycle_cfg,
                                    log=log_fn)
        return trained, _cycle_history_dict(hist)

    cycle, cycle_hist = cache.get_or_train("cycle", cycle_key, fit_cycle)

    source_train = train.mri if plan.source == "MRI" else train.dp
    synth_cfg = replace(config.synth, seed=seed)
    if plan.zeroed:
        synth_cfg = replace(synth_cfg, **{plan.zeroed: 0.0})
    provenance.append(audit("synth", source_train, unseen))
    class_range = (min(classes_all), max(classes_all))
    synth_key = _fingerprint("synth", data_key, plan.source, asdict(synth_cfg), class_range)

    def fit_synth():
        model = init_cvae(source_train.dim, class_range, synth_cfg, features=source_train.features)
        trained, hist = train_synth(model, source_train.features, source_train.classes,
                                    synth_cfg, log=log_fn)
        return trained, [list(r) for r in hist.rows]

    cvae, synth_hist = cache.get_or_train("cvae", synth_key, fit_synth)
    files = {k: cache.path(k, key) for k, key in (("cycle", cycle_key), ("cvae", synth_key))}
    return TrainedStages(plan, seed, spl, cycle, cvae, cycle_hist, synth_hist, classes_all,
                         provenance, {k: v for k, v in files.items() if v is not None})


def synthesize_training_set(stages: TrainedStages, config: ExperimentConfig):
    """Synthetic features of every class in the source modality, with labels."""
    n = config.eval.synth_per_class
    x = np.concatenate([generate_features(stages.cvae, c, n, [stages.seed, 3, c],
                                          config.eval.decoder_stddev) for c in stages.classes])
    return x, np.repeat(stages.classes, n)


@dataclass
class SeedRun:
    report: GzslReport
    cycle_history: dict | None
    synth_history: list | None
    synthetic: tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)
    classifier_losses: list[float] = field(default_factory=list, repr=False)


def score_stages(stages: TrainedStages, dataset: PairedDataset, config: ExperimentConfig,
                 settings=("A", "B")) -> SeedRun:
    """Train the classifier on synthesized features and score the requested settings."""
    plan = stages.plan
    syn_x, syn_y = synthesize_training_set(stages, config)
    provenance = stages.provenance + [{"stage": "classifier", "source": "synthetic",
                                       "modality": plan.source, "classes": stages.classes,
                                       "count": int(len(syn_y))}]
    forward = stages.translate_fn()
    train_x = classifier_inputs(syn_x, plan.source, forward, plan.input_mode)
    clf_cfg = replace(config.eval.classifier, seed=stages.seed)
    clf, losses = train_classifier(train_x, syn_y, stages.classes, clf_cfg)

    real = dataset.mri if plan.source == "MRI" else dataset.dp
    results = {}
    for setting, idx in (("A", stages.split.test), ("B", stages.split.unseen)):
        if setting not in settings:
            continue
        if len(idx) == 0:
            what = "held-out seen-class samples (S_test)" if setting == "A" else "unseen samples"
            raise DataError(f"setting {setting} has no test data: {what} is empty")
        test = real.take(idx)
        results[setting] = evaluate(clf, test.features, test.classes, setting, forward,
                                    plan.input_mode, plan.source)
    report = report_from_settings(plan.label, plan.tag, stages.seed, results.get("A"),
                                  results.get("B"), input_dim=train_x.shape[1],
                                  provenance=provenance)
    return SeedRun(report, stages.cycle_history, stages.synth_history, (syn_x, syn_y), losses)


def run_seed(dataset: PairedDataset, config: ExperimentConfig, ablation: str, seed: int,
             cache: StageCache | None = None, log_fn=None, settings=("A", "B")) -> SeedRun:
    """One complete pipeline run for one seed."""
    stages = train_stages(dataset, config, ablation, seed, cache, log_fn)
    return score_stages(stages, dataset, config, settings)


@dataclass
class ExperimentResult:
    label: str
    ablation: str
    runs: list[SeedRun]
    mcnemar: dict | None = None  # against the full model, discordant pairs pooled over seeds

    @property
    def reports(self) -> list[GzslReport]:
        return [r.report for r in self.runs]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=np.float64)

    def summary(self) -> dict[str, tuple[float, float] | None]:
        out = {}
        for name in TABLE_COLUMNS:
            if name == "p":
                out[name] = None if self.mcnemar is None else (self.mcnemar["p_value"], 0.0)
                continue
            values = [getattr(r, name) for r in self.reports]
            if any(v is None for v in values):
                out[name] = None
                continue
            v = np.asarray(values, dtype=np.float64)
            out[name] = (float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0)
        return out

    def to_dict(self) -> dict:
        return {"label": self.label, "ablation": self.ablation,
                "summary": {k: (None if v is None else {"mean": v[0], "std": v[1]})
                            for k, v in self.summary().items()},
                "mcnemar": self.mcnemar,
                "reports": [r.to_dict() for r in self.reports]}


def run_experiment(dataset: PairedDataset, config: ExperimentConfig, ablation: str = "full",
                   seeds=None, cache: StageCache | None = None, log_fn=None) -> ExperimentResult:
    """The full pipeline over several seeds (default ``eval.base_seed + range(eval.seeds)``)."""
    plan = ablation_plan(ablation)
    if seeds is None:
        seeds = [config.eval.base_seed + i for i in range(config.eval.seeds)]
    cache = cache or StageCache()
    runs = [run_seed(dataset, config, ablation, int(s), cache, log_fn) for s in seeds]
    return ExperimentResult(plan.label, plan.tag, runs)


def compare_to_full(full: ExperimentResult, other: ExperimentResult) -> dict:
    """McNemar of ``other`` against ``full`` with discordant pairs pooled over matching seeds."""
    if [r.seed for r in full.reports] != [r.seed for r in other.reports]:
        raise ConfigError("experiments were run on different seeds")
    a = np.concatenate([r.correct for r in full.reports])
    b = np.concatenate([r.correct for r in other.reports])
    result = asdict(mcnemar(a, b))
    for rep, rf in zip(other.reports, full.reports):
        rep.mcnemar = asdict(mcnemar(rf.correct, rep.correct))
    other.mcnemar = result
    return result


def ablation_sweep(dataset: PairedDataset, config: ExperimentConfig, tags=ABLATIONS, seeds=None,
                   cache: StageCache | None = None, log_fn=None) -> list[ExperimentResult]:
    cache = cache or StageCache()
    tags = list(tags)
    if "full" not in tags:
        tags.insert(0, "full")
    results = {t: run_experiment(dataset, config, t, seeds, cache, log_fn) for t in tags}
    for t, res in results.items():
        if t != "full":
            compare_to_full(results["full"], res)
    return [results[t] for t in tags]


def format_table(results: list[ExperimentResult]) -> str:
    """Aligned text table with ``mean(std)`` cells."""
    header = ["Method", "Acc_S", "Acc_U", "H", "p", "Sen_S", "Spe_S", "Sen_U", "Spe_U"]
    rows = [header]
    for res in results:
        s = res.summary()
        cells = [res.label]
        for name in TABLE_COLUMNS:
            v = s[name]
            if v is None:
                cells.append("-")
            elif name == "p":
                cells.append(f"{v[0]:.3g}")
            else:
                cells.append(f"{v[0]:.1f}({v[1]:.1f})")
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths))) for r in rows) + "\n"
