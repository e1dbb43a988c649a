"""2-fold cross-validation, threat-level measures and the Wilcoxon
signed-rank test."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .classify import ClassifierSpec, predict_many, train
from .datamodel import (CommunityDataset, Instance, Label, as_matrix, minmax_apply,
                        minmax_fit, rebuild)
from .decompose import decompose_majority, decompose_minority, fold_label
from .oversample import AmotreConfig, SmoteConfig, amotre, smote, smote_undersample
from .seeding import derive_rng, derive_seed

VARIANTS = ("default", "smote", "cd_m_smote", "cd_mi_smote",
            "amo_na", "amotre", "cd_m_amotre", "cd_mi_amotre")

DISPLAY = {
    "default": "Default", "smote": "SMOTE", "cd_m_smote": "CD(M)-SMOTE",
    "cd_mi_smote": "CD(MI)-SMOTE", "amo_na": "AMO-na", "amotre": "AMOTRE",
    "cd_m_amotre": "CD(M)-AMOTRE", "cd_mi_amotre": "CD(MI)-AMOTRE",
}


def oversampler_of(variant: str) -> Optional[str]:
    if variant.endswith("smote"):
        return "smote"
    if variant in ("amo_na", "amotre") or variant.endswith("amotre"):
        return "amotre"
    return None


def decomposes(variant: str):
    """(majority, minority) decomposition flags of a variant."""
    return variant.startswith("cd_m"), variant.startswith("cd_mi")


@dataclass(frozen=True)
class ExperimentSpec:
    variant: str
    classifier: ClassifierSpec
    perc_over: int = 200
    tau: float = 10
    k_smote: int = 5
    perc_under: Optional[int] = None
    k_majority: int = 2
    k_minority: int = 2
    seed: int = 0
    foldwise_normalization: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def params(self) -> dict:
        """Parameters that actually influence this variant."""
        out = {}
        over = oversampler_of(self.variant)
        if over is not None:
            out["perc_over"] = self.perc_over
        if over == "smote":
            out["k_smote"] = self.k_smote
            if self.perc_under is not None:
                out["perc_under"] = self.perc_under
        if self.variant in ("amotre", "cd_m_amotre", "cd_mi_amotre"):
            out["tau"] = self.tau
        dm, di = decomposes(self.variant)
        if dm:
            out["k_majority"] = self.k_majority
        if di:
            out["k_minority"] = self.k_minority
        return out

    def to_dict(self):
        return {"variant": self.variant, "classifier": self.classifier.to_dict(),
                "params": self.params(), "seed": self.seed,
                "foldwise_normalization": self.foldwise_normalization}


@dataclass
class Measures:
    P: int
    P_T: int
    TP_T: int
    FN_T: int
    FP: int
    TN: int
    F1: float

    def to_dict(self):
        return asdict(self)


@dataclass
class EvalReport:
    measures: Measures
    per_fold: list
    experiment: ExperimentSpec

    def __getattr__(self, name):
        # expose the aggregate counts directly (report.TP_T, report.F1, ...)
        if name in Measures.__dataclass_fields__:
            return getattr(self.measures, name)
        raise AttributeError(name)

    def to_dict(self):
        return {"experiment": self.experiment.to_dict(),
                "measures": self.measures.to_dict(),
                "folds": self.per_fold}


def f1_score(tp_t: int, p_t: int, fp: int) -> float:
    """F1 from threat-level recall and the precision TP_T / (TP_T + FP)."""
    if tp_t == 0:
        return 0.0
    prec = tp_t / (tp_t + fp)
    rec = tp_t / p_t
    return 2 * prec * rec / (prec + rec)


def measures(predictions: Sequence, truth: Sequence[Instance]) -> Measures:
    """Threat-level counts for binary predictions aligned with ``truth``.

    A threat is detected when at least one of its anomalous instances is
    predicted anomalous.
    """
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth are not aligned")
    threats, detected = set(), set()
    P = FP = TN = 0
    for pred, inst in zip(predictions, truth):
        flagged = Label(pred) is Label.ANOMALOUS
        if inst.is_anomalous:
            P += 1
            threats.add(inst.threat_id)
            if flagged:
                detected.add(inst.threat_id)
        elif flagged:
            FP += 1
        else:
            TN += 1
    tp_t = len(detected)
    p_t = len(threats)
    return Measures(P, p_t, tp_t, p_t - tp_t, FP, TN, f1_score(tp_t, p_t, FP))


def split_2fold(instances: Sequence[Instance], seed):
    """Stratified random halves; returns two lists of instance indices."""
    a, b = [], []
    rng = np.random.default_rng(seed)
    for label in (Label.NORMAL, Label.ANOMALOUS):
        idx = np.array([i for i, inst in enumerate(instances) if inst.label is label], dtype=int)
        if idx.size < 2:
            raise ValueError(f"class {label.value} has {idx.size} instances; 2-fold CV needs >= 2")
        perm = rng.permutation(idx)
        half = (perm.size + 1) // 2
        a.extend(perm[:half].tolist())
        b.extend(perm[half:].tolist())
    return sorted(a), sorted(b)


def _resample(spec: ExperimentSpec, train_set, rng, fold_seed):
    majority, minority = _split_classes(train_set)
    info = {"n_train_majority": len(majority), "n_train_minority": len(minority),
            "n_synthetic": 0, "n_trappers": 0}
    over = oversampler_of(spec.variant)
    if over == "smote":
        syn = smote(minority, SmoteConfig(spec.perc_over, spec.k_smote, spec.perc_under), rng)
        if spec.perc_under is not None:
            majority = smote_undersample(majority, len(syn), spec.perc_under, rng)
        minority = minority + syn
        info["n_synthetic"] = len(syn)
    elif over == "amotre":
        cfg = AmotreConfig(perc_over=spec.perc_over, tau=spec.tau,
                           remove_trappers=spec.variant != "amo_na")
        syn, table = amotre(minority, majority, cfg, rng)
        minority = table.survivors(minority) + syn
        info["n_synthetic"] = len(syn)
        info["n_trappers"] = int(table.trapper.sum())
    dm, di = decomposes(spec.variant)
    if dm:
        majority, _ = decompose_majority(majority, spec.k_majority, seed=derive_seed(fold_seed, "cd_m"))
    if di:
        minority, _ = decompose_minority(minority, spec.k_minority, seed=derive_seed(fold_seed, "cd_i"))
    return majority + minority, info


def _split_classes(instances):
    majority = [i for i in instances if i.label is Label.NORMAL]
    minority = [i for i in instances if i.label is Label.ANOMALOUS]
    return majority, minority


def run_experiment(spec: ExperimentSpec, dataset: CommunityDataset) -> EvalReport:
    """2-fold CV of one experiment cell; measures over the concatenated folds."""
    if not dataset.normalized and not spec.foldwise_normalization:
        raise ValueError("dataset must be normalized (or use fold-wise normalization)")
    instances = list(dataset.instances)
    folds = split_2fold(instances, derive_seed(spec.seed, "split"))
    all_pred, all_truth, per_fold = [], [], []
    for f, test_idx in enumerate(folds):
        train_idx = folds[1 - f]
        train_set = [instances[i] for i in train_idx]
        test_set = [instances[i] for i in test_idx]
        if spec.foldwise_normalization:
            lo, hi = minmax_fit(as_matrix(train_set))
            train_set = rebuild(train_set, minmax_apply(as_matrix(train_set), lo, hi))
            test_set = rebuild(test_set, minmax_apply(as_matrix(test_set), lo, hi))
        fold_seed = derive_seed(spec.seed, "fold", f)
        rng = derive_rng(fold_seed, "oversample")
        training, info = _resample(spec, train_set, rng, fold_seed)
        assert not any(i.synthetic for i in test_set), "synthetic instance in a test fold"
        clf = spec.classifier
        if clf.kind == "random_forest":
            clf = ClassifierSpec(clf.kind, {**clf.params, "seed": derive_seed(fold_seed, "forest")})
        model = train(clf, training, dataset.schema)
        pred = [fold_label(lab) for lab in predict_many(model, test_set, dataset.schema)]
        m = measures(pred, test_set)
        per_fold.append({"fold": f, **m.to_dict(), **info,
                         "training_labels": model.labels})
        all_pred.extend(pred)
        all_truth.extend(test_set)
    return EvalReport(measures(all_pred, all_truth), per_fold, spec)


# --- Wilcoxon signed-rank ---------------------------------------------------

EXACT_MAX_N = 25


def _ranks(a):
    """Average ranks (1-based) of |differences|, ties share the mean rank."""
    order = np.argsort(a, kind="stable")
    ranks = np.empty(a.size)
    sa = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sa[j + 1] == sa[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(x, y) -> float:
    """Two-sided p-value of the paired Wilcoxon signed-rank test.

    Zero differences are dropped. Exact null distribution (all 2^n sign
    assignments, counted by dynamic programming over doubled ranks) for
    n <= 25; normal approximation with tie correction above. All-zero
    differences give p = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 1.0
    if n < 5:
        warnings.warn(f"only {n} non-zero differences; the test has little power", stacklevel=2)
    r = _ranks(np.abs(d))
    w_plus = r[d > 0].sum()
    mean = n * (n + 1) / 4.0
    if n <= EXACT_MAX_N:
        r2 = np.rint(2 * r).astype(int)
        total = int(r2.sum())
        counts = [0] * (total + 1)
        counts[0] = 1
        for v in r2:
            for s in range(total, v - 1, -1):
                counts[s] += counts[s - v]
        obs = abs(2 * w_plus - 2 * mean)
        extreme = sum(c for s, c in enumerate(counts) if abs(s - 2 * mean) >= obs - 1e-9)
        return min(1.0, extreme / 2.0 ** n)
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts ** 3 - tie_counts).sum() / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    return float(math.erfc(abs(z) / math.sqrt(2.0)))
