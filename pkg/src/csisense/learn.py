"""Multiclass linear SVMs over per-pair features, early/late fusion, and the
evaluation protocols (stratified k-fold, leave-one-group-out, two-stage
location routing, training-set scaling).

Training is one-vs-rest dual coordinate descent on the L2-regularized
hinge loss, with a seeded permutation schedule and a duality-gap stop, so a
(dataset, seed, config) triple always reproduces the same model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .features import Codebook, FeatureKind, FeatureVector, train_codebook, bow_quantize

__all__ = [
    "LinearSvm",
    "FusionMode",
    "FusionModel",
    "SampleMeta",
    "FeatureSet",
    "EvalReport",
    "KFold",
    "LeaveGroupOut",
    "TwoStage",
    "TrainSubsetScaling",
    "train_svm",
    "decision_values",
    "predict_proba",
    "train_fusion",
    "fuse_predict",
    "two_stage_classify",
    "make_folds",
    "cross_validate",
    "derive_seed",
]


def derive_seed(*parts: int) -> int:
    """Stable child seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class LinearSvm:
    """One-vs-rest linear classifier with the training z-score baked in."""

    class_names: tuple[str, ...]
    weights: np.ndarray  # (n_classes, n_features)
    biases: np.ndarray  # (n_classes,)
    reg_c: float
    scaler_mean: np.ndarray
    scaler_std: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.weights).all() or not np.isfinite(self.biases).all():
            raise ValueError("model weights must be finite")
        if (self.scaler_std <= 0).any():
            raise ValueError("scaler std must be positive")

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


def _dcd_binary(x: np.ndarray, y: np.ndarray, reg_c: float,
                rng: np.random.Generator, tol: float, max_epochs: int) -> np.ndarray:
    """Dual coordinate descent for min 0.5|w|^2 + C sum hinge(y w.x).

    Runs seeded permutation sweeps until the relative duality gap drops
    below tol or max_epochs is hit.  Coordinates stuck at a bound with a
    clearly non-violating gradient are shrunk from the sweep; the gap is
    always evaluated on the full data, so shrinking never loosens the stop.
    The last feature column is expected to be the constant bias column.
    """
    n = x.shape[0]
    w = np.zeros(x.shape[1])
    alpha = np.zeros(n)
    qii = np.maximum(np.einsum("ij,ij->i", x, x), 1e-12)
    active = np.arange(n)
    shrink_hi, shrink_lo = math.inf, -math.inf
    for _ in range(max_epochs):
        pg_max, pg_min = -math.inf, math.inf
        keep = []
        changed = False
        for i in active[rng.permutation(len(active))]:
            g = y[i] * (x[i] @ w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                if g > shrink_hi:
                    continue
                pg = min(g, 0.0)
            elif a >= reg_c:
                if g < shrink_lo:
                    continue
                pg = max(g, 0.0)
            else:
                pg = g
            keep.append(i)
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if abs(pg) > 1e-12:
                a_new = min(max(a - g / qii[i], 0.0), reg_c)
                if a_new != a:
                    w += ((a_new - a) * y[i]) * x[i]
                    alpha[i] = a_new
                    changed = True
        scores = x @ w
        wnorm = 0.5 * (w @ w)
        primal = wnorm + reg_c * np.maximum(0.0, 1.0 - y * scores).sum()
        if primal - (alpha.sum() - wnorm) <= tol * max(1.0, abs(primal)):
            break
        if not changed or not keep:
            if len(active) == n:
                break  # full sweep is KKT-stationary; gap is numerically stuck
            active = np.arange(n)
            shrink_hi, shrink_lo = math.inf, -math.inf
            continue
        active = np.asarray(keep, dtype=np.intp)
        shrink_hi = pg_max if pg_max > 0.0 else math.inf
        shrink_lo = pg_min if pg_min < 0.0 else -math.inf
    return w


def train_svm(x: np.ndarray, y, reg_c: float = 1.0, seed: int = 0,
              tol: float = 1e-4, max_epochs: int = 1000) -> LinearSvm:
    """Train a one-vs-rest linear SVM on z-scored features.

    Scaling statistics come from the training data only; zero-variance
    dimensions get unit std.  Deterministic for a given (x, y, seed).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a (n>=2, d) feature matrix, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("features must be finite")
    labels = np.asarray([str(v) for v in y])
    if labels.shape[0] != x.shape[0]:
        raise ValueError("feature/label count mismatch")
    class_names = tuple(sorted(set(labels.tolist())))
    if len(class_names) < 2:
        raise ValueError("training needs at least 2 classes")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    xz = np.ascontiguousarray(np.column_stack([(x - mean) / std, np.ones(x.shape[0])]))

    weights = np.empty((len(class_names), x.shape[1]))
    biases = np.empty(len(class_names))
    for ci, cls in enumerate(class_names):
        yb = np.where(labels == cls, 1.0, -1.0)
        rng = np.random.default_rng([seed, ci])
        w = _dcd_binary(xz, yb, reg_c, rng, tol, max_epochs)
        weights[ci] = w[:-1]
        biases[ci] = w[-1]
    return LinearSvm(class_names=class_names, weights=weights, biases=biases,
                     reg_c=reg_c, scaler_mean=mean, scaler_std=std)


def decision_values(svm: LinearSvm, x: np.ndarray) -> np.ndarray:
    """Per-class decision values for one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != svm.n_features:
        raise ValueError(f"expected {svm.n_features} features, got {x.shape[-1]}")
    xz = (x - svm.scaler_mean) / svm.scaler_std
    return xz @ svm.weights.T + svm.biases


def predict_proba(svm: LinearSvm, x: np.ndarray) -> np.ndarray:
    """Softmax over decision values; rank-preserving, sums to 1."""
    d = decision_values(svm, x)
    e = np.exp(d - d.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class FusionMode:
    EARLY = "early"
    LATE = "late"


@dataclass(frozen=True)
class FusionModel:
    """Trained classifier bundle: one SVM over concatenated features (early)
    or one SVM per Tx-Rx pair whose probability vectors are summed (late)."""

    mode: str
    svms: tuple[LinearSvm, ...]
    codebooks: tuple[Codebook, ...] | None = None
    pipeline_config: dict | None = None

    def __post_init__(self):
        if self.mode not in (FusionMode.EARLY, FusionMode.LATE):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.mode == FusionMode.EARLY and len(self.svms) != 1:
            raise ValueError("early fusion uses exactly one classifier")
        if len(self.svms) == 0:
            raise ValueError("a fusion model needs at least one classifier")
        names = {s.class_names for s in self.svms}
        if len(names) != 1:
            raise ValueError("all per-pair classifiers must share class names")

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.svms[0].class_names

    @property
    def n_pairs(self) -> int:
        return len(self.svms)


def _as_values(feat) -> np.ndarray:
    if isinstance(feat, FeatureVector):
        return feat.values
    return np.asarray(feat, dtype=np.float64)


def train_fusion(feats: np.ndarray, labels, mode: str = FusionMode.LATE,
                 reg_c: float = 1.0, seed: int = 0,
                 codebooks: tuple[Codebook, ...] | None = None,
                 pipeline_config: dict | None = None) -> FusionModel:
    """Train a fusion model from per-pair features of shape (n, pairs, dim)."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 3:
        raise ValueError(f"expected (n, pairs, dim) features, got shape {feats.shape}")
    n, p, d = feats.shape
    if mode == FusionMode.EARLY:
        svms = (train_svm(feats.reshape(n, p * d), labels, reg_c=reg_c, seed=seed),)
    else:
        svms = tuple(train_svm(feats[:, i, :], labels, reg_c=reg_c,
                               seed=derive_seed(seed, i)) for i in range(p))
    return FusionModel(mode=mode, svms=svms, codebooks=codebooks,
                       pipeline_config=pipeline_config)


def fuse_predict(model: FusionModel, feats) -> tuple[str, np.ndarray]:
    """Predict one sample from its per-pair feature vectors.

    Early fusion concatenates; late fusion averages the per-pair probability
    vectors.  Ties resolve to the lowest class index.
    """
    vals = [_as_values(f) for f in feats]
    if model.mode == FusionMode.EARLY:
        probs = predict_proba(model.svms[0], np.concatenate(vals))
    else:
        if len(vals) != model.n_pairs:
            raise ValueError(f"expected {model.n_pairs} pair features, got {len(vals)}")
        probs = np.zeros(len(model.class_names))
        for svm, v in zip(model.svms, vals):
            probs += predict_proba(svm, v)
        probs /= model.n_pairs
    return model.class_names[int(np.argmax(probs))], probs


def two_stage_classify(location_model: FusionModel,
                       action_models: Mapping[str, FusionModel],
                       feats) -> tuple[str, str]:
    """Predict the location first, then route to that location's action model."""
    location, _ = fuse_predict(location_model, feats)
    if location not in action_models:
        raise ValueError(f"no action model for predicted location {location!r}")
    action, _ = fuse_predict(action_models[location], feats)
    return location, action


@dataclass(frozen=True)
class SampleMeta:
    action: str = ""
    person: str = ""
    room: str = ""
    location: str = ""

    def field(self, name: str) -> str:
        if name not in ("action", "person", "room", "location"):
            raise ValueError(f"unknown label field {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class FeatureSet:
    """Per-sample, per-pair feature material ready for cross-validation.

    Gabor features are fixed vectors in ``features`` (n, pairs, dim).
    Bag-of-words sets carry raw descriptors instead, because the codebook
    must be trained inside each fold on training samples only.
    """

    kind: FeatureKind
    meta: tuple[SampleMeta, ...]
    features: np.ndarray | None = None
    descriptors: tuple[tuple[np.ndarray, ...], ...] | None = None

    def __post_init__(self):
        if self.kind is FeatureKind.GABOR:
            if self.features is None or self.features.ndim != 3:
                raise ValueError("gabor sets need (n, pairs, dim) features")
            if self.features.shape[0] != len(self.meta):
                raise ValueError("feature/meta count mismatch")
        else:
            if self.descriptors is None or len(self.descriptors) != len(self.meta):
                raise ValueError("bow sets need per-sample descriptors")

    def __len__(self) -> int:
        return len(self.meta)

    @property
    def n_pairs(self) -> int:
        if self.kind is FeatureKind.GABOR:
            return self.features.shape[1]
        return len(self.descriptors[0])

    def labels(self, field: str) -> np.ndarray:
        return np.asarray([m.field(field) for m in self.meta])


@dataclass(frozen=True)
class KFold:
    k: int = 10
    target: str = "action"

    @property
    def name(self) -> str:
        return f"kfold{self.k}-{self.target}"


@dataclass(frozen=True)
class LeaveGroupOut:
    group: str = "room"
    target: str = "action"

    @property
    def name(self) -> str:
        return f"leave-one-{self.group}-out-{self.target}"


@dataclass(frozen=True)
class TwoStage:
    k: int = 10
    location_field: str = "location"
    target: str = "action"

    @property
    def name(self) -> str:
        return f"two-stage-{self.location_field}-{self.target}"


@dataclass(frozen=True)
class TrainSubsetScaling:
    n_train: int = 1
    group: str = "room"
    target: str = "action"

    @property
    def name(self) -> str:
        return f"scaling-{self.n_train}-{self.group}-{self.target}"


Protocol = KFold | LeaveGroupOut | TwoStage | TrainSubsetScaling


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outcome: overall accuracy, per-class confusion counts in
    class_names order (rows = truth), and per-fold accuracies."""

    accuracy: float
    confusion: np.ndarray
    per_fold: tuple[float, ...]
    protocol: str
    seed: int
    class_names: tuple[str, ...]
    fold_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = self.confusion
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != len(self.class_names):
            raise ValueError(f"confusion shape {c.shape} vs {len(self.class_names)} classes")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        total = int(c.sum())
        if total > 0 and abs(self.accuracy - np.trace(c) / total) > 1e-9:
            raise ValueError("accuracy does not match the confusion trace")


def _stratified_folds(labels: np.ndarray, k: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """Deal each class's shuffled indices round-robin into k folds."""
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset += len(idx)
    return [np.sort(np.asarray(f, dtype=np.intp)) for f in folds]


def make_folds(dataset: FeatureSet, protocol: Protocol,
               seed: int = 0) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Deterministic (name, train_idx, test_idx) splits for a protocol."""
    n = len(dataset)
    everything = np.arange(n, dtype=np.intp)

    if isinstance(protocol, (KFold, TwoStage)):
        if isinstance(protocol, TwoStage):
            strat = np.asarray([f"{m.field(protocol.location_field)}|{m.field(protocol.target)}"
                                for m in dataset.meta])
        else:
            strat = dataset.labels(protocol.target)
        k = protocol.k
        if n < k:
            raise ValueError(f"dataset of {n} samples cannot make {k} folds")
        rng = np.random.default_rng([seed, 101])
        folds = _stratified_folds(strat, k, rng)
        out = []
        for f, test in enumerate(folds):
            if len(test) == 0:
                continue
            mask = np.ones(n, dtype=bool)
            mask[test] = False
            out.append((f"fold{f}", everything[mask], test))
        return out

    groups = dataset.labels(protocol.group)
    names = sorted(set(groups.tolist()))
    if isinstance(protocol, LeaveGroupOut):
        if len(names) < 2:
            raise ValueError("leave-one-group-out needs at least 2 groups")
        out = []
        for g in names:
            test = np.flatnonzero(groups == g)
            train = np.flatnonzero(groups != g)
            out.append((g, train, test))
        return out

    if isinstance(protocol, TrainSubsetScaling):
        if protocol.n_train < 1 or protocol.n_train > len(names) - 1:
            raise ValueError(f"n_train={protocol.n_train} needs 1..{len(names) - 1} "
                             f"training groups out of {len(names)}")
        out = []
        for gi, g in enumerate(names):
            others = [h for h in names if h != g]
            rng = np.random.default_rng([seed, 211, gi])
            order = [others[i] for i in rng.permutation(len(others))]
            chosen = set(order[:protocol.n_train])
            train = np.flatnonzero(np.isin(groups, sorted(chosen)))
            test = np.flatnonzero(groups == g)
            out.append((g, train, test))
        return out

    raise ValueError(f"unsupported protocol {protocol!r}")


def realize_features(dataset: FeatureSet, train_idx: np.ndarray, seed: int,
                     bow_k: int = 48) -> tuple[np.ndarray, tuple[Codebook, ...] | None]:
    """Fixed-length features for every sample, fitting any codebook on the
    training subset only (per pair, to avoid leakage)."""
    if dataset.kind is FeatureKind.GABOR:
        return dataset.features, None
    p = dataset.n_pairs
    codebooks = []
    feats = np.empty((len(dataset), p, bow_k))
    for pair in range(p):
        pool = np.vstack([dataset.descriptors[i][pair] for i in train_idx
                          if dataset.descriptors[i][pair].size])
        cb = train_codebook(pool, k=bow_k, seed=derive_seed(seed, 307, pair))
        codebooks.append(cb)
        for i in range(len(dataset)):
            feats[i, pair] = bow_quantize(dataset.descriptors[i][pair], cb).values
    return feats, tuple(codebooks)


def _check_train_coverage(labels: np.ndarray,
                          folds: list[tuple[str, np.ndarray, np.ndarray]]) -> None:
    classes = set(labels.tolist())
    covered = set()
    for _, train, _ in folds:
        covered |= set(labels[train].tolist())
    missing = classes - covered
    if missing:
        raise ValueError(f"classes never present in any training fold: {sorted(missing)}")


def cross_validate(dataset: FeatureSet, protocol: Protocol, seed: int = 0,
                   fusion: str = FusionMode.LATE, reg_c: float = 1.0,
                   bow_k: int = 48) -> EvalReport:
    """Run a protocol end to end and report accuracy plus confusion counts.

    Fold assignment, codebooks and scalers are all deterministic in
    (dataset, protocol, seed); codebooks and scalers are fit on training
    folds only.
    """
    target = protocol.target
    labels = dataset.labels(target)
    class_names = tuple(sorted(set(labels.tolist())))
    folds = make_folds(dataset, protocol, seed)
    _check_train_coverage(labels, folds)
    cls_index = {c: i for i, c in enumerate(class_names)}

    confusion = np.zeros((len(class_names), len(class_names)), dtype=np.int64)
    per_fold = []
    fold_names = []
    for fi, (fname, train, test) in enumerate(folds):
        fold_seed = derive_seed(seed, 997, fi)
        feats, codebooks = realize_features(dataset, train, fold_seed, bow_k)
        hits = 0
        if isinstance(protocol, TwoStage):
            locations = dataset.labels(protocol.location_field)
            loc_model = train_fusion(feats[train], locations[train], mode=fusion,
                                     reg_c=reg_c, seed=fold_seed, codebooks=codebooks)
            action_models = {}
            for loc in sorted(set(locations[train].tolist())):
                sub = train[locations[train] == loc]
                action_models[loc] = train_fusion(feats[sub], labels[sub], mode=fusion,
                                                  reg_c=reg_c,
                                                  seed=derive_seed(fold_seed, 1),
                                                  codebooks=codebooks)
            for i in test:
                _, pred = two_stage_classify(loc_model, action_models, feats[i])
                confusion[cls_index[labels[i]], cls_index[pred]] += 1
                hits += pred == labels[i]
        else:
            model = train_fusion(feats[train], labels[train], mode=fusion,
                                 reg_c=reg_c, seed=fold_seed, codebooks=codebooks)
            for i in test:
                pred, _ = fuse_predict(model, feats[i])
                confusion[cls_index[labels[i]], cls_index[pred]] += 1
                hits += pred == labels[i]
        per_fold.append(hits / len(test))
        fold_names.append(fname)

    total = int(confusion.sum())
    return EvalReport(accuracy=float(np.trace(confusion)) / total,
                      confusion=confusion,
                      per_fold=tuple(per_fold),
                      protocol=protocol.name,
                      seed=seed,
                      class_names=class_names,
                      fold_names=tuple(fold_names))
