"""End-to-end recognition procedures over a dataset and a class split.

Four regimes: inductive zero-shot, transductive zero-shot (EM refinement on
unlabeled test features), generalized zero-shot with pseudo-example
synthesis, and few-shot refinement. Plus hyperparameter selection by
cross-validation over held-out seen classes.

Every pipeline is a pure function of (dataset, split, config, seed): all
randomness flows through seeds derived with derived_seed, so reruns are
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ConfigError, Dataset, Split
from .em import EmConfig, em_refine
from .gaussians import (ClassGaussian, LabeledBatch, few_shot_update, fit_mle,
                        log_density_rows, sample)
from .linalg import KernelSpec, _as_matrix, ridge_solve
from .metrics import (SplitRecord, harmonic_mean_gzsl, instance_accuracy, make_report,
                      mean_class_accuracy)
from .regression import HyperParams, fit_param_map, predict_unseen

_TAG_GZSL_SPLIT = 101
_TAG_SYNTH = 202
_TAG_SHOTS = 303
_TAG_CV = 404


class DataValidationError(ValueError):
    """The dataset cannot support the requested pipeline."""


def derived_seed(*parts: int) -> int:
    """Deterministically derive a child seed from integer parts."""
    entropy = [int(p) & 0xFFFFFFFF for p in parts]
    state = np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0]
    return int(state & 0x7FFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class GzslClassifier:
    """One-vs-rest linear scorer with bias, one weight row per class."""

    weights: np.ndarray
    class_order: tuple[int, ...]

    def __post_init__(self) -> None:
        weights = _as_matrix(self.weights, "weights")
        order = tuple(int(c) for c in self.class_order)
        if weights.shape[0] != len(order):
            raise ValueError("need one weight row per class")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "class_order", order)

    def predict(self, features) -> np.ndarray:
        x = _as_matrix(features, "features")
        scores = x @ self.weights[:, :-1].T + self.weights[:, -1]
        # argmax takes the first maximum, i.e. the lowest class position
        return np.asarray(self.class_order, dtype=np.int64)[np.argmax(scores, axis=1)]


def train_linear_ovr(features, labels, n_classes: int, lam: float,
                     class_ids=None) -> GzslClassifier:
    """Regularized least-squares one-vs-rest classifier on bias-augmented
    features, with +1/-1 targets per class. Deterministic closed form."""
    x = _as_matrix(features, "features")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ValueError("labels must hold one class index per feature row")
    if n_classes < 1:
        raise ValueError("n_classes must be positive")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    counts = np.bincount(y, minlength=n_classes) if y.size else np.zeros(n_classes)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError("labels reference classes outside [0, n_classes)")
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"classes with no training examples: {missing.tolist()}")
    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    targets = np.where(y[None, :] == np.arange(n_classes)[:, None], 1.0, -1.0)
    weights = ridge_solve(targets, x_aug.T, lam)
    order = tuple(range(n_classes)) if class_ids is None else tuple(int(c) for c in class_ids)
    return GzslClassifier(weights, order)


def zsl_classify(test_features, class_gaussians, class_ids) -> np.ndarray:
    """Assign each row to the class whose Gaussian gives the highest log
    density; ties resolve to the lowest class index."""
    gaussians = list(class_gaussians)
    ids = [int(c) for c in class_ids]
    if not gaussians or len(gaussians) != len(ids):
        raise ValueError("need one class id per Gaussian, at least one of each")
    x = _as_matrix(test_features, "test_features")
    scores = np.stack([log_density_rows(x, g) for g in gaussians], axis=1)
    return np.asarray(ids, dtype=np.int64)[np.argmax(scores, axis=1)]


def _check_split(dataset: Dataset, split: Split) -> None:
    out_of_range = [c for c in split.all_classes if not 0 <= c < dataset.n_classes]
    if out_of_range:
        raise DataValidationError(f"split references unknown classes: {out_of_range}")


def _fit_class_gaussians(batch: LabeledBatch, class_ids, min_count: int = 1,
                         what: str = "training examples") -> list[ClassGaussian]:
    counts = np.bincount(batch.labels, minlength=batch.n_classes)
    short = [c for c in class_ids if counts[c] < min_count]
    if short:
        raise DataValidationError(f"classes with fewer than {min_count} {what}: {short}")
    return [fit_mle(batch.rows_of(c)) for c in class_ids]


def _inductive_parts(dataset: Dataset, split: Split, kernel: KernelSpec,
                     hyper: HyperParams, train_rows=None):
    """Seen-class fits, the fitted map, and predicted unseen Gaussians.

    train_rows optionally restricts which rows may be used for the seen-class
    fits (the generalized pipeline trains on its 80 percent portion only).
    """
    _check_split(dataset, split)
    features, labels = dataset.features, dataset.labels
    if train_rows is not None:
        features, labels = features[train_rows], labels[train_rows]
    batch = LabeledBatch(features, labels, dataset.n_classes)
    seen = sorted(split.seen_classes)
    unseen = sorted(split.unseen_classes)
    seen_gaussians = _fit_class_gaussians(batch, seen)
    param_map = fit_param_map(seen_gaussians, dataset.attributes[seen], kernel, hyper)
    unseen_gaussians = predict_unseen(param_map, dataset.attributes[unseen])
    return seen_gaussians, param_map, unseen_gaussians


def _kernel_echo(kernel: KernelSpec) -> dict:
    return {"kind": kernel.kind, "bandwidth": kernel.bandwidth}


def _hyper_echo(hyper: HyperParams) -> dict:
    return {"lambda_mu": hyper.lambda_mu, "lambda_1": hyper.lambda_1,
            "lambda_sigma": hyper.lambda_sigma, "lambda_2": hyper.lambda_2}


def _em_echo(cfg: EmConfig) -> dict:
    return {"max_iters": cfg.max_iters, "rel_tol": cfg.rel_tol,
            "variance_floor": cfg.variance_floor}


def run_inductive(dataset: Dataset, split: Split, kernel: KernelSpec,
                  hyper: HyperParams, split_id: int = 0):
    """Zero-shot recognition using seen-class data only: fit seen Gaussians,
    learn the maps, predict unseen Gaussians, classify unseen test rows."""
    _, _, unseen_gaussians = _inductive_parts(dataset, split, kernel, hyper)
    unseen = sorted(split.unseen_classes)
    mask = np.isin(dataset.labels, unseen)
    predicted = zsl_classify(dataset.features[mask], unseen_gaussians, unseen)
    truth = dataset.labels[mask]
    metrics = {
        "unseen_acc": mean_class_accuracy(predicted, truth, unseen),
        "unseen_acc_instance": instance_accuracy(predicted, truth),
    }
    echo = {"regime": "zsl", "kernel": _kernel_echo(kernel), "hyper": _hyper_echo(hyper)}
    record = SplitRecord(split_id, metrics)
    return make_report([record], echo, split.seed)


def run_transductive(dataset: Dataset, split: Split, kernel: KernelSpec,
                     hyper: HyperParams, em_cfg: EmConfig = EmConfig(),
                     split_id: int = 0):
    """Zero-shot recognition with EM refinement of the predicted unseen
    Gaussians over the unlabeled unseen-class test features."""
    _, _, unseen_gaussians = _inductive_parts(dataset, split, kernel, hyper)
    unseen = sorted(split.unseen_classes)
    mask = np.isin(dataset.labels, unseen)
    unlabeled = dataset.features[mask]
    result = em_refine(unlabeled, unseen_gaussians, em_cfg)
    predicted = zsl_classify(unlabeled, result.gaussians, unseen)
    truth = dataset.labels[mask]
    metrics = {
        "unseen_acc": mean_class_accuracy(predicted, truth, unseen),
        "unseen_acc_instance": instance_accuracy(predicted, truth),
    }
    echo = {"regime": "zsl-transductive", "kernel": _kernel_echo(kernel),
            "hyper": _hyper_echo(hyper), "em": _em_echo(em_cfg)}
    record = SplitRecord(split_id, metrics, em_iterations=result.iterations_run)
    return make_report([record], echo, split.seed)


def _gzsl_train_test_rows(dataset: Dataset, split: Split, seed: int):
    """Seeded per-class 80/20 partition of the seen rows. Returns index
    arrays (train rows, held-out seen test rows)."""
    rng = np.random.Generator(np.random.PCG64(derived_seed(seed, _TAG_GZSL_SPLIT)))
    train_idx, test_idx = [], []
    for c in sorted(split.seen_classes):
        rows = np.flatnonzero(dataset.labels == c)
        perm = rows[rng.permutation(rows.size)]
        n_train = int(math.ceil(0.8 * rows.size))
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def run_gzsl(dataset: Dataset, split: Split, kernel: KernelSpec, hyper: HyperParams,
             synth_count: int = 200, classifier_lambda: float = 1.0, seed: int = 0,
             mode: str = "transductive", em_cfg: EmConfig = EmConfig(),
             split_id: int = 0):
    """Generalized zero-shot recognition.

    Seen data is split 80/20 per class (seeded); unseen Gaussians come from
    the inductive prediction, EM-refined on the unseen test features when
    mode is "transductive". synth_count pseudo-examples per unseen class are
    sampled and a one-vs-rest linear classifier is trained on the seen-train
    portion plus the pseudo data, then scored on seen-test plus all unseen
    rows. Reports per-class seen/unseen accuracies and their harmonic mean.
    """
    if synth_count < 1:
        raise ConfigError("synth_count must be at least 1")
    if mode not in ("inductive", "transductive"):
        raise ConfigError(f"unknown mode: {mode!r}")
    _check_split(dataset, split)
    seen = sorted(split.seen_classes)
    unseen = sorted(split.unseen_classes)
    counts = dataset.class_counts()
    short = [c for c in seen if counts[c] < 5]
    if short:
        raise DataValidationError(
            f"seen classes need at least 5 examples for the 80/20 split: {short}")

    train_rows, seen_test_rows = _gzsl_train_test_rows(dataset, split, seed)
    train_mask = np.zeros(dataset.n_examples, dtype=bool)
    train_mask[train_rows] = True
    _, _, unseen_gaussians = _inductive_parts(dataset, split, kernel, hyper,
                                              train_rows=train_mask)

    unseen_mask = np.isin(dataset.labels, unseen)
    em_iterations = None
    if mode == "transductive":
        result = em_refine(dataset.features[unseen_mask], unseen_gaussians, em_cfg)
        unseen_gaussians = result.gaussians
        em_iterations = result.iterations_run

    pseudo_feats = [sample(g, synth_count, derived_seed(seed, _TAG_SYNTH, c))
                    for c, g in zip(unseen, unseen_gaussians)]
    class_order = seen + unseen
    position = {c: i for i, c in enumerate(class_order)}
    clf_features = np.vstack([dataset.features[train_rows]] + pseudo_feats)
    clf_labels = np.concatenate(
        [np.asarray([position[c] for c in dataset.labels[train_rows]], dtype=np.int64)]
        + [np.full(synth_count, position[c], dtype=np.int64) for c in unseen])
    classifier = train_linear_ovr(clf_features, clf_labels, len(class_order),
                                  classifier_lambda, class_ids=class_order)

    test_rows = np.concatenate([seen_test_rows, np.flatnonzero(unseen_mask)])
    predicted = classifier.predict(dataset.features[test_rows])
    truth = dataset.labels[test_rows]
    seen_acc, unseen_acc = gzsl_accuracies(predicted, truth, seen, unseen)
    seen_pool = np.isin(truth, seen)
    metrics = {
        "seen_acc": seen_acc,
        "unseen_acc": unseen_acc,
        "harmonic_mean": harmonic_mean_gzsl(seen_acc, unseen_acc),
        "seen_acc_instance": instance_accuracy(predicted[seen_pool], truth[seen_pool]),
        "unseen_acc_instance": instance_accuracy(predicted[~seen_pool], truth[~seen_pool]),
    }
    echo = {"regime": "gzsl", "kernel": _kernel_echo(kernel), "hyper": _hyper_echo(hyper),
            "em": _em_echo(em_cfg), "synth_count": synth_count,
            "classifier_lambda": classifier_lambda, "mode": mode}
    record = SplitRecord(split_id, metrics, em_iterations=em_iterations)
    return make_report([record], echo, seed)


def gzsl_accuracies(predicted, truth, seen_classes, unseen_classes) -> tuple[float, float]:
    """Per-class accuracy over the rows whose true class is seen, and over
    the rows whose true class is unseen."""
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    seen_pool = np.isin(t, sorted(seen_classes))
    unseen_pool = np.isin(t, sorted(unseen_classes))
    if not (seen_pool.any() and unseen_pool.any()):
        raise DataValidationError("both seen and unseen test pools must be non-empty")
    seen_acc = mean_class_accuracy(p[seen_pool], t[seen_pool], sorted(seen_classes))
    unseen_acc = mean_class_accuracy(p[unseen_pool], t[unseen_pool], sorted(unseen_classes))
    return seen_acc, unseen_acc


def run_few_shot(dataset: Dataset, split: Split, kernel: KernelSpec, hyper: HyperParams,
                 shots_per_class: int, seed: int, split_id: int = 0):
    """Few-shot refinement: conjugately update each predicted unseen Gaussian
    with a seeded draw of labeled shots, then classify the remaining unseen
    rows. Shots never appear in the evaluation pool."""
    if shots_per_class < 1:
        raise ConfigError("shots_per_class must be at least 1")
    _, _, unseen_gaussians = _inductive_parts(dataset, split, kernel, hyper)
    unseen = sorted(split.unseen_classes)
    counts = dataset.class_counts()
    short = [c for c in unseen if counts[c] < shots_per_class]
    if short:
        raise DataValidationError(
            f"unseen classes with fewer than {shots_per_class} examples: {short}")

    shot_rows = []
    updated = []
    for c, g in zip(unseen, unseen_gaussians):
        rows = np.flatnonzero(dataset.labels == c)
        rng = np.random.Generator(np.random.PCG64(derived_seed(seed, _TAG_SHOTS, c)))
        chosen = rows[rng.permutation(rows.size)[:shots_per_class]]
        shot_rows.append(chosen)
        updated.append(few_shot_update(g, dataset.features[chosen]))

    eval_mask = np.isin(dataset.labels, unseen)
    eval_mask[np.concatenate(shot_rows)] = False
    predicted = zsl_classify(dataset.features[eval_mask], updated, unseen)
    truth = dataset.labels[eval_mask]
    metrics = {
        "unseen_acc": mean_class_accuracy(predicted, truth, unseen),
        "unseen_acc_instance": instance_accuracy(predicted, truth),
    }
    echo = {"regime": "few-shot", "kernel": _kernel_echo(kernel),
            "hyper": _hyper_echo(hyper), "shots_per_class": shots_per_class}
    record = SplitRecord(split_id, metrics)
    return make_report([record], echo, seed)


def cv_partitions(seen_classes, n_trials: int, seed: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Deterministic validation partitions: each trial holds out a quarter
    (rounded up) of the seen classes. Returns (train, validation) pairs."""
    seen = sorted(int(c) for c in seen_classes)
    n_val = math.ceil(len(seen) / 4)
    partitions = []
    for trial in range(n_trials):
        rng = np.random.Generator(np.random.PCG64(derived_seed(seed, _TAG_CV, trial)))
        perm = rng.permutation(len(seen))
        val = tuple(sorted(seen[i] for i in perm[:n_val]))
        train = tuple(sorted(seen[i] for i in perm[n_val:]))
        partitions.append((train, val))
    return partitions


def cross_validate(dataset: Dataset, split: Split, kernel: KernelSpec,
                   grid, n_trials: int, seed: int) -> HyperParams:
    """Pick the grid point with the best mean validation accuracy across
    seeded trials that treat a quarter of the seen classes as pseudo-unseen.
    Ties resolve to the earliest grid entry."""
    grid = list(grid)
    if not grid:
        raise ConfigError("hyperparameter grid must be non-empty")
    if len(split.seen_classes) < 4:
        raise ConfigError("cross-validation needs at least 4 seen classes")
    _check_split(dataset, split)
    batch = LabeledBatch(dataset.features, dataset.labels, dataset.n_classes)
    scores = np.zeros(len(grid))
    for train, val in cv_partitions(split.seen_classes, n_trials, seed):
        train_gaussians = _fit_class_gaussians(batch, train)
        val_mask = np.isin(dataset.labels, val)
        val_features = dataset.features[val_mask]
        val_truth = dataset.labels[val_mask]
        for gi, hyper in enumerate(grid):
            param_map = fit_param_map(train_gaussians, dataset.attributes[list(train)],
                                      kernel, hyper)
            val_gaussians = predict_unseen(param_map, dataset.attributes[list(val)])
            predicted = zsl_classify(val_features, val_gaussians, val)
            scores[gi] += mean_class_accuracy(predicted, val_truth, val)
    return grid[int(np.argmax(scores))]
