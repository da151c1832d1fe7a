"""Fitness evaluation: the evaluator contract, a deterministic surrogate and the dense trainer.

Fitness is validation accuracy in ``[0, 1]``. Networks that cannot be built
or trained score exactly 0 with ``valid=False``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np

from .datasets import DatasetSplit
from .errors import ArityMismatch, MissingAttr, NumericalFailure
from .mlp import ACTIVATIONS, DenseNetwork
from .phenotype import NetworkDescriptor, apply_output_override, check_shapes

__all__ = [
    "EvaluationBudget",
    "FitnessReport",
    "FitnessEvaluator",
    "SurrogateEvaluator",
    "DenseEvaluator",
    "surrogate_evaluate",
    "build_dense",
    "fit_dense",
    "train_dense",
    "accuracy",
    "test_accuracy",
    "ensemble_proba",
    "ensemble_predict",
]


@dataclass(frozen=True)
class EvaluationBudget:
    epochs: int = 10
    batch_size: int = 125
    learning_rate: float = 0.01
    momentum: float = 0.9
    eval_seed: int = 0
    best_epoch: bool = True  # best validation accuracy over epochs vs. last epoch

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    to_dict = asdict


@dataclass(frozen=True)
class FitnessReport:
    fitness: float
    valid: bool
    train_accuracy: Optional[float] = None
    reason: Optional[str] = None
    elapsed: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.valid and self.fitness != 0:
            raise ValueError("invalid networks must have fitness 0")

    @classmethod
    def invalid(cls, reason: str, elapsed: float = 0.0) -> "FitnessReport":
        return cls(0.0, False, None, reason, elapsed)

    def to_dict(self) -> dict:
        return asdict(self)


class FitnessEvaluator(Protocol):
    def evaluate(self, nd: NetworkDescriptor, budget: EvaluationBudget) -> FitnessReport: ...


# --- surrogate --------------------------------------------------------------


def _attr_score(candidate: Optional[str], target: str) -> float:
    if candidate is None:
        return 0.0
    if candidate == target:
        return 1.0
    try:
        a, b = float(candidate), float(target)
    except ValueError:
        return 0.0
    scale = max(abs(a), abs(b))
    return max(0.0, 1.0 - abs(a - b) / scale) if scale > 0 else 1.0


def surrogate_evaluate(nd: NetworkDescriptor, target: NetworkDescriptor) -> FitnessReport:
    """Similarity to ``target``: ``exp(-|n - n*| / n*)`` times the attribute match on shared positions.

    Strings match exactly; numbers earn partial credit
    ``1 - |a - b| / max(|a|, |b|)`` so the score has a gradient to climb.
    """
    n, n_star = len(nd.layers), len(target.layers)
    if n_star == 0:
        raise ValueError("target has no layers")
    length_term = math.exp(-abs(n - n_star) / n_star)
    score = total = 0.0
    for cand, want in zip(nd.layers, target.layers):
        for key, value in want.attrs:
            score += _attr_score(cand.get(key), value)
            total += 1
    match = score / total if total else 0.0
    return FitnessReport(length_term * match, True, None, None)


@dataclass(frozen=True)
class SurrogateEvaluator:
    target: NetworkDescriptor

    def evaluate(self, nd: NetworkDescriptor, budget: Optional[EvaluationBudget] = None) -> FitnessReport:
        return surrogate_evaluate(nd, self.target)


# --- dense trainer ----------------------------------------------------------


def build_dense(nd: NetworkDescriptor, n_features: int, n_classes: int, rng: np.random.Generator) -> DenseNetwork:
    """Instantiate ``nd`` as a :class:`DenseNetwork`; raises ``ValueError`` if it is not dense-only."""
    kinds = [layer.kind for layer in nd.layers]
    if not kinds or any(k != "fc" for k in kinds):
        raise ValueError(f"unsupported-layer: dense trainer only runs fc layers, got {kinds}")
    sizes, acts, bias = [n_features], [], []
    for i, layer in enumerate(nd.layers):
        act = layer.get("act", "linear")
        last = i == len(nd.layers) - 1
        if last != (act == "softmax"):
            raise ValueError("unsupported-activation: softmax must be the final layer's activation only")
        if not last and act not in ACTIVATIONS:
            raise ValueError(f"unsupported-activation: {act}")
        units = int(layer.require("num-units", i))
        sizes.append(n_classes if last else units)
        bias.append(layer.get("bias", "True") == "True")
        if not last:
            acts.append(act)
    return DenseNetwork(sizes, acts, bias, rng)


def accuracy(proba: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    return float(np.mean(np.argmax(proba, axis=1) == labels))


def _training_settings(nd: NetworkDescriptor, budget: EvaluationBudget) -> tuple[float, float, int]:
    learning = dict(nd.learning)
    lr = float(learning.get("lr", budget.learning_rate))
    momentum = float(learning.get("momentum", budget.momentum))
    batch = int(learning.get("batch-size", budget.batch_size))
    return lr, momentum, batch


def fit_dense(
    nd: NetworkDescriptor, split: DatasetSplit, budget: EvaluationBudget
) -> tuple[Optional[DenseNetwork], FitnessReport]:
    """Train ``nd`` on ``split.train`` and score it on ``split.val``.

    Returns the model at its best validation epoch (or the last epoch when
    ``budget.best_epoch`` is false) together with the report.
    """
    t0 = time.perf_counter()
    if nd.layers and nd.layers[-1].kind == "fc":
        try:
            if int(nd.layers[-1].get("num-units", -1)) != split.n_classes:
                nd = apply_output_override(nd, split.n_classes)
        except ValueError:
            pass
    try:
        shapes = check_shapes(nd, (1, 1, split.n_features))
    except MissingAttr as exc:
        return None, FitnessReport.invalid(f"missing-attr: {exc}", time.perf_counter() - t0)
    if not shapes.valid:
        return None, FitnessReport.invalid(f"shape: {shapes.failure}", time.perf_counter() - t0)
    init_rng = np.random.default_rng(np.random.SeedSequence([budget.eval_seed, 0]))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([budget.eval_seed, 1]))
    try:
        model = build_dense(nd, split.n_features, split.n_classes, init_rng)
    except (ValueError, MissingAttr) as exc:
        reason = str(exc).split(":", 1)[0] if ":" in str(exc) else "unsupported-layer"
        return None, FitnessReport.invalid(reason, time.perf_counter() - t0)
    lr, momentum, batch = _training_settings(nd, budget)
    if batch > len(split.y_train):
        batch = len(split.y_train)
    velocity = [np.zeros_like(p) for p in model.parameters()]
    best_model, best_val, best_train = None, -1.0, None
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(budget.epochs):
                order = shuffle_rng.permutation(len(split.y_train))
                for start in range(0, len(order), batch):
                    idx = order[start:start + batch]
                    loss, grads = model.loss_and_grads(split.x_train[idx], split.y_train[idx])
                    if not math.isfinite(loss):
                        raise NumericalFailure("non-finite loss")
                    model.sgd_step(grads, velocity, lr, momentum)
                val = accuracy(model.predict_proba(split.x_val), split.y_val)
                if not budget.best_epoch or val > best_val:
                    best_val, best_model = val, model.copy()
                    best_train = accuracy(model.predict_proba(split.x_train), split.y_train)
    except NumericalFailure as exc:
        return None, FitnessReport.invalid(f"numerical-failure: {exc}", time.perf_counter() - t0)
    return best_model, FitnessReport(best_val, True, best_train, None, time.perf_counter() - t0)


def train_dense(nd: NetworkDescriptor, split: DatasetSplit, budget: EvaluationBudget) -> FitnessReport:
    return fit_dense(nd, split, budget)[1]


@dataclass(frozen=True, eq=False)
class DenseEvaluator:
    split: DatasetSplit

    def evaluate(self, nd: NetworkDescriptor, budget: EvaluationBudget) -> FitnessReport:
        return train_dense(nd, self.split, budget)


def test_accuracy(model: DenseNetwork, split: DatasetSplit) -> float:
    return accuracy(model.predict_proba(split.x_test), split.y_test)


test_accuracy.__test__ = False  # keep pytest from collecting it


def ensemble_proba(models: Sequence[DenseNetwork], inputs: np.ndarray) -> np.ndarray:
    """Mean of the members' softmax outputs; summed in sorted order so model order cannot matter."""
    if not models:
        raise ArityMismatch("ensemble needs at least one model")
    arity = {m.n_outputs for m in models}
    if len(arity) != 1:
        raise ArityMismatch(f"members disagree on output size: {sorted(arity)}")
    stacked = np.stack([m.predict_proba(inputs) for m in models])
    return np.sort(stacked, axis=0).sum(axis=0) / len(models)


def ensemble_predict(models: Sequence[DenseNetwork], inputs: np.ndarray) -> np.ndarray:
    return np.argmax(ensemble_proba(models, inputs), axis=1)


def with_seed(budget: EvaluationBudget, seed: int) -> EvaluationBudget:
    return replace(budget, eval_seed=seed)
