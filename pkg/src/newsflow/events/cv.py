"""Stratified k-fold cross validation of per-category classifiers."""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .. import kernels
from .features import CSRMatrix, Vocabulary, featurize
from .logreg import sigmoid, train_logreg


@dataclass(frozen=True)
class LabeledDoc:
    doc_id: str
    text: str
    label: bool


@dataclass(frozen=True)
class FoldResult:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class CVReport:
    category: str
    seed: int
    folds: Tuple[FoldResult, ...]
    assignment: Tuple[int, ...]

    @property
    def precision(self):
        return float(np.mean([f.precision for f in self.folds]))

    @property
    def recall(self):
        return float(np.mean([f.recall for f in self.folds]))

    @property
    def f1(self):
        return float(np.mean([f.f1 for f in self.folds]))

    def to_json(self):
        return {
            "category": self.category,
            "seed": self.seed,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "folds": [{"tp": f.tp, "fp": f.fp, "fn": f.fn, "tn": f.tn, "precision": f.precision,
                       "recall": f.recall, "f1": f.f1} for f in self.folds],
        }


def stratified_folds(labels: Sequence[bool], k: int, seed: int) -> np.ndarray:
    """Fold number per document; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels, dtype=bool)
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        fold[idx] = (np.arange(idx.size) + offset) % k
        # continue the deal where the previous class stopped to balance fold sizes
        offset = (offset + idx.size) % k
    return fold


def cross_validate(docs: Sequence[LabeledDoc], folds: int = 3, seed: int = 0,
                   category: str = "", l2: float = 1e-4, epochs: int = 200,
                   learning_rate: float = 0.5, stopwords=None,
                   accelerated: bool = True) -> CVReport:
    labels = np.array([d.label for d in docs], dtype=bool)
    if folds < 2:
        raise ValueError("need at least two folds")
    if labels.sum() < folds or (~labels).sum() < folds:
        raise ValueError(f"need at least {folds} positive and {folds} negative documents")
    assignment = stratified_folds(labels, folds, seed)
    vocab_kwargs = {} if stopwords is None else {"stopwords": stopwords}
    results: List[FoldResult] = []
    for k in range(folds):
        train = np.flatnonzero(assignment != k)
        test = np.flatnonzero(assignment == k)
        vocab = Vocabulary.fit((docs[i].text for i in train), **vocab_kwargs)
        X = CSRMatrix.from_vectors([featurize(docs[i].text, vocab) for i in train], len(vocab))
        model = train_logreg(X, labels[train], l2=l2, epochs=epochs,
                             learning_rate=learning_rate, seed=seed, accelerated=accelerated)
        Xt = CSRMatrix.from_vectors([featurize(docs[i].text, vocab) for i in test], len(vocab))
        z = kernels.csr_matvec(Xt.indptr, Xt.indices, Xt.data, model.weights) + model.bias
        pred = sigmoid(z) >= model.decision_threshold
        gold = labels[test]
        results.append(FoldResult(int(np.sum(pred & gold)), int(np.sum(pred & ~gold)),
                                  int(np.sum(~pred & gold)), int(np.sum(~pred & ~gold))))
    return CVReport(category, seed, tuple(results), tuple(int(a) for a in assignment))
