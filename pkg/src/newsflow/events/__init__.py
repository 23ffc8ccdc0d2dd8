"""Business-event detection: one independent binary classifier per category."""
import json
from collections import Counter
from pathlib import Path
from typing import Dict, List, Tuple

from .bootstrap import (BooleanQuery, EmbeddingTable, Expansion, boolean_retrieve, expand_seeds,
                        load_word2vec_text, sample_training_pool)
from .cv import CVReport, FoldResult, LabeledDoc, cross_validate, stratified_folds
from ..textutil import tokenize
from .features import CSRMatrix, FeatureVector, Vocabulary, featurize, featurize_counts
from .logreg import (LogRegModel, TrainingError, fit_text_model, loss_and_grad, predict,
                     predict_text, sigmoid, train_logreg)

CATEGORIES = (
    "layoffs", "strikes", "shutdowns", "material_damages", "financial_losses", "frauds",
    "legal_issues", "mergers_acquisitions", "product_launches", "management_changes",
)


def check_category(name: str) -> str:
    if name not in CATEGORIES:
        raise ValueError(f"unknown event category {name!r}; expected one of {', '.join(CATEGORIES)}")
    return name


def load_labeled(path) -> List[LabeledDoc]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(LabeledDoc(str(rec["doc_id"]), str(rec["text"]), bool(rec["label"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad labeled record: {exc}") from exc
    return docs


class EventClassifier:
    """A bundle of per-category models; a document may get several labels."""

    def __init__(self, models: Dict[str, LogRegModel]):
        self.models = dict(models)

    def classify(self, text: str) -> List[Tuple[str, float]]:
        counts = Counter(tokenize(text))  # tokenized once, featurized per model vocabulary
        out = []
        for cat in sorted(self.models):
            model = self.models[cat]
            p, label = predict(model, featurize_counts(counts, model.vocabulary))
            if label:
                out.append((cat, p))
        return out

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for cat, model in self.models.items():
            model.save(directory / f"{cat}.json")

    @classmethod
    def load(cls, directory, thresholds=None) -> "EventClassifier":
        models = {}
        for path in sorted(Path(directory).glob("*.json")):
            if path.stem in CATEGORIES:
                model = LogRegModel.load(path)
                if thresholds and path.stem in thresholds:
                    model.decision_threshold = float(thresholds[path.stem])
                models[path.stem] = model
        return cls(models)


__all__ = [
    "BooleanQuery", "CATEGORIES", "CSRMatrix", "CVReport", "EmbeddingTable", "EventClassifier",
    "Expansion", "FeatureVector", "FoldResult", "LabeledDoc", "LogRegModel", "TrainingError",
    "Vocabulary", "boolean_retrieve", "check_category", "cross_validate", "expand_seeds",
    "featurize", "featurize_counts", "fit_text_model", "load_labeled", "load_word2vec_text", "loss_and_grad",
    "predict", "predict_text", "sample_training_pool", "sigmoid", "stratified_folds",
    "train_logreg",
]
