"""Binary logistic regression trained by deterministic full-batch gradient descent."""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import kernels
from .features import CSRMatrix, FeatureVector, Vocabulary, featurize

MODEL_FORMAT = "newsflow-logreg/1"


class TrainingError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(X: CSRMatrix, y, w, b, l2):
    """Mean log-loss plus (l2/2)||w||^2, with gradients for w and b."""
    y = np.asarray(y, dtype=np.float64)
    n = X.n_rows
    z = kernels.csr_matvec(X.indptr, X.indices, X.data, w) + b
    # log(1 + e^{-z}) for positives, log(1 + e^{z}) for negatives
    loss = np.mean(np.logaddexp(0.0, np.where(y > 0.5, -z, z))) + 0.5 * l2 * np.dot(w, w)
    residual = (sigmoid(z) - y) / n
    gw = kernels.csr_rmatvec(X.indptr, X.indices, X.data, residual, X.n_features) + l2 * w
    gb = float(residual.sum())
    return float(loss), gw, gb


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    l2: float
    decision_threshold: float = 0.5
    vocabulary: Optional[Vocabulary] = None
    category: str = ""
    history: list = field(default_factory=list, repr=False, compare=False)

    def margin(self, x: FeatureVector) -> float:
        return x.dot(self.weights) + self.bias

    def to_json(self) -> dict:
        vocab = self.vocabulary
        return {
            "format": MODEL_FORMAT,
            "category": self.category,
            "bias": self.bias,
            "l2": self.l2,
            "decision_threshold": self.decision_threshold,
            "weights": self.weights.tolist(),
            "vocabulary": None if vocab is None else sorted(vocab.terms, key=vocab.terms.get),
            "idf": None if vocab is None else vocab.idf.tolist(),
            "stopwords": None if vocab is None else sorted(vocab.stopwords),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LogRegModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        vocab = None
        if doc.get("vocabulary") is not None:
            vocab = Vocabulary({t: i for i, t in enumerate(doc["vocabulary"])},
                               np.array(doc["idf"], dtype=np.float64),
                               frozenset(doc.get("stopwords") or ()))
        return cls(np.array(doc["weights"], dtype=np.float64), float(doc["bias"]),
                   float(doc["l2"]), float(doc["decision_threshold"]), vocab, doc["category"])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "LogRegModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train_logreg(X: CSRMatrix, y, l2: float = 1e-4, epochs: int = 200,
                 learning_rate: float = 0.5, seed: int = 0, init_scale: float = 0.0,
                 accelerated: bool = True, record_loss: bool = False) -> LogRegModel:
    """Full-batch gradient descent on the regularised mean log-loss.

    With ``accelerated`` (the default) each epoch takes a Nesterov momentum
    step and falls back to a plain gradient step from the current iterate
    whenever the momentum step would raise the loss, so the loss sequence
    never increases while convergence on sparse text features is far
    faster. ``seed`` only drives the optional random initialisation.
    """
    y = np.asarray(y, dtype=np.float64)
    if X.n_rows == 0:
        raise TrainingError("no training data")
    if y.min() == y.max():
        raise TrainingError("training data holds a single class")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, init_scale, X.n_features) if init_scale > 0 else np.zeros(X.n_features)
    b = float(rng.normal(0.0, init_scale)) if init_scale > 0 else 0.0
    loss = loss_and_grad(X, y, w, b, l2)[0]
    history = [loss] if record_loss else []
    vw, vb, t = w, b, 1.0
    for _ in range(epochs):
        if accelerated:
            _, gw, gb = loss_and_grad(X, y, vw, vb, l2)
            nw, nb = vw - learning_rate * gw, vb - learning_rate * gb
            new_loss = loss_and_grad(X, y, nw, nb, l2)[0]
            if new_loss > loss:
                t = 1.0
                _, gw, gb = loss_and_grad(X, y, w, b, l2)
                nw, nb = w - learning_rate * gw, b - learning_rate * gb
                new_loss = loss_and_grad(X, y, nw, nb, l2)[0]
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            mom = (t - 1.0) / t_next
            vw, vb = nw + mom * (nw - w), nb + mom * (nb - b)
            w, b, loss, t = nw, nb, new_loss, t_next
        else:
            _, gw, gb = loss_and_grad(X, y, w, b, l2)
            w, b = w - learning_rate * gw, b - learning_rate * gb
            if record_loss:
                loss = loss_and_grad(X, y, w, b, l2)[0]
        if record_loss:
            history.append(loss)
    return LogRegModel(w, b, l2, history=history)


def predict(model: LogRegModel, x: FeatureVector):
    p = float(sigmoid(np.array([model.margin(x)]))[0])
    return p, p >= model.decision_threshold


def predict_text(model: LogRegModel, text: str):
    return predict(model, featurize(text, model.vocabulary))


def fit_text_model(texts, labels, category="", l2=1e-4, epochs=200, learning_rate=0.5, seed=0,
                   stopwords=None, decision_threshold=0.5, accelerated=True) -> LogRegModel:
    """Fit vocabulary and classifier on raw texts."""
    kwargs = {} if stopwords is None else {"stopwords": stopwords}
    vocab = Vocabulary.fit(texts, **kwargs)
    X = CSRMatrix.from_vectors([featurize(t, vocab) for t in texts], len(vocab))
    model = train_logreg(X, labels, l2=l2, epochs=epochs, learning_rate=learning_rate, seed=seed,
                         accelerated=accelerated)
    model.vocabulary = vocab
    model.category = category
    model.decision_threshold = decision_threshold
    return model
