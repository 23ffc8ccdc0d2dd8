import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsflow import kernels
from newsflow.events import (BooleanQuery, CSRMatrix, EmbeddingTable, EventClassifier,
                             FeatureVector, LabeledDoc, LogRegModel, TrainingError, Vocabulary,
                             boolean_retrieve, cross_validate, expand_seeds, featurize,
                             fit_text_model, load_word2vec_text, loss_and_grad, predict,
                             predict_text, sample_training_pool, stratified_folds, train_logreg)

from oracles import finite_difference_check

# -- featurize ---------------------------------------------------------------


def small_vocab():
    return Vocabulary({"crisi": 0, "fusione": 1, "banca": 2, "utile": 3, "sciopero": 4},
                      np.array([1.0, 2.0, 1.5, 3.0, 0.5]))


def test_featurize_single_term():
    fv = featurize("crisi", small_vocab())
    assert fv.as_dict() == {0: 1.0}


def test_featurize_empty():
    assert featurize("", small_vocab()).indices.size == 0
    assert featurize("parole sconosciute", small_vocab()).indices.size == 0


def test_featurize_hand_computed():
    fv = featurize("Banca, banca e fusione: sciopero!", small_vocab())
    # tf*idf: banca 2*1.5=3, fusione 1*2=2, sciopero 1*0.5=0.5
    norm = math.sqrt(9 + 4 + 0.25)
    expected = {1: 2 / norm, 2: 3 / norm, 4: 0.5 / norm}
    got = fv.as_dict()
    assert got.keys() == expected.keys()
    for k in expected:
        assert abs(got[k] - expected[k]) <= 1e-12
    assert abs(fv.norm - 1) <= 1e-12


def test_vocabulary_fit_drops_stopwords_and_sets_idf():
    v = Vocabulary.fit(["la banca cresce", "la banca crolla", "sciopero"])
    assert "la" not in v.terms
    assert list(v.terms) == sorted(v.terms)
    assert v.idf[v.terms["banca"]] == pytest.approx(math.log(4 / 3) + 1)
    assert v.idf[v.terms["sciopero"]] == pytest.approx(math.log(4 / 2) + 1)


# -- logistic regression -------------------------------------------------------

def test_separable_pair():
    X = CSRMatrix.from_dense([[1.0, 0.0], [0.0, 1.0]])
    m = train_logreg(X, [1, 0], l2=0.0, epochs=100, learning_rate=0.5)
    assert predict(m, FeatureVector(np.array([0]), np.array([1.0])))[1] is True
    assert predict(m, FeatureVector(np.array([1]), np.array([1.0])))[1] is False


def test_label_flip_negates_weights():
    rng = np.random.default_rng(0)
    X = CSRMatrix.from_dense(rng.random((30, 6)) * (rng.random((30, 6)) < 0.5))
    y = (rng.random(30) < 0.4).astype(float)
    y[:2] = [0, 1]
    for accelerated in (True, False):
        a = train_logreg(X, y, l2=1e-3, epochs=150, accelerated=accelerated)
        b = train_logreg(X, 1 - y, l2=1e-3, epochs=150, accelerated=accelerated)
        assert np.max(np.abs(a.weights + b.weights)) <= 1e-9
        assert abs(a.bias + b.bias) <= 1e-9


def test_gradient_matches_finite_differences():
    errs = [finite_difference_check(s) for s in range(20)]
    assert max(errs) <= 1e-5


def test_loss_matches_dense_formula():
    rng = np.random.default_rng(4)
    dense = rng.normal(size=(10, 5))
    y = np.array([0, 1] * 5, dtype=float)
    w, b, l2 = rng.normal(size=5), 0.3, 0.05
    z = dense @ w + b
    p = 1 / (1 + np.exp(-z))
    expected = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)) + 0.5 * l2 * w @ w
    loss, gw, gb = loss_and_grad(CSRMatrix.from_dense(dense), y, w, b, l2)
    assert loss == pytest.approx(expected, rel=1e-12)
    assert np.allclose(gw, dense.T @ (p - y) / 10 + l2 * w, rtol=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_sparse_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    dense = rng.normal(size=(rng.integers(1, 12), 7)) * (rng.random((1, 7)) < 0.7)
    X = CSRMatrix.from_dense(dense)
    w = rng.normal(size=7)
    v = rng.normal(size=X.n_rows)
    a = kernels.csr_matvec_jit(X.indptr, X.indices, X.data, w)
    b = kernels.csr_matvec_numpy(X.indptr, X.indices, X.data, w)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    assert np.allclose(a, dense @ w)
    c = kernels.csr_rmatvec_jit(X.indptr, X.indices, X.data, v, 7)
    d = kernels.csr_rmatvec_numpy(X.indptr, X.indices, X.data, v, 7)
    assert np.allclose(c, d, rtol=1e-13, atol=1e-13)
    assert np.allclose(c, dense.T @ v)


def test_training_is_bit_reproducible():
    rng = np.random.default_rng(8)
    X = CSRMatrix.from_dense(rng.random((40, 10)))
    y = (rng.random(40) < 0.5).astype(float)
    a = train_logreg(X, y, seed=3, init_scale=0.1)
    b = train_logreg(X, y, seed=3, init_scale=0.1)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias


def test_single_class_rejected():
    X = CSRMatrix.from_dense([[1.0], [0.5]])
    with pytest.raises(TrainingError):
        train_logreg(X, [1, 1])


def test_loss_non_increasing():
    rng = np.random.default_rng(2)
    X = CSRMatrix.from_dense(rng.random((50, 12)) * (rng.random((50, 12)) < 0.4))
    y = (rng.random(50) < 0.3).astype(float)
    y[:2] = [0, 1]
    for accelerated in (True, False):
        m = train_logreg(X, y, l2=0.0, learning_rate=0.1, epochs=300, record_loss=True,
                         accelerated=accelerated)
        h = np.array(m.history)
        assert len(h) == 301
        assert np.all(np.diff(h) <= 0)


def test_unique_optimum_with_l2():
    rng = np.random.default_rng(6)
    X = CSRMatrix.from_dense(rng.random((30, 5)))
    y = (rng.random(30) < 0.5).astype(float)
    y[:2] = [0, 1]
    a = train_logreg(X, y, l2=0.1, epochs=500, learning_rate=1.0, seed=1, init_scale=1.0)
    b = train_logreg(X, y, l2=0.1, epochs=500, learning_rate=1.0, seed=2, init_scale=1.0)
    assert np.max(np.abs(a.weights - b.weights)) <= 1e-4
    assert abs(a.bias - b.bias) <= 1e-4


def test_predict_values():
    m = LogRegModel(np.zeros(3), 0.0, 0.0)
    assert predict(m, FeatureVector(np.array([1]), np.array([1.0]))) == (0.5, True)
    m = LogRegModel(np.array([0.5, -1.0, 2.0]), 0.25, 0.0)
    x = FeatureVector(np.array([0, 2]), np.array([0.6, 0.8]))
    z = 0.5 * 0.6 + 2.0 * 0.8 + 0.25
    assert abs(predict(m, x)[0] - 1 / (1 + math.exp(-z))) <= 1e-12


def test_probability_strictly_increasing_in_margin():
    probs = []
    for b in np.linspace(-30, 30, 601):
        probs.append(predict(LogRegModel(np.zeros(1), float(b), 0.0),
                             FeatureVector(np.zeros(0, dtype=np.int64), np.zeros(0)))[0])
    assert np.all(np.diff(probs) > 0)
    assert all(0 < p < 1 for p in probs)


def test_model_roundtrip(tmp_path):
    texts = ["licenziamenti e esuberi alla fabbrica", "nuovo prodotto lanciato",
             "esuberi annunciati", "utile in crescita"]
    m = fit_text_model(texts, [1, 0, 1, 0], category="layoffs", epochs=50)
    m.save(tmp_path / "layoffs.json")
    m2 = LogRegModel.load(tmp_path / "layoffs.json")
    for t in texts + ["testo qualunque con esuberi"]:
        assert predict_text(m, t) == predict_text(m2, t)
    clf = EventClassifier.load(tmp_path, thresholds={"layoffs": 0.0})
    assert clf.classify("qualcosa")[0][0] == "layoffs"


# -- cross validation ---------------------------------------------------------

def separable_docs(n, seed, label_rate=0.3):
    rng = random.Random(seed)
    filler = [f"parola{i}" for i in range(100)]
    docs = []
    for i in range(n):
        label = rng.random() < label_rate
        words = rng.choices(filler, k=40)
        if label:
            words += ["esuberi", "licenziamenti", "tagli"]
        docs.append(LabeledDoc(f"d{i}", " ".join(words), label))
    return docs


def test_cv_separable_perfect():
    rep = cross_validate(separable_docs(300, 1), folds=3, seed=5)
    assert rep.precision == 1.0 and rep.recall == 1.0


def test_cv_reproducible_and_stratified():
    docs = separable_docs(300, 2)
    a = cross_validate(docs, seed=9)
    b = cross_validate(docs, seed=9)
    assert a.assignment == b.assignment and a == b
    labels = np.array([d.label for d in docs])
    rate = labels.mean()
    fold = np.array(a.assignment)
    for k in range(3):
        assert abs(labels[fold == k].mean() - rate) <= 0.02


def test_cv_metrics_recomputed_from_counts():
    rep = cross_validate(separable_docs(150, 3), seed=1, epochs=20)
    ps, rs = [], []
    for f in rep.folds:
        ps.append(f.tp / (f.tp + f.fp) if f.tp + f.fp else 0.0)
        rs.append(f.tp / (f.tp + f.fn) if f.tp + f.fn else 0.0)
    assert rep.precision == np.mean(ps) and rep.recall == np.mean(rs)
    assert sum(f.tp + f.fp + f.fn + f.tn for f in rep.folds) == 150


def test_cv_shuffled_labels_precision_near_base_rate():
    # balanced, so a chance-level model still predicts positives at threshold 0.5
    docs = separable_docs(600, 4, label_rate=0.5)
    rng = random.Random(0)
    labels = [d.label for d in docs]
    rng.shuffle(labels)
    docs = [LabeledDoc(d.doc_id, d.text, lab) for d, lab in zip(docs, labels)]
    rate = np.mean(labels)
    precisions = []
    for seed in range(5):
        rep = cross_validate(docs, seed=seed)
        precisions.append(rep.precision)
    assert abs(np.mean(precisions) - rate) <= 0.1


def test_cv_needs_both_classes():
    docs = [LabeledDoc(str(i), "x", i < 2) for i in range(10)]
    with pytest.raises(ValueError):
        cross_validate(docs, folds=3)


def test_stratified_folds_partition():
    f = stratified_folds([True] * 10 + [False] * 20, 3, 0)
    assert sorted(np.bincount(f)) == [10, 10, 10]


# -- bootstrap -----------------------------------------------------------------

def test_expand_identical_vectors():
    t = EmbeddingTable.from_dict({"layoff": [1, 2, 3], "dismissal": [1, 2, 3], "cake": [-1, 0, 0]})
    exp = expand_seeds(["layoff"], t, 1)
    assert exp.neighbours["layoff"] == [("dismissal", pytest.approx(1.0))]


def test_expand_orthogonal():
    t = EmbeddingTable.from_dict({"a": [1, 0], "b": [0, 1]})
    assert expand_seeds(["a"], t, 5).neighbours["a"] == [("b", 0.0)]


def test_expand_matches_pairwise_oracle():
    table = {"crisi": [0.9, 0.1, 0.0], "recessione": [0.8, 0.3, 0.1], "calo": [0.7, 0.0, 0.5],
             "festa": [-0.5, 0.9, 0.0], "sciopero": [0.2, 0.2, 0.9]}
    t = EmbeddingTable.from_dict(table)
    for seed in table:
        oracle = []
        for w, v in table.items():
            if w == seed:
                continue
            a, b = np.array(table[seed]), np.array(v)
            oracle.append((w, float(a @ b / np.linalg.norm(a) / np.linalg.norm(b))))
        oracle.sort(key=lambda p: (-p[1], p[0]))
        got = expand_seeds([seed], t, 4).neighbours[seed]
        assert [w for w, _ in got] == [w for w, _ in oracle]
        assert np.allclose([c for _, c in got], [c for _, c in oracle])


def test_expand_reports_missing_and_empty():
    t = EmbeddingTable.from_dict({"a": [1, 0]})
    assert expand_seeds(["zzz"], t).missing == ("zzz",)
    with pytest.raises(ValueError):
        expand_seeds(["a"], EmbeddingTable((), np.zeros((0, 2))))


@given(st.floats(0.001, 1000))
@settings(max_examples=50, deadline=None)
def test_expand_scale_invariant(scale):
    rng = np.random.default_rng(1)
    words = [f"w{i}" for i in range(12)]
    vecs = rng.normal(size=(12, 4))
    t = EmbeddingTable(tuple(words), vecs)
    ts = EmbeddingTable(tuple(words), vecs * scale)
    a = expand_seeds(words[:3], t, 5).neighbours
    b = expand_seeds(words[:3], ts, 5).neighbours
    assert {k: [w for w, _ in v] for k, v in a.items()} == {k: [w for w, _ in v] for k, v in b.items()}


def test_word2vec_text_loader(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text("2 3\nLicenziamento 0.1 0.2 0.3\nesubero 0.1 0.2 0.31\n")
    t = load_word2vec_text(p)
    assert t.words == ("licenziamento", "esubero") and t.dim == 3


def test_boolean_retrieve_basic():
    corpus = {"1": "Layoff at the plant", "2": "no news", "3": "another layoff today"}
    assert boolean_retrieve(BooleanQuery.parse("layoff"), corpus) == {"1", "3"}
    assert boolean_retrieve(BooleanQuery.parse("plant AND today"), corpus) == set()
    assert boolean_retrieve(BooleanQuery.parse("plant today\nno"), corpus) == {"2"}
    assert boolean_retrieve(BooleanQuery.parse("(plant) OR (news)"), corpus) == {"1", "2"}


def test_boolean_retrieve_matches_scan():
    rng = random.Random(7)
    vocab = [f"t{i}" for i in range(30)]
    corpus = {f"d{i}": " ".join(rng.choices(vocab, k=rng.randint(1, 15))) for i in range(100)}
    for _ in range(30):
        groups = tuple(tuple(rng.sample(vocab, rng.randint(1, 3))) for _ in range(rng.randint(1, 3)))
        q = BooleanQuery(groups)
        scan = {d for d, text in corpus.items()
                if any(all(t in text.split() for t in g) for g in groups)}
        assert boolean_retrieve(q, corpus) == scan


def test_boolean_query_validation():
    with pytest.raises(ValueError):
        BooleanQuery.parse("  \n")


def test_sample_pool():
    matches = {f"d{i:03d}" for i in range(100)}
    assert sample_training_pool({"b", "a"}, 5, 0) == ["a", "b"]
    s = sample_training_pool(matches, 10, 42)
    assert s == sample_training_pool(matches, 10, 42)
    ref = sorted(matches)
    random.Random(42).shuffle(ref)
    assert s == sorted(ref[:10])
