import os
import struct

import numpy as np
import pytest

from faultrank.dataset import RankerExample
from faultrank.features import FeatureConfig, featurize
from faultrank.harness import Candidate, Task, TestFormat
from faultrank.ranker import (
    CorruptFile,
    DegenerateDataset,
    LabelMismatch,
    MissingLogprob,
    RankerModel,
    TrainConfig,
    VersionMismatch,
    _class_loss_grad,
    _line_loss_grad,
    load_model,
    models_equal,
    predict,
    predict_proba,
    rank,
    rank_by_logprob,
    save_model,
    score,
    train,
)
from faultrank.taxonomy import FaultLabelSet
from helpers import random_class_instance, random_line_instance

SMALL_FEATURES = FeatureConfig(dim=2 ** 12, max_tokens=64, ngram_order=2)


def labeled(task_id, cand_id, code, correct, prompt="sum the numbers"):
    labels = FaultLabelSet.correct() if correct else \
        FaultLabelSet("Wrong", "IntentError", "Misc", "IntentError", 0)
    return RankerExample(task_id, cand_id, prompt, code, labels)


def separable_fixture():
    # 4 tasks x (1 correct with goodtok, 1 wrong with badtok): a separating
    # hyperplane exists on the disjoint marker features
    examples = []
    for t in range(4):
        examples.append(labeled(f"t{t}", "a", "return goodtok_value(xs)", True))
        examples.append(labeled(f"t{t}", "b", "return badtok_value(xs)", False))
    return examples


def test_separable_binary_fixture_loss_decreases_to_perfect_fit():
    examples = separable_fixture()
    config = TrainConfig(epochs=30, batch_size=8, lr=0.1, seed=0,
                         features=SMALL_FEATURES)
    model = train(examples, examples, "binary", config)
    losses = [h["train_loss"] for h in model.meta["history"]]
    assert len(losses) == 30
    deltas = [b - a for a, b in zip(losses, losses[1:])]
    assert all(d < 0 for d in deltas[:15]), "loss must strictly decrease"
    hits = sum(
        predict(model, ex.prompt, ex.code)["predicted_class"] == ex.labels.binary
        for ex in examples
    )
    assert hits == len(examples)


def test_train_deterministic_bit_identical(tmp_path):
    examples = separable_fixture()
    config = TrainConfig(epochs=8, batch_size=4, lr=0.05, seed=11,
                         features=SMALL_FEATURES)
    m1 = train(examples, examples, "binary", config)
    m2 = train(examples, examples, "binary", config)
    assert models_equal(m1, m2)
    p1, p2 = tmp_path / "a.frnk", tmp_path / "b.frnk"
    save_model(m1, str(p1))
    save_model(m2, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_degenerate_dataset_warns():
    examples = [labeled(f"t{t}", "a", "code tok", True) for t in range(3)]
    config = TrainConfig(epochs=2, batch_size=4, lr=0.1, features=SMALL_FEATURES)
    with pytest.warns(DegenerateDataset):
        train(examples, examples, "binary", config)


def test_label_mismatch_on_foreign_line_labels():
    bad = RankerExample(
        "t0", "a", "p", "one line only",
        FaultLabelSet("Wrong", "ExecutionError", "ExecutionError", "TypeError", 7),
    )
    config = TrainConfig(epochs=1, features=SMALL_FEATURES)
    with pytest.raises(LabelMismatch):
        train([bad], [bad], "exec-line", config)


def test_val_partition_must_be_nonempty():
    with pytest.raises(ValueError):
        train(separable_fixture(), [], "binary", TrainConfig(features=SMALL_FEATURES))


# ---------------------------------------------------------------------------
# gradient oracle: central finite differences on random small instances


def test_class_head_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(5):
        X, W, b, y, w = random_class_instance(rng)
        _, dW, db = _class_loss_grad(W, b.copy(), X, y, w)
        for _ in range(8):
            i, j = rng.integers(0, W.shape[0]), rng.integers(0, W.shape[1])
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += h
            Wm[i, j] -= h
            lp, _, _ = _class_loss_grad(Wp, b, X, y, w)
            lm, _, _ = _class_loss_grad(Wm, b, X, y, w)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - dW[i, j]) <= 1e-4 * max(1.0, abs(fd), abs(dW[i, j]))
        for i in range(len(b)):
            bp, bm = b.copy(), b.copy()
            bp[i] += h
            bm[i] -= h
            lp, _, _ = _class_loss_grad(W, bp, X, y, w)
            lm, _, _ = _class_loss_grad(W, bm, X, y, w)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - db[i]) <= 1e-4 * max(1.0, abs(fd), abs(db[i]))


def test_line_head_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    h = 1e-5
    for _ in range(5):
        prep, S, w = random_line_instance(rng)
        batch = np.arange(prep.X.shape[0])
        _, dS, _ = _line_loss_grad(S, 0.0, prep, batch, prep.X, w)
        touched = np.union1d(prep.line_rows.indices, prep.X.indices)
        for j in rng.choice(touched, size=10, replace=False):
            Sp, Sm = S.copy(), S.copy()
            Sp[j] += h
            Sm[j] -= h
            lp, _, _ = _line_loss_grad(Sp, 0.0, prep, batch, prep.X, w)
            lm, _, _ = _line_loss_grad(Sm, 0.0, prep, batch, prep.X, w)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - dS[j]) <= 1e-4 * max(1.0, abs(fd), abs(dS[j]))


def test_line_head_bias_and_globals_cancel():
    # shifting the line bias or a shared global feature leaves the
    # per-example softmax untouched
    rng = np.random.default_rng(2)
    prep, S, w = random_line_instance(rng)
    batch = np.arange(prep.X.shape[0])
    l0, _, db = _line_loss_grad(S, 0.0, prep, batch, prep.X, w)
    l7, _, _ = _line_loss_grad(S, 7.0, prep, batch, prep.X, w)
    assert l0 == pytest.approx(l7, abs=1e-9)
    assert db == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# scoring and ranking


def manual_model(features=SMALL_FEATURES, k=2, task="binary"):
    classes = ("Correct", "Wrong") if k == 2 else ("Correct", "IntentError", "ExecutionError")
    return RankerModel(
        task=task,
        features=features,
        classes=classes,
        weights=np.zeros((k, features.dim), dtype=np.float32),
        bias=np.zeros(k, dtype=np.float32),
    )


def test_score_is_correct_class_logit():
    model = manual_model()
    vec = featurize("p", "c", model.features)
    for idx in vec:
        model.weights[0, idx] = 0.5
    model.bias[0] = 0.25
    expected = 0.25 + 0.5 * sum(vec.values())
    assert score(model, "p", "c") == pytest.approx(expected, rel=1e-6)
    assert score(model, "p", "c") == pytest.approx(score(model, "p", "c"))


def test_score_monotone_under_weight_edit():
    model = manual_model()
    vec_a = featurize("p", "alpha_only_token", model.features)
    vec_b = featurize("p", "beta_only_token", model.features)
    only_a = set(vec_a) - set(vec_b)
    assert only_a
    idx = sorted(only_a)[0]
    base_a, base_b = score(model, "p", "alpha_only_token"), score(model, "p", "beta_only_token")
    model.weights[0, idx] += 0.125
    assert score(model, "p", "alpha_only_token") > base_a
    assert score(model, "p", "beta_only_token") == pytest.approx(base_b)


def test_softmax_normalization():
    rng = np.random.default_rng(3)
    model = manual_model(k=3, task="ternary")
    model.weights = rng.normal(size=model.weights.shape).astype(np.float32)
    model.bias = rng.normal(size=3).astype(np.float32)
    proba = predict_proba(model, "some prompt", "some code")
    assert sum(proba.values()) == pytest.approx(1.0, abs=1e-6)
    assert all(p >= 0 for p in proba.values())


def test_rank_orders_and_breaks_ties():
    task = Task("t0", "p", TestFormat.CALL_BASED, [[1]], [1], function_name="f")
    model = manual_model()
    cands = [Candidate("t0", cid, code) for cid, code in
             [("c", "token_low"), ("a", "token_high token_high"), ("b", "token_high token_high")]]
    vec = featurize("p", "token_high token_high", model.features)
    for idx in vec:
        model.weights[0, idx] = 1.0
    ranked = rank(model, task, cands)
    ids = [c.candidate_id for c, _ in ranked]
    assert ids[:2] == ["a", "b"]  # equal scores, id tiebreak
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_rank_invariant_to_input_permutation_and_bias_shift():
    import itertools

    task = Task("t0", "p", TestFormat.CALL_BASED, [[1]], [1], function_name="f")
    model = manual_model()
    rng = np.random.default_rng(4)
    model.weights = (rng.normal(size=model.weights.shape) * 0.1).astype(np.float32)
    cands = [Candidate("t0", f"c{i}", f"code variant {i} {'x' * i}") for i in range(4)]
    baseline = [c.candidate_id for c, _ in rank(model, task, cands)]
    for perm in itertools.permutations(cands):
        assert [c.candidate_id for c, _ in rank(model, task, list(perm))] == baseline
    model.bias = model.bias + np.float32(5.0)
    assert [c.candidate_id for c, _ in rank(model, task, cands)] == baseline


def test_rank_by_logprob():
    cands = [
        Candidate("t", "a", "x", gen_logprob=-5.0),
        Candidate("t", "b", "y", gen_logprob=-2.0),
    ]
    assert [c.candidate_id for c, _ in rank_by_logprob(cands)] == ["b", "a"]
    tied = [Candidate("t", "b", "x", gen_logprob=-1.0),
            Candidate("t", "a", "y", gen_logprob=-1.0)]
    assert [c.candidate_id for c, _ in rank_by_logprob(tied)] == ["a", "b"]
    with pytest.raises(MissingLogprob):
        rank_by_logprob([Candidate("t", "a", "x", gen_logprob=-1.0),
                         Candidate("t", "c", "z")])


def test_rank_requires_candidates():
    task = Task("t0", "p", TestFormat.CALL_BASED, [[1]], [1], function_name="f")
    with pytest.raises(ValueError):
        rank(manual_model(), task, [])


# ---------------------------------------------------------------------------
# persistence


def trained_model(task="binary", epochs=3):
    examples = separable_fixture()
    config = TrainConfig(epochs=epochs, batch_size=4, lr=0.05, seed=5,
                         features=SMALL_FEATURES)
    return train(examples, examples, task, config)


def test_save_load_round_trip(tmp_path):
    model = trained_model()
    path = str(tmp_path / "model.frnk")
    save_model(model, path)
    loaded = load_model(path)
    assert models_equal(model, loaded)
    # scoring parity
    assert score(loaded, "p", "return goodtok_value(xs)") == \
        pytest.approx(score(model, "p", "return goodtok_value(xs)"))


def test_save_load_line_head_round_trip(tmp_path):
    examples = []
    for t in range(3):
        examples.append(RankerExample(
            f"t{t}", "a", "p", "line one\nfaulty marker_tok\nline three",
            FaultLabelSet("Wrong", "ExecutionError", "ExecutionError", "TypeError", 2),
        ))
        examples.append(labeled(f"t{t}", "b", "clean code", True))
    config = TrainConfig(epochs=2, batch_size=4, lr=0.1, seed=0, features=SMALL_FEATURES)
    model = train(examples, examples, "exec-line", config)
    assert model.has_line_head
    path = str(tmp_path / "line.frnk")
    save_model(model, path)
    loaded = load_model(path)
    assert models_equal(model, loaded)
    assert "predicted_line" in predict(loaded, "p", "a\nb")


def test_truncated_file_is_corrupt(tmp_path):
    model = trained_model()
    path = str(tmp_path / "model.frnk")
    save_model(model, path)
    blob = open(path, "rb").read()
    open(path, "wb").write(blob[:len(blob) - 64])
    with pytest.raises(CorruptFile):
        load_model(path)


def test_bad_magic_is_corrupt(tmp_path):
    path = str(tmp_path / "junk.frnk")
    open(path, "wb").write(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CorruptFile):
        load_model(path)


def test_version_bump_is_mismatch(tmp_path):
    model = trained_model()
    path = str(tmp_path / "model.frnk")
    save_model(model, path)
    blob = bytearray(open(path, "rb").read())
    blob[4:8] = struct.pack("<I", 2)
    open(path, "wb").write(bytes(blob))
    with pytest.raises(VersionMismatch):
        load_model(path)
