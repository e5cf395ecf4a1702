import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import finite_difference_check, naive_conv
from elevleak.errors import DivergedLoss, EmptyRound, ShapeMismatch, SingleClassDataset
from elevleak.models import (
    AdamState, CnnModel, Forest, LinearModel, MlpModel, Tree, cnn_forward, cnn_train, fine_tune, forward_trace,
    hinge_objective, init_cnn, inverse_size_weights, load_model, make_rounds, rehead, save_model,
    smallest_first_schedule, softmax, train_mlp, train_rfc, train_svm,
)
from elevleak.models import cnn as cnn_mod
from elevleak.models import mlp as mlp_mod
from elevleak.models.forest import LEAF


def blobs(rng, n=40, k=2, d=2, spread=0.3):
    centers = rng.normal(0, 3, (k, d))
    y = np.repeat(np.arange(k), n)
    X = centers[y] + rng.normal(0, spread, (len(y), d))
    return X, y


# --- shared helpers ---

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(2, 8), st.floats(0.1, 100))
def test_softmax_sums_and_scale_invariant_argmax(n, k, scale):
    logits = np.random.default_rng(n * 31 + k).normal(0, 5, (n, k))
    p = softmax(logits)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(np.argmax(logits * scale, axis=1), np.argmax(logits, axis=1))


def test_inverse_size_weights():
    w = inverse_size_weights(np.array([0] * 90 + [1] * 10), 3)
    assert w.tolist() == [100 / 180, 100 / 20, 0.0]
    assert inverse_size_weights(np.array([0, 0, 1, 1]), 2).tolist() == [1.0, 1.0]


def test_adam_first_step_moves_by_lr():
    p = {"w": np.array([1.0, -2.0])}
    opt = AdamState(lr=0.1)
    opt.update(p, {"w": np.array([3.0, -0.5])})
    np.testing.assert_allclose(p["w"], [0.9, -1.9], atol=1e-6)
    assert opt.step == 1


# --- SVM ---

def test_svm_separable(rng):
    X, y = blobs(rng)
    model = train_svm(X, y, epochs=100, seed=1)
    assert (model.predict(X) == y).mean() == 1.0


def test_svm_relabel_equivariance(rng):
    X, y = blobs(rng, k=3)
    perm = np.array([2, 0, 1])
    a = train_svm(X, y, epochs=50, seed=3).predict(X)
    b = train_svm(X, perm[y], epochs=50, seed=3).predict(X)
    assert np.array_equal(perm[a], b)


def test_svm_objective_decreases(rng):
    X, y = blobs(rng, n=10)
    model = train_svm(X, y, epochs=100, seed=0, regularization=1e-3)
    zero = LinearModel(np.zeros_like(model.weights), np.zeros_like(model.biases))
    assert hinge_objective(model, X, y, 1e-3) <= hinge_objective(zero, X, y, 1e-3)


def test_svm_single_class():
    with pytest.raises(SingleClassDataset):
        train_svm(np.zeros((3, 2)), np.zeros(3, dtype=int))


# --- forest ---

def test_forest_threshold_dataset():
    X = np.arange(20, dtype=float)[:, None]
    y = (X[:, 0] > 9.5).astype(int)
    f = train_rfc(X, y, trees=100, seed=0)
    assert len(f.trees) == 100
    assert (f.predict(X) == y).mean() == 1.0


def test_forest_deterministic_and_threads(rng):
    X, y = blobs(rng, k=3, d=5, spread=2.0)
    a, b = train_rfc(X, y, trees=15, seed=4), train_rfc(X, y, trees=15, seed=4, threads=3)
    for ta, tb in zip(a.trees, b.trees):
        for name in ("feature", "threshold", "left", "right", "counts"):
            assert np.array_equal(getattr(ta, name), getattr(tb, name))


def test_forest_leaves_nonempty_and_vote_brute(rng):
    X, y = blobs(rng, k=3, d=4, spread=2.5)
    f = train_rfc(X, y, trees=11, seed=2)
    for t in f.trees:
        leaves = t.feature == LEAF
        assert np.all(t.counts[leaves].sum(axis=1) > 0)
    Xt = rng.normal(0, 3, (50, 4))
    per_tree = f.tree_predictions(Xt)
    brute = [min(range(3), key=lambda c: (-list(col).count(c), c)) for col in per_tree.T]
    assert f.predict(Xt).tolist() == brute


def _stump(cls_left, cls_right, k=3):
    counts = np.zeros((3, k), dtype=np.int64)
    counts[1, cls_left] = 1
    counts[2, cls_right] = 1
    return Tree(np.array([0, LEAF, LEAF]), np.array([0.0, 0, 0]), np.array([1, -1, -1]),
                np.array([2, -1, -1]), counts)


def test_forest_vote_fixture():
    # five hand-built stumps splitting feature 0 at 0
    trees = [_stump(0, 1), _stump(1, 1), _stump(2, 2), _stump(0, 2), _stump(1, 0)]
    f = Forest(trees, 3)
    X = np.array([[-1.0], [1.0]])
    # left votes: 0,1,2,0,1 -> tie between 0 and 1 -> 0; right votes: 1,1,2,2,0 -> tie 1/2 -> 1
    assert f.votes(X).tolist() == [[2, 2, 1], [1, 2, 2]]
    assert f.predict(X).tolist() == [0, 1]


# --- MLP ---

def test_mlp_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    model = train_mlp(X, y, hidden=100, epochs=2000, lr=0.01, batch_size=4, seed=0, alpha=0.0)
    assert (model.predict(X) == y).mean() == 1.0


def test_mlp_zero_input_learns_priors():
    y = np.array([0] * 30 + [1] * 60 + [2] * 10)
    X = np.zeros((100, 3))
    model = train_mlp(X, y, epochs=3000, lr=0.01, batch_size=100, seed=0, alpha=0.0)
    np.testing.assert_allclose(model.predict_proba(X[:1])[0], [0.3, 0.6, 0.1], atol=1e-3)


def test_mlp_gradient(rng):
    X = rng.normal(size=(7, 6))
    y = rng.integers(0, 3, 7)
    params = mlp_mod.init_params(6, 100, 3, rng)
    params["b1"] += 0.05
    _, grads = mlp_mod.loss_and_grads(params, X, y, alpha=1e-3)
    err = finite_difference_check(lambda: mlp_mod.loss_and_grads(params, X, y, alpha=1e-3)[0],
                                  params, grads, 300, rng)
    assert err <= 1e-5


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_mlp_diverged():
    X = np.array([[np.inf, 0.0], [0.0, 1.0]])
    with pytest.raises(DivergedLoss):
        train_mlp(X, np.array([0, 1]), epochs=3)


def test_mlp_deterministic(rng):
    X, y = blobs(rng, k=3, d=4)
    a = train_mlp(X, y, epochs=20, seed=5)
    b = train_mlp(X, y, epochs=20, seed=5)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


# --- CNN ---

def test_cnn_shape_trace():
    model = init_cnn(4, dtype=np.float64)
    trace = dict(forward_trace(model, np.zeros((3, 32, 32))))
    assert trace["conv1"] == (16, 32, 32) and trace["pool1"] == (16, 16, 16)
    assert trace["conv2"] == (32, 16, 16) and trace["pool2"] == (32, 8, 8)
    assert trace["flatten"] == (2048,) and trace["logits"] == (4,)


def test_cnn_zero_model_zero_logits():
    model = init_cnn(3, dtype=np.float64)
    model.params = {k: np.zeros_like(v) for k, v in model.params.items()}
    assert np.array_equal(cnn_forward(model, np.zeros((3, 32, 32))), np.zeros(3))


def test_cnn_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        cnn_forward(init_cnn(2), np.zeros((3, 28, 28)))


def test_conv_matches_direct_sum(rng):
    x = rng.normal(size=(3, 5, 5))
    W = rng.normal(size=(4, 3, 5, 5))
    b = rng.normal(size=4)
    out, _ = cnn_mod.conv_forward(x[:, None], W, b)
    np.testing.assert_allclose(out[:, 0], naive_conv(x, W, b), atol=1e-12)


def test_maxpool_unique_maxima(rng):
    x = rng.permutation(64).reshape(1, 1, 8, 8).astype(float)
    out, _ = cnn_mod.maxpool_forward(x)
    expected = x.reshape(8, 8).reshape(4, 2, 4, 2).max(axis=(1, 3))
    assert np.array_equal(out[0, 0], expected)


def test_cnn_gradient_two_samples(rng):
    model = init_cnn(3, c1=4, c2=6, seed=1, dtype=np.float64)
    # the head is C2*8*8 wide regardless of c2 choice above
    x = rng.uniform(0, 1, (2, 3, 32, 32))
    y = np.array([0, 2])
    w = np.array([0.5, 2.0])
    _, grads = cnn_mod.loss_and_grads(model.params, x, y, w)
    err = finite_difference_check(lambda: cnn_mod.loss_and_grads(model.params, x, y, w)[0],
                                  model.params, grads, 200, rng)
    assert err <= 1e-4


def test_cnn_balanced_weights_bit_identical(rng):
    x = rng.uniform(0, 1, (12, 3, 32, 32)).astype(np.float32)
    y = np.repeat([0, 1, 2], 4)
    h1, h2 = [], []
    a = cnn_train(x, y, epochs=2, batch_size=5, seed=3, c1=4, c2=8, history=h1)
    b = cnn_train(x, y, class_weights=inverse_size_weights(y, 3), epochs=2, batch_size=5, seed=3, c1=4, c2=8,
                  history=h2)
    assert h1 == h2
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_cnn_learns_simple_task(rng):
    x = np.ones((40, 3, 32, 32), dtype=np.float32)
    y = np.repeat([0, 1], 20)
    x[y == 1, 0, :16] = 0.0  # red channel dark in the top half for class 1
    model = cnn_train(x, y, epochs=5, batch_size=8, seed=0, c1=4, c2=8, lr=3e-3)
    assert (model.predict(x) == y).mean() == 1.0


def test_rehead_copies_known_rows(rng):
    model = init_cnn(2, c1=2, c2=4, seed=0)
    model.classes = ["a", "c"]
    new = rehead(model, ["a", "b", "c"], rng)
    assert np.array_equal(new.params["Wf"][0], model.params["Wf"][0])
    assert np.array_equal(new.params["Wf"][2], model.params["Wf"][1])
    assert np.array_equal(new.params["W1"], model.params["W1"])
    assert new.n_classes == 3 and new.classes == ["a", "b", "c"]


# --- rounds and fine-tuning ---

def test_make_rounds_fixture():
    labels = np.array([0] * 50 + [1] * 30 + [2] * 10)
    rounds = make_rounds(labels, smallest_first_schedule(labels, [1, 1]), seed=0)
    assert [r.classes for r in rounds] == [[0, 1, 2], [0, 1], [0]]
    assert [r.per_class for r in rounds] == [10, 30, 50]


def test_make_rounds_balanced_identity():
    labels = np.repeat([0, 1, 2], 7)
    (only,) = make_rounds(labels)
    assert np.array_equal(only.indices, np.arange(21))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=5, max_size=80), st.integers(0, 1000))
def test_rounds_internally_balanced(labels, seed):
    labels = np.array(labels)
    k = len(set(labels.tolist()))
    drops = [1] * (k - 1)
    rounds = make_rounds(labels, smallest_first_schedule(labels, drops) if drops else [], seed)
    for prev, cur in zip(rounds, rounds[1:]):
        assert set(cur.classes) < set(prev.classes)
    for r in rounds:
        counts = np.bincount(labels[r.indices])
        counts = counts[counts > 0]
        assert len(counts) == len(r.classes) and np.all(counts == counts[0])
        assert len(set(r.indices.tolist())) == len(r.indices)


def test_make_rounds_errors():
    labels = np.array([0, 0, 1, 1])
    with pytest.raises(EmptyRound):
        make_rounds(labels, [[0], [1]])
    with pytest.raises(EmptyRound):
        make_rounds(labels, [[5]])


def test_fine_tune_single_round_equals_plain(rng):
    x = rng.uniform(0, 1, (10, 3, 32, 32)).astype(np.float32)
    y = np.repeat([0, 1], 5)
    rounds = make_rounds(y)
    from elevleak.models import RoundParams
    ft = fine_tune(x, y, rounds, RoundParams(epochs=2, batch_size=4), seed=7, c1=4, c2=8)
    plain = cnn_train(x[rounds[0].indices], y[rounds[0].indices], epochs=2, batch_size=4, seed=7, c1=4, c2=8)
    assert all(np.array_equal(ft.params[k], plain.params[k]) for k in ft.params)


def test_fine_tune_order_and_zero_lr(rng, tmp_path):
    from elevleak.models import RoundParams
    x = rng.uniform(0, 1, (30, 3, 32, 32)).astype(np.float32)
    y = np.array([0] * 14 + [1] * 10 + [2] * 6)
    rounds = make_rounds(y, smallest_first_schedule(y, [1, 1]), seed=1)
    seen = []
    snap = {}

    def record(number, model):
        seen.append((number, list(model.classes)))
        snap[number] = {k: v.copy() for k, v in model.params.items()}

    params = [RoundParams(epochs=1, lr=0.0, batch_size=8), RoundParams(epochs=1, batch_size=8),
              RoundParams(epochs=1, batch_size=8)]
    model = fine_tune(x, y, rounds, params, seed=0, c1=4, c2=8, on_round_end=record, checkpoint_dir=tmp_path)
    assert seen == [(3, [0]), (2, [0, 1]), (1, [0, 1, 2])]
    for k in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(snap[1][k], snap[2][k])
    assert model.classes == [0, 1, 2]
    saved = load_model(tmp_path / "round_02.npz")
    assert all(np.array_equal(saved.params[k], snap[2][k]) for k in snap[2])


# --- checkpoints ---

def test_checkpoint_round_trips(rng, tmp_path):
    X, y = blobs(rng, k=3, d=4)
    models = [train_svm(X, y, epochs=5, standardize=True), train_rfc(X, y, trees=3),
              train_mlp(X, y, epochs=5), init_cnn(3, c1=2, c2=4)]
    for i, m in enumerate(models):
        path = tmp_path / f"m{i}.npz"
        save_model(m, path)
        back = load_model(path)
        assert type(back) is type(m)
        if isinstance(m, CnnModel):
            img = rng.uniform(0, 1, (2, 3, 32, 32)).astype(np.float32)
            assert np.array_equal(back.logits(img), m.logits(img))
        else:
            assert np.array_equal(back.predict(X), m.predict(X))
    assert isinstance(load_model(tmp_path / "m2.npz"), MlpModel)
