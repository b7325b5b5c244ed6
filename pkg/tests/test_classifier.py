import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from vqsvm import classifier as C
from vqsvm import kernel as K
from vqsvm import svd, vqls
from vqsvm.optimizer import OptimizerConfig


@pytest.fixture(scope="module")
def iris():
    return K.load_iris()


def normalized(raw):
    params = K.fit_normalize(raw)
    return K.normalize_dataset(params, raw), params


@pytest.fixture(scope="module")
def table1():
    return normalized(K.table1_instance())


# -- solution extraction -----------------------------------------------------

def test_zero_parameters_extract_e0():
    np.testing.assert_allclose(C.extract_solution(np.zeros(9)), np.eye(8)[0], atol=1e-12)


def test_identity_factors_leave_state_unchanged():
    alpha = np.random.default_rng(0).uniform(0, 6, 9)
    f = svd.SvdFactors(np.eye(8), np.ones(8), np.eye(8))
    np.testing.assert_allclose(C.extract_solution(alpha, f), vqls.ansatz_state(alpha).real, atol=1e-12)


def test_complex_amplitudes_rejected(monkeypatch):
    monkeypatch.setattr(C, "ansatz_state", lambda alpha, layout: np.full(8, (1 + 1j) / 4))
    with pytest.raises(C.ClassifierError):
        C.extract_solution(np.zeros(9))


def test_solved_direction_matches_direct_solve():
    toy = K.gen_toy_system(K.random_symmetric_words(10, seed=3), kappa_target=1.5, seed=3)
    tr = vqls.solve(toy, config=OptimizerConfig(cost_epsilon=0), seed=0)
    x = C.extract_solution(tr.alpha_opt)
    assert abs(x @ toy.direct_solution()) > 0.99


def test_recast_cost_equals_original_cost_of_mapped_back_state(table1):
    train, _ = table1
    s = K.build_system(train, K.tune_gamma(train, 19))
    r = svd.recast(s)
    tr = vqls.solve(r, config=OptimizerConfig(max_iterations=60), seed=1)
    x_new = vqls.ansatz_state(tr.alpha_opt).real
    x = C.extract_solution(tr.alpha_opt, r.factors)
    assert O.closed_form_cost(s.A, s.b, x) == pytest.approx(O.closed_form_cost(r.A, r.b, x_new), abs=1e-12)
    assert O.closed_form_cost(r.A, r.b, x_new) == pytest.approx(tr.cost_opt, abs=1e-9)


# -- model construction ------------------------------------------------------

def test_exact_solution_reproduces_classical(table1, iris):
    train, params = table1
    for gamma in (0.5, 0.8914, 3.0, 17.4):
        s = K.build_system(train, gamma)
        model = C.build_svc(s.direct_solution(), train, gamma, params)
        base = C.classical_lssvm(train, gamma, params)
        np.testing.assert_array_equal(C.predict(model, iris.X), C.predict(base, iris.X))
        np.testing.assert_allclose(model.w, base.w, atol=1e-9)
        assert model.d == pytest.approx(base.d, abs=1e-9)


def test_single_support_vector(table1):
    train, _ = table1
    x = np.zeros(8)
    x[3] = 1.0
    m = C.build_svc(x, train, 1.0)
    w3 = train.X[2]
    assert abs(abs(m.w @ w3) - np.linalg.norm(m.w) * np.linalg.norm(w3)) < 1e-12


def test_global_sign_flip(table1):
    train, _ = table1
    x = K.build_system(train, 2.0).direct_solution() + 0.05
    a = C.build_svc(x, train, 2.0)
    b = C.build_svc(-x, train, 2.0)
    assert b.theta_norm == pytest.approx(-a.theta_norm)
    np.testing.assert_allclose(a.w, b.w, atol=1e-12)
    assert a.d == pytest.approx(b.d, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
def test_prediction_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    raw = K.table1_instance()
    train, params = normalized(raw)
    x = rng.normal(size=8)
    x /= np.linalg.norm(x)
    a = C.build_svc(x, train, 1.0, params)
    b = C.build_svc(c * x, train, 1.0, params)
    probe = rng.uniform(4, 8, size=(30, 4))
    np.testing.assert_array_equal(C.predict(a, probe), C.predict(b, probe))


def test_build_errors(table1):
    train, _ = table1
    with pytest.raises(C.ClassifierError):
        C.build_svc(np.ones(7), train, 1.0)
    with pytest.raises(C.ClassifierError):
        C.build_svc(np.eye(2)[0], train.subset([0]), 1.0)
    with pytest.raises(C.ClassifierError):
        C.build_svc(np.eye(8)[0], train, 1.0)
    same = K.Dataset.from_arrays(np.ones((3, 2)), [1, 1, 1])
    with pytest.raises(C.ClassifierError, match="degenerate"):
        C.build_svc(np.ones(4) / 2, same, 1.0)


def test_json_round_trip(table1):
    train, params = table1
    m = C.classical_lssvm(train, 2.0, params)
    back = C.SVCModel.from_dict(json.loads(json.dumps(m.to_dict())))
    np.testing.assert_array_equal(back.w, m.w)
    assert back.norm_params == params and back.d == m.d


# -- prediction --------------------------------------------------------------

def test_boundary_is_positive():
    m = C.SVCModel(np.array([1.0, -1.0]), 0.0, np.zeros(2), 1.0, None, 1.0)
    assert C.predict(m, [2.0, 2.0]) == 1


def test_negation_flips(table1, iris):
    train, params = table1
    m = C.classical_lssvm(train, 2.0, params)
    neg = C.SVCModel(-m.w, -m.d, -m.theta, -m.theta_norm, params, m.gamma)
    p, q = C.predict(m, iris.X), C.predict(neg, iris.X)
    on_boundary = m.decision(K.apply_normalize(params, iris.X)) == 0
    assert np.all((p == -q) | on_boundary)


def test_classical_predicts_held_out_setosa(table1, iris):
    train, params = table1
    m = C.classical_lssvm(train, K.kappa_profile(train).gamma_min, params)
    assert C.predict(m, iris.X[10]) == 1 and iris.y[10] == 1


def test_dimension_mismatch(table1):
    train, params = table1
    m = C.classical_lssvm(train, 1.0)
    with pytest.raises(C.ClassifierError):
        C.predict(m, [1.0, 2.0])


# -- metrics -----------------------------------------------------------------

def test_perfect_predictions():
    y = np.array([1] * 50 + [-1] * 50)
    m = C.Metrics.from_labels(y, y)
    assert m.accuracy == 1
    for c in (1, -1):
        r = m.report(c)
        assert (r.f1, r.support) == (1, 50)


def test_all_positive_predictor_rows():
    y = np.array([1] * 50 + [-1] * 50)
    m = C.Metrics.from_labels(y, np.ones(100))
    assert m.accuracy == 0.5
    setosa, virginica = m.report(1), m.report(-1)
    assert (round(setosa.precision, 2), round(setosa.recall, 2), round(setosa.f1, 2)) == (0.50, 1.00, 0.67)
    assert (virginica.precision, virginica.recall, virginica.f1) == (0, 0, 0)


def test_hand_built_confusion():
    assert C.Metrics(tp=49, fp=0, tn=50, fn=1).accuracy == pytest.approx(0.99)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([1, -1]), st.sampled_from([1, -1])), min_size=1, max_size=200))
def test_metrics_against_brute_force(pairs):
    t = np.array([p[0] for p in pairs])
    p = np.array([p[1] for p in pairs])
    m = C.Metrics.from_labels(t, p)
    assert m.total == len(pairs)
    assert m.accuracy == pytest.approx(np.mean(t == p))
    for c in (1, -1):
        hits = sum(1 for a, b in pairs if a == c and b == c)
        predicted = sum(1 for _, b in pairs if b == c)
        actual = sum(1 for a, _ in pairs if a == c)
        prec = hits / predicted if predicted else 0.0
        rec = hits / actual if actual else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        r = m.report(c)
        assert (r.precision, r.recall, r.support) == pytest.approx((prec, rec, actual))
        assert r.f1 == pytest.approx(f1)
        assert 0 <= r.f1 <= 1


def test_metrics_dict_shape():
    d = C.Metrics(1, 2, 3, 4).to_dict()
    assert set(d["classes"]) == {"setosa", "virginica"}
    assert d["confusion"] == {"tp": 1, "fp": 2, "tn": 3, "fn": 4}


def test_empty_test_set(table1):
    train, _ = table1
    with pytest.raises(C.ClassifierError):
        C.evaluate(C.classical_lssvm(train, 1.0), K.Dataset([]))


# -- classical baseline ------------------------------------------------------

def test_classical_well_conditioned_is_perfect(table1, iris):
    train, params = table1
    for target in (10, 19, 144):
        m = C.classical_lssvm(train, K.tune_gamma(train, target), params)
        assert C.evaluate(m, iris).accuracy == 1.0


def test_classical_collapses_at_huge_kappa(table1, iris):
    train, params = table1
    m = C.classical_lssvm(train, K.tune_gamma(train, 4594, branch="low"), params)
    assert C.evaluate(m, iris).accuracy == pytest.approx(0.5, abs=0.02)


def test_two_point_toy():
    d = K.Dataset.from_arrays([[0.0, 1.0], [1.0, 0.0], [0.2, 0.9]], [1, -1, 1])
    m = C.classical_lssvm(d, 10.0)
    np.testing.assert_array_equal(C.predict(m, d.X), d.y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_oracle_equivalence_random_instances(seed):
    iris = K.load_iris()
    sub = iris.subset(K.sample_training_subset(iris, seed))
    train, params = normalized(sub)
    gamma = K.kappa_profile(train).gamma_min
    s = K.build_system(train, gamma)
    model = C.build_svc(s.direct_solution(), train, gamma, params)
    base = C.classical_lssvm(train, gamma, params)
    np.testing.assert_array_equal(C.predict(model, iris.X), C.predict(base, iris.X))
