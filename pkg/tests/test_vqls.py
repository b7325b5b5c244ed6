import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from vqsvm import kernel as K
from vqsvm import vqls
from vqsvm.optimizer import OptimizerConfig
from vqsvm.pauli import decompose
from vqsvm.simulator import state_prep_unitary


def rand_alpha(rng):
    return rng.uniform(0, 2 * np.pi, 9)


def dense_pair(alpha, wm, wn):
    v = O.ansatz_state(alpha)
    return np.vdot(v, O.word(wm).conj().T @ O.word(wn) @ v)


def dense_b(alpha, wn, b):
    return np.vdot(b, O.word(wn) @ O.ansatz_state(alpha))


# -- ansatz ------------------------------------------------------------------

def test_zero_parameters_fix_the_zero_state():
    np.testing.assert_allclose(vqls.ansatz_state(np.zeros(9)), np.eye(8)[0], atol=1e-12)
    # only the CZ phases remain
    m = vqls.ansatz_matrix(np.zeros(9))
    np.testing.assert_allclose(np.abs(m), np.eye(8), atol=1e-12)


def test_first_layer_flip():
    alpha = np.zeros(9)
    alpha[0] = np.pi
    np.testing.assert_allclose(np.abs(vqls.ansatz_state(alpha)), np.eye(8)[1], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ansatz_matches_oracle_and_is_real(seed):
    alpha = rand_alpha(np.random.default_rng(seed))
    m = vqls.ansatz_matrix(alpha)
    np.testing.assert_allclose(m, O.ansatz_matrix(alpha), atol=1e-12)
    assert np.max(np.abs(vqls.ansatz_state(alpha).imag)) < 1e-10


def test_parameter_count_checked():
    with pytest.raises(ValueError):
        vqls.ansatz_circuit(np.zeros(8))
    with pytest.raises(ValueError):
        vqls.AnsatzParams(np.zeros(8))
    with pytest.raises(ValueError):
        vqls.AnsatzParams([np.nan] * 9)


def test_random_params_in_range_and_seeded():
    a = vqls.AnsatzParams.random(3).alpha
    assert np.all((a >= 0) & (a < 2 * np.pi))
    np.testing.assert_array_equal(a, vqls.AnsatzParams.random(3).alpha)


def test_configurable_layout():
    layout = vqls.AnsatzLayout(n_qubits=2, entanglers=(((0, 1),),))
    assert layout.n_params == 4
    assert vqls.ansatz_state(np.zeros(4), layout).shape == (4,)


# -- Hadamard tests ----------------------------------------------------------

def test_psi_term_same_word_is_one():
    alpha = rand_alpha(np.random.default_rng(0))
    assert vqls.psi_term(alpha, "XZY", "XZY") == pytest.approx(1, abs=1e-12)


def test_psi_term_trivial():
    assert vqls.psi_term(np.zeros(9), "III", "ZZZ") == pytest.approx(1, abs=1e-12)


def test_psi_term_random_against_oracle():
    rng = np.random.default_rng(1)
    words = ["".join(rng.choice(list("IXYZ"), 3)) for _ in range(60)]
    for k in range(30):
        alpha = rand_alpha(rng)
        wm, wn = words[2 * k], words[2 * k + 1]
        ref = dense_pair(alpha, wm, wn)
        assert vqls.psi_term(alpha, wm, wn) == pytest.approx(ref.real, abs=1e-10)
        im = vqls.psi_term(alpha, wm, wn, vqls.CostSettings(analytic=True, imaginary=True))
        assert im == pytest.approx(ref.imag, abs=1e-10)
        shot = vqls.psi_term(alpha, wm, wn, vqls.CostSettings(shots=10000, rng_seed=k))
        assert abs(shot - ref.real) < 0.04


def test_b_term_perfect_overlap():
    alpha = rand_alpha(np.random.default_rng(2))
    u = state_prep_unitary(O.ansatz_state(alpha).real, 3)
    for wiring in vqls.WIRINGS:
        s = vqls.CostSettings(analytic=True, wiring=wiring)
        assert vqls.b_term(alpha, "III", u, s) == pytest.approx(1, abs=1e-10)


def test_b_term_orthogonal():
    # V(0)|0> = |000> and Z words keep it there; |b> = |111> is orthogonal
    u = state_prep_unitary(np.eye(8)[7], 3)
    assert vqls.b_term(np.zeros(9), "ZIZ", u) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("wiring", vqls.WIRINGS)
def test_b_term_random_against_oracle(wiring):
    rng = np.random.default_rng(3)
    settings_re = vqls.CostSettings(analytic=True, wiring=wiring)
    settings_im = vqls.CostSettings(analytic=True, wiring=wiring, imaginary=True)
    for _ in range(20):
        alpha = rand_alpha(rng)
        b = O.random_unit(rng)
        w = "".join(rng.choice(list("IXYZ"), 3))
        u = state_prep_unitary(b, 3)
        ref = dense_b(alpha, w, b)
        assert vqls.b_term(alpha, w, u, settings_re) == pytest.approx(ref.real, abs=1e-10)
        assert vqls.b_term(alpha, w, u, settings_im) == pytest.approx(ref.imag, abs=1e-10)


def test_aux_wiring_uses_extra_qubit():
    u = state_prep_unitary(np.eye(8)[0], 3)
    assert vqls.b_circuit(np.zeros(9), "III", u, wiring="aux").n_qubits == 5
    assert vqls.b_circuit(np.zeros(9), "III", u, wiring="ccz").n_qubits == 4


def test_controlled_ansatz_wirings_agree():
    rng = np.random.default_rng(4)
    alpha = rand_alpha(rng)
    u = state_prep_unitary(O.random_unit(rng), 3)
    vals = [vqls.b_term(alpha, "XYY", u, vqls.CostSettings(analytic=True, wiring=w)) for w in vqls.WIRINGS]
    assert max(vals) - min(vals) < 1e-12


# -- cost --------------------------------------------------------------------

def random_system(rng):
    a = O.random_symmetric(rng) + 4 * np.eye(8)
    return K.LinearSystem(a, O.random_unit(rng))


def test_exact_solution_has_zero_cost():
    rng = np.random.default_rng(5)
    alpha = rand_alpha(rng)
    a = O.random_symmetric(rng) + 4 * np.eye(8)
    b = a @ O.ansatz_state(alpha).real
    f = vqls.CostFunction.for_system(K.LinearSystem(a, b))
    assert f(alpha) < 1e-9


def test_identity_orthogonal_cost_is_one():
    c = vqls.cost(np.zeros(9), decompose(np.eye(8)), state_prep_unitary(np.eye(8)[3], 3))
    assert c == pytest.approx(1, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cost_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng)
    alpha = rand_alpha(rng)
    c = vqls.CostFunction.for_system(s)(alpha)
    assert c == pytest.approx(O.closed_form_cost(s.A, s.b, O.ansatz_state(alpha)), abs=1e-9)
    assert 0 <= c <= 1


def test_cost_scale_invariance():
    rng = np.random.default_rng(6)
    s = random_system(rng)
    alpha = rand_alpha(rng)
    d = decompose(s.A)
    u = state_prep_unitary(s.b, 3)
    assert vqls.cost(alpha, d.scaled(3.7), u) == pytest.approx(vqls.cost(alpha, d, u), abs=1e-12)


@pytest.mark.parametrize("mode", vqls.PAIR_MODES)
def test_pair_modes_agree(mode):
    rng = np.random.default_rng(7)
    s = random_system(rng)
    alpha = rand_alpha(rng)
    ref = vqls.CostFunction.for_system(s)(alpha)
    f = vqls.CostFunction.for_system(s, vqls.CostSettings(analytic=True, pair_mode=mode))
    assert f(alpha) == pytest.approx(ref, abs=1e-12)


def test_term_pair_counts():
    rng = np.random.default_rng(8)
    s = random_system(rng)
    alpha = rand_alpha(rng)
    L = 36
    full = vqls.CostFunction.for_system(s, vqls.CostSettings(analytic=True, pair_mode="full"))
    full(alpha)
    assert (full.counters.psi_pairs, full.counters.b_pairs, full.counters.circuits) == (L * L, L, L * L + L)
    sym = vqls.CostFunction.for_system(s)
    sym(alpha)
    assert sym.counters.circuits == L * (L + 1) // 2 + L
    lit = vqls.CostFunction.for_system(s, vqls.CostSettings(analytic=True, pair_mode="literal"))
    lit(alpha)
    assert (lit.counters.psi_pairs, lit.counters.b_pairs, lit.counters.circuits) == (L * L, L * L, 3 * L * L)


def test_shot_cost_tracks_analytic():
    rng = np.random.default_rng(9)
    devs = []
    for k in range(100):
        s = random_system(rng)
        alpha = rand_alpha(rng)
        exact = vqls.CostFunction.for_system(s)(alpha)
        shot = vqls.CostFunction.for_system(s, vqls.CostSettings(shots=10000, rng_seed=k))(alpha)
        assert 0 <= shot <= 1
        devs.append(abs(shot - exact))
    assert np.mean(devs) < 0.05


def test_vanishing_norm_sets_cost_to_one(caplog):
    a = np.diag([0.0, 1, 1, 1, 1, 1, 1, 1])
    f = vqls.CostFunction(decompose(a), np.ones(8))
    with caplog.at_level(logging.WARNING):
        assert f(np.zeros(9)) == 1.0
    assert f.counters.degenerate == 1
    assert "below floor" in caplog.text


def test_settings_validation():
    with pytest.raises(ValueError):
        vqls.CostSettings(shots=0)
    with pytest.raises(ValueError):
        vqls.CostSettings(pair_mode="half")
    with pytest.raises(ValueError):
        vqls.CostSettings(wiring="magic")
    vqls.CostSettings(shots=0, analytic=True)


def test_empty_decomposition_rejected():
    from vqsvm.pauli import PauliDecomposition
    with pytest.raises(ValueError):
        vqls.CostFunction(PauliDecomposition(3, []), np.ones(8))


# -- solve -------------------------------------------------------------------

TOY = K.gen_toy_system(["III", "YYZ"], coefficients=[2, 1])


@pytest.mark.parametrize("method", ["cobyla", "nelder-mead"])
def test_toy_converges(method):
    cfg = OptimizerConfig(method=method)
    finals = [vqls.solve(TOY, config=cfg, seed=s).cost_opt for s in range(5)]
    assert sum(f < 0.01 for f in finals) >= 4


def test_already_optimal_start():
    s = K.LinearSystem(np.eye(8), np.eye(8)[0])
    tr = vqls.solve(s, np.zeros(9))
    assert tr.reason == "epsilon" and tr.iterations == [0] and tr.cost_opt < 1e-9


def test_trace_contents():
    tr = vqls.solve(TOY, config=OptimizerConfig(max_iterations=25, cost_epsilon=0), seed=1)
    assert tr.iterations == list(range(25)) and tr.reason == "max_iterations"
    assert all(0 <= c <= 1 for c in tr.costs)
    assert tr.cost_opt == min(tr.costs)
    assert tr.counters.evaluations == 25 and tr.n_terms == 2


def test_shot_mode_is_seeded():
    settings_ = vqls.CostSettings(shots=1000, rng_seed=4)
    cfg = OptimizerConfig(max_iterations=40)
    a = vqls.solve(TOY, config=cfg, settings=settings_, seed=2)
    b = vqls.solve(TOY, config=cfg, settings=settings_, seed=2)
    assert a.costs == b.costs


def test_nan_cost_aborts_with_trace():
    class Broken(vqls.CostFunction):
        def __call__(self, alpha):
            value = super().__call__(alpha)
            return float("nan") if self.counters.evaluations > 3 else value

    f = Broken.for_system(TOY)
    with pytest.raises(vqls.SolveError) as info:
        vqls.solve(TOY, cost_fn=f, seed=0)
    assert len(info.value.trace.costs) == 4


def table1_system(kappa):
    raw = K.table1_instance()
    train = K.normalize_dataset(K.fit_normalize(raw), raw)
    gamma, _ = K.resolve_gamma(train, kappa)
    return K.build_system(train, gamma)


def test_high_kappa_iris_converges_worse_on_same_seed():
    cfg = OptimizerConfig(cost_epsilon=0)
    low = vqls.solve(table1_system(5), config=cfg, seed=0).cost_opt
    high = vqls.solve(table1_system(144), config=cfg, seed=0).cost_opt
    assert high > 2 * low
