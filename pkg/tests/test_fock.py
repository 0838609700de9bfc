import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_state
from squeezedistill.exceptions import (
    InvalidDimensionError,
    InvalidParameterError,
    InvalidStateError,
    KindMismatchError,
    ZeroStateError,
)
from squeezedistill.fock import (
    TwoModeState,
    annihilation,
    creation,
    dump_state,
    embed,
    fidelity,
    fock_state,
    load_state,
    loss_kraus_operators,
    normalize,
    number_operator,
    partial_trace,
    purity,
    reduced_state,
    tensor,
    trace_distance,
    truncation_report,
    validate_density,
)
from squeezedistill.gaussian import squeezed_vacuum
from squeezedistill.subtraction import m_operator


class TestOperators:
    def test_annihilation_dim3(self):
        a = annihilation(3)
        expect = np.zeros((3, 3))
        expect[0, 1], expect[1, 2] = 1.0, np.sqrt(2)
        assert np.array_equal(a, expect)

    def test_annihilates_vacuum(self):
        assert np.all(annihilation(6) @ fock_state(0, 6) == 0)

    def test_number_from_ladder(self):
        a, ad = annihilation(10), creation(10)
        for n in range(9):
            assert np.allclose(ad @ a @ fock_state(n, 10), n * fock_state(n, 10), atol=1e-14)

    def test_number_operator(self):
        assert np.array_equal(number_operator(2), np.diag([0.0, 1.0]))
        assert np.allclose(number_operator(8), creation(8) @ annihilation(8), atol=1e-14)

    def test_commutator_interior(self):
        a, ad = annihilation(12), creation(12)
        c = a @ ad - ad @ a
        assert np.allclose(c[:-1, :-1], np.eye(11), atol=1e-13)

    @pytest.mark.parametrize("bad", [0, 1, -3, 2.5])
    def test_invalid_dimension(self, bad):
        with pytest.raises(InvalidDimensionError):
            annihilation(bad)

    def test_cached_operators_are_read_only(self):
        with pytest.raises(ValueError):
            annihilation(5)[0, 1] = 2.0

    def test_matrix_elements_are_square_roots(self):
        a = annihilation(30)
        n = np.arange(1, 30)
        assert np.array_equal(a[n - 1, n], np.sqrt(n))
        assert np.count_nonzero(a) == 29


class TestTensorAndTrace:
    def test_vacuum_product(self):
        s = tensor(fock_state(0, 3), fock_state(0, 4))
        assert s.data[0] == 1 and np.count_nonzero(s.data) == 1

    def test_local_ladder_on_11(self):
        d = 3
        op = np.kron(annihilation(d), np.eye(d)) @ np.kron(np.eye(d), annihilation(d))
        out = op @ tensor(fock_state(1, d), fock_state(1, d)).data
        assert np.allclose(out, tensor(fock_state(0, d), fock_state(0, d)).data)

    def test_index_ordering(self):
        s = tensor(fock_state(1, 3), fock_state(2, 4))
        assert s.data[1 * 4 + 2] == 1

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatchError):
            tensor(fock_state(0, 3), np.eye(3))

    def test_partial_trace_scaled(self, rng):
        x = random_density(rng, 4)
        y = 0.3 * random_density(rng, 4)
        s = tensor(x, y)
        # direct summation oracle
        t = s.data.reshape(4, 4, 4, 4)
        direct = sum(t[:, b, :, b] for b in range(4))
        assert np.allclose(partial_trace(s, "A"), direct, atol=1e-14)
        assert np.allclose(partial_trace(s, "A"), x * np.trace(y), atol=1e-14)
        assert np.allclose(partial_trace(s, "B"), y * np.trace(x), atol=1e-14)

    def test_bell_state(self):
        v = np.zeros(4, dtype=complex)
        v[0] = v[3] = 1 / np.sqrt(2)
        rho = partial_trace(TwoModeState(v, 2, 2).to_density(), "A")
        assert np.allclose(rho, np.diag([0.5, 0.5]))

    def test_vector_input_rejected(self):
        with pytest.raises(KindMismatchError):
            partial_trace(tensor(fock_state(0, 2), fock_state(0, 2)))

    def test_reduced_state_matches_partial_trace(self, rng):
        v = random_state(rng, 20)
        s = TwoModeState(v, 4, 5)
        for keep in "AB":
            assert np.allclose(reduced_state(s, keep), partial_trace(s.to_density(), keep), atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 8), st.integers(2, 8), st.integers(0, 2**31 - 1))
    def test_partial_trace_of_product(self, da, db, seed):
        rng = np.random.default_rng(seed)
        ra, rb = random_density(rng, da), random_density(rng, db)
        s = tensor(ra, rb)
        assert np.max(np.abs(partial_trace(s, "A") - ra)) < 1e-12
        assert np.max(np.abs(partial_trace(s, "B") - rb)) < 1e-12

    def test_padded_roundtrip(self, rng):
        s = TwoModeState(random_state(rng, 12), 3, 4)
        p = s.padded(5, 6)
        assert np.allclose(p.padded(3, 4).data, s.data)
        assert np.isclose(np.linalg.norm(p.data), 1.0)


class TestStates:
    def test_normalize_scaled_vacuum(self):
        v, f = normalize(2 * fock_state(0, 4))
        assert np.allclose(v, fock_state(0, 4)) and np.isclose(f, 4.0)

    def test_normalize_zero(self):
        with pytest.raises(ZeroStateError) as err:
            normalize(np.zeros(5))
        assert err.value.probability == 0.0

    def test_normalize_matches_expectation(self):
        # <psi|M^dag M|psi> from the series of M|psi>: coefficients ((2n+1)t - d) c_{2n}
        r, d, dim = 0.3, 0.1, 60
        psi = squeezed_vacuum(r, dim)
        _, f = normalize(m_operator(d, dim) @ psi)
        t = np.tanh(r)
        c = psi[0::2]
        n = np.arange(c.size)
        series = np.sum(np.abs(((2 * n + 1) * t - d) * c) ** 2)
        assert abs(f - series) < 1e-12

    def test_purity_values(self):
        assert abs(purity(fock_state(1, 4)) - 1) < 1e-10
        assert abs(purity(np.diag([0.5, 0.5])) - 0.5) < 1e-15

    def test_purity_rejects_invalid(self):
        with pytest.raises(InvalidStateError):
            purity(np.diag([0.5, 0.6]))
        with pytest.raises(InvalidStateError):
            purity(np.array([[0.5, 0.1], [0.2, 0.5]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 10), st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_purity_range(self, dim, rank, seed):
        rho = random_density(np.random.default_rng(seed), dim, rank)
        p = purity(rho)
        assert 0 < p <= 1 + 1e-12
        w = np.linalg.eigvalsh(rho)
        assert (abs(p - 1) < 1e-9) == (np.sum(w > 1e-9) == 1)

    def test_validate_psd(self):
        with pytest.raises(InvalidStateError):
            validate_density(np.diag([1.2, -0.2]))

    def test_fidelity_and_distance(self, rng):
        v = random_state(rng, 6)
        rho = np.outer(v, v.conj())
        assert abs(fidelity(v, v) - 1) < 1e-14
        assert abs(fidelity(rho, rho) - 1) < 1e-10
        assert abs(fidelity(rho, v) - 1) < 1e-14
        assert trace_distance(v, rho) < 1e-14
        sigma = random_density(rng, 6)
        # mixed fidelity against the pure formula
        assert abs(fidelity(sigma, v) - fidelity(sigma, rho)) < 1e-10

    def test_embed(self):
        v = embed(fock_state(1, 3), 5)
        assert v.shape == (5,) and v[1] == 1


class TestTruncation:
    def test_vacuum_tail(self):
        assert truncation_report(fock_state(0, 10)).tail_mass == 0.0

    def test_squeezed_r1_dim60(self):
        # the relative tail of the top six levels lies between 1e-8 and 1e-7
        rep = truncation_report(squeezed_vacuum(1.0, 60), guard=6)
        assert 1e-8 < rep.tail_mass < 1e-7
        assert rep.clean is False

    def test_squeezed_r2_dim10(self):
        assert not truncation_report(squeezed_vacuum(2.0, 10)).clean

    def test_two_mode_report(self):
        s = tensor(fock_state(0, 4), fock_state(3, 4))
        assert truncation_report(s).tail_mass == 1.0


class TestKraus:
    def test_identity_limit(self):
        ops = loss_kraus_operators(1.0, 5)
        assert len(ops) == 1 and np.allclose(ops[0], np.eye(5))

    @pytest.mark.parametrize("T0", [0.1, 0.5, 0.9])
    def test_completeness(self, T0):
        ops = loss_kraus_operators(T0, 15)
        s = sum(k.conj().T @ k for k in ops)
        assert np.allclose(s, np.eye(15), atol=1e-12)

    def test_matches_operator_formula(self):
        from math import factorial

        T0, dim = 0.7, 8
        a = annihilation(dim)
        tn = np.diag(np.sqrt(T0) ** np.arange(dim))
        for j, k in enumerate(loss_kraus_operators(T0, dim)):
            ref = (1 - T0) ** (j / 2) / np.sqrt(factorial(j)) * tn @ np.linalg.matrix_power(a, j)
            assert np.allclose(k, ref, atol=1e-14)

    @pytest.mark.parametrize("T0", [0.0, -0.1, 1.5])
    def test_bad_transmittance(self, T0):
        with pytest.raises(InvalidParameterError):
            loss_kraus_operators(T0, 4)


class TestDump:
    @pytest.mark.parametrize("kind", ["vector", "matrix", "two-mode-vector", "two-mode-matrix"])
    def test_roundtrip(self, rng, kind):
        if kind == "vector":
            s = random_state(rng, 5)
        elif kind == "matrix":
            s = random_density(rng, 5)
        else:
            s = TwoModeState(random_state(rng, 6), 2, 3)
            if kind == "two-mode-matrix":
                s = s.to_density()
        obj = json.loads(json.dumps(dump_state(s)))
        assert obj["kind"] == kind
        back = load_state(obj)
        data = s.data if isinstance(s, TwoModeState) else s
        got = back.data if isinstance(back, TwoModeState) else back
        assert np.array_equal(data, got)

    def test_bad_dump(self):
        with pytest.raises(InvalidStateError):
            load_state({"dim": 3, "kind": "vector", "re": [1, 0], "im": [0, 0]})
