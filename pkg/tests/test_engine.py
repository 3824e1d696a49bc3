import numpy as np
import pytest

from dvqa.engine import (
    AnsatzSpec,
    NoiseModel,
    apply_ansatz,
    basis_state,
    count_circuits,
    exact_element,
    exact_matrix,
    hadamard_element,
    hadamard_matrix,
    noisy_element,
    noisy_matrix,
)
from oracles import dense_ansatz_unitary, dense_pauli, ry_matrix


def random_theta(spec, seed):
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, spec.num_parameters)


class TestBasisAndAnsatz:
    def test_basis_states(self):
        spec = AnsatzSpec(2, 0)
        np.testing.assert_array_equal(basis_state(spec, 0), [1, 0, 0, 0])
        np.testing.assert_array_equal(basis_state(spec, 3), [0, 0, 0, 1])

    def test_basis_out_of_range(self):
        with pytest.raises(ValueError):
            basis_state(AnsatzSpec(1, 0), 2)

    def test_parameter_count(self):
        spec = AnsatzSpec(4, 3)
        assert spec.num_parameters == 16
        assert spec.num_two_qubit_gates == 9

    def test_zero_angles_identity(self):
        spec = AnsatzSpec(3, 0)
        state = np.random.default_rng(0).standard_normal(8) + 0j
        state /= np.linalg.norm(state)
        np.testing.assert_allclose(apply_ansatz(spec, np.zeros(3), state), state, atol=1e-12)

    def test_ry_pi_flips(self):
        spec = AnsatzSpec(1, 0)
        out = apply_ansatz(spec, [np.pi], basis_state(spec, 0))
        np.testing.assert_allclose(out, [0, 1], atol=1e-12)

    def test_norm_preserved_1000_draws(self):
        spec = AnsatzSpec(3, 2)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            theta = rng.uniform(-np.pi, np.pi, spec.num_parameters)
            out = apply_ansatz(spec, theta, basis_state(spec, int(rng.integers(8))))
            assert abs(np.linalg.norm(out) - 1.0) < 1e-10

    def test_parameter_count_mismatch(self):
        spec = AnsatzSpec(2, 1)
        with pytest.raises(ValueError):
            apply_ansatz(spec, np.zeros(3), basis_state(spec, 0))

    def test_matches_dense_unitary_oracle(self):
        for seed in range(5):
            spec = AnsatzSpec(3, 2)
            theta = random_theta(spec, seed)
            u = dense_ansatz_unitary(3, 2, theta)
            for idx in (0, 3, 7):
                np.testing.assert_allclose(
                    apply_ansatz(spec, theta, basis_state(spec, idx)),
                    u[:, idx],
                    atol=1e-10,
                )


class TestExact:
    def test_identity_short_circuit(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 0)
        assert exact_element(spec, theta, "II", 1, 1) == 1.0
        assert exact_element(spec, theta, "II", 0, 1) == 0.0

    def test_single_qubit_z_is_cosine(self):
        spec = AnsatzSpec(1, 0)
        t = 0.837
        val = exact_element(spec, [t], "Z", 0, 0)
        oracle = (ry_matrix(t).conj().T @ dense_pauli("Z") @ ry_matrix(t))[0, 0]
        assert val == pytest.approx(oracle, abs=1e-12)
        assert val.real == pytest.approx(np.cos(t), abs=1e-12)

    def test_matrix_identity_and_rank_one(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 3)
        np.testing.assert_array_equal(exact_matrix(spec, theta, "II", 3), np.eye(3))
        m = exact_matrix(spec, theta, "ZZ", 1)
        assert m.shape == (1, 1)
        assert m[0, 0] == pytest.approx(exact_element(spec, theta, "ZZ", 0, 0))

    def test_matrix_entrywise_consistency(self):
        spec = AnsatzSpec(2, 2)
        theta = random_theta(spec, 4)
        m = exact_matrix(spec, theta, "ZI", 2)
        for a in range(2):
            for b in range(2):
                assert m[a, b] == pytest.approx(
                    exact_element(spec, theta, "ZI", a, b), abs=1e-12
                )

    def test_matrix_hermitian(self):
        for seed in range(10):
            spec = AnsatzSpec(3, 2)
            theta = random_theta(spec, seed)
            for pauli in ("ZZZ", "XIZ", "YXZ"):
                m = exact_matrix(spec, theta, pauli, 4)
                assert np.max(np.abs(m - m.conj().T)) < 1e-9

    def test_against_dense_oracle(self):
        spec = AnsatzSpec(3, 1)
        theta = random_theta(spec, 8)
        u = dense_ansatz_unitary(3, 1, theta)
        for pauli in ("ZIZ", "XYI"):
            op = u.conj().T @ dense_pauli(pauli) @ u
            m = exact_matrix(spec, theta, pauli, 3)
            # values[a][b] = <b|U^dag P U|a> = op[b, a]
            np.testing.assert_allclose(m, op[:3, :3].T, atol=1e-10)

    def test_rank_exceeds_dimension(self):
        spec = AnsatzSpec(1, 0)
        with pytest.raises(ValueError):
            exact_matrix(spec, [0.1], "Z", 3)


class TestHadamardEstimator:
    def test_identity_short_circuit_exact(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 0)
        val = hadamard_element(spec, theta, "II", 1, 1, 3, seed=0)
        assert val == 1.0 + 0.0j

    def test_zero_shots_rejected(self):
        spec = AnsatzSpec(1, 0)
        with pytest.raises(ValueError):
            hadamard_element(spec, [0.1], "Z", 0, 0, 0, seed=0)

    def test_deterministic_per_seed(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 5)
        a = hadamard_element(spec, theta, "ZX", 0, 1, 500, seed=42)
        b = hadamard_element(spec, theta, "ZX", 0, 1, 500, seed=42)
        assert a == b

    def test_converges_to_exact(self):
        spec = AnsatzSpec(3, 2)
        theta = random_theta(spec, 6)
        exact = exact_element(spec, theta, "ZYX", 1, 2)
        est = hadamard_element(spec, theta, "ZYX", 1, 2, 10**6, seed=9)
        assert abs(est - exact) < 5 / np.sqrt(10**6)

    def test_matrix_hermitian_after_symmetrization(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 7)
        m = hadamard_matrix(spec, theta, "ZZ", 2, 200, seed=1)
        assert np.max(np.abs(m - m.conj().T)) < 1e-12

    def test_shot_noise_scaling(self):
        # empirical std over repeats should follow shots^(-1/2)
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 11)
        exact = exact_element(spec, theta, "ZX", 0, 1)
        stds = []
        shot_grid = [100, 1000, 10000]
        for shots in shot_grid:
            reps = [
                hadamard_element(spec, theta, "ZX", 0, 1, shots, seed=(13, shots, r)).real
                for r in range(200)
            ]
            stds.append(np.std(reps))
        slope = np.polyfit(np.log(shot_grid), np.log(stds), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)
        assert abs(np.mean(reps) - exact.real) < 0.01

    def test_circuit_counter(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 0)
        with count_circuits() as counter:
            hadamard_element(spec, theta, "ZZ", 0, 1, 10, seed=0)
            hadamard_element(spec, theta, "II", 0, 0, 10, seed=0)  # short-circuit
        assert counter.total == 2


class TestNoisy:
    def test_zero_noise_equals_exact(self):
        spec = AnsatzSpec(3, 2)
        theta = random_theta(spec, 2)
        for pauli, a, b in (("ZZI", 0, 0), ("XYZ", 1, 3), ("IZI", 2, 2)):
            assert abs(
                noisy_element(spec, theta, pauli, a, b, NoiseModel(0, 0))
                - exact_element(spec, theta, pauli, a, b)
            ) < 1e-10

    def test_full_depolarizing_kills_z(self):
        spec = AnsatzSpec(1, 0)
        val = noisy_element(spec, [0.37], "Z", 0, 0, NoiseModel(1.0, 0.0))
        assert abs(val) < 1e-12

    def test_magnitude_contracts(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 14)
        noisy = noisy_element(spec, theta, "ZZ", 0, 0, NoiseModel(0.01, 0.2))
        exact = exact_element(spec, theta, "ZZ", 0, 0)
        assert abs(noisy) < abs(exact)

    def test_noise_contraction_diagonal_paulis(self):
        rng = np.random.default_rng(21)
        spec = AnsatzSpec(2, 2)
        for trial in range(20):
            theta = rng.uniform(-np.pi, np.pi, spec.num_parameters)
            pauli = "".join(rng.choice(["I", "Z"], size=2))
            if pauli == "II":
                continue
            a = int(rng.integers(0, 2))
            noisy = noisy_element(spec, theta, pauli, a, a, NoiseModel(0.05, 0.1))
            exact = exact_element(spec, theta, pauli, a, a)
            assert abs(noisy) <= abs(exact) + 1e-9

    def test_matrix_hermitian(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 17)
        m = noisy_matrix(spec, theta, "ZI", 3, NoiseModel(0.02, 0.1))
        assert np.max(np.abs(m - m.conj().T)) < 1e-10

    def test_width_cap(self):
        spec = AnsatzSpec(13, 1)
        with pytest.raises(ValueError):
            noisy_element(spec, np.zeros(spec.num_parameters), "Z" * 13, 0, 0,
                          NoiseModel(0.01, 0.01))

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1, 0.0)
        with pytest.raises(ValueError):
            NoiseModel(0.0, 1.5)
