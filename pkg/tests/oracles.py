"""Independent dense-matrix oracles shared across the test suite.

Everything here is deliberately naive (kron products, full enumeration) so
it cannot share bugs with the library's sparse/statevector paths.
"""

import numpy as np

from dvqa.hamiltonian import Hamiltonian, build_hamiltonian

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_pauli(string: str) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for letter in string:
        out = np.kron(out, PAULI_MATS[letter])
    return out


def dense_hamiltonian(h: Hamiltonian) -> np.ndarray:
    dim = 2**h.num_qubits
    out = np.eye(dim, dtype=complex) * h.offset
    for weight, string in h.terms:
        out += weight * dense_pauli(string)
    return out


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def dense_ansatz_unitary(num_qubits: int, depth: int, theta: np.ndarray) -> np.ndarray:
    """Kron/matmul construction of the layered ansatz unitary."""
    def layer(angles):
        out = np.array([[1.0 + 0.0j]])
        for a in angles:
            out = np.kron(out, ry_matrix(a))
        return out

    def cnot(control, target):
        dim = 2**num_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        for x in range(dim):
            cbit = (x >> (num_qubits - 1 - control)) & 1
            y = x ^ (cbit << (num_qubits - 1 - target)) if cbit else x
            mat[y, x] = 1.0
        return mat

    rows = np.asarray(theta, dtype=float).reshape(depth + 1, num_qubits)
    u = layer(rows[0])
    for l in range(1, depth + 1):
        for q in range(num_qubits - 1):
            u = cnot(q, q + 1) @ u
        u = layer(rows[l]) @ u
    return u


def enumerate_minimum(h: Hamiltonian, descending: bool = False) -> tuple[str, float]:
    """Second brute-force implementation with an explicit tie rule."""
    n = h.num_qubits
    order = range(2**n - 1, -1, -1) if descending else range(2**n)
    best_bits, best_val = None, np.inf
    for idx in order:
        bits = format(idx, f"0{n}b")
        val = 0.0 + h.offset
        for weight, string in h.terms:
            prod = 1.0
            for j, c in enumerate(string):
                if c == "Z" and bits[j] == "1":
                    prod = -prod
            val += weight * prod
        if val < best_val or (val == best_val and (best_bits is None or bits < best_bits)):
            best_val = val
            best_bits = bits
    return best_bits, float(val if best_bits is None else best_val)


def random_diagonal_hamiltonian(n: int, num_terms: int, seed: int) -> Hamiltonian:
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(num_terms):
        string = "".join(rng.choice(["I", "Z"], size=n))
        terms.append((float(rng.uniform(-1, 1)), string))
    return build_hamiltonian(n, terms, float(rng.uniform(-1, 1)))
