"""Subsystem circuit engine: local expectation values in three modes.

The ansatz is fixed: one initial layer of Y-rotations, then ``depth``
repetitions of [CNOT ladder (control j -> target j+1), Y-rotation layer].
Parameter vectors have length ``num_qubits * (depth + 1)``, ordered layer by
layer, qubit 0 first within a layer.

Basis indices put qubit 0 at the most significant bit. All evaluators
return entries values[alpha][beta] = <beta| U(theta)^dag P U(theta) |alpha>.

Evaluation modes
----------------
exact     statevector arithmetic.
hadamard  shot sampling of an ancilla interference circuit: the subsystem
          starts in |beta>, a controlled X-string on the ancilla=1 branch
          maps it to |alpha>, U(theta) acts on the system, and the rotated
          product basis is sampled. The real part is the (X x P)
          expectation, the imaginary part the (Y x P) expectation.
noisy     density-matrix evolution with a depolarizing channel after every
          gate, plus one single-qubit channel per qubit for state
          preparation and one per qubit for the measurement basis change;
          entries with max(alpha, beta) >= 2 add ceil(log2(max+1))
          two-qubit channels for the basis-superposition preparation.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from dvqa._validation import check_pauli_string, check_probability

__all__ = [
    "AnsatzSpec",
    "NoiseModel",
    "basis_state",
    "apply_ansatz",
    "exact_element",
    "exact_matrix",
    "hadamard_element",
    "hadamard_matrix",
    "noisy_element",
    "noisy_matrix",
    "count_circuits",
    "CircuitCounter",
]


@dataclass(frozen=True)
class AnsatzSpec:
    """Shape of one subsystem's hardware-efficient ansatz."""

    num_qubits: int
    depth: int

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("ansatz needs at least one qubit")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    @property
    def num_parameters(self) -> int:
        return self.num_qubits * (self.depth + 1)

    @property
    def num_two_qubit_gates(self) -> int:
        return self.depth * (self.num_qubits - 1)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


@dataclass(frozen=True)
class NoiseModel:
    """Single- and two-qubit depolarizing error probabilities."""

    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        check_probability(self.p1, "p1")
        check_probability(self.p2, "p2")


class CircuitCounter:
    """Counts sampled circuit executions (one per estimator branch)."""

    def __init__(self):
        self.total = 0

    def add(self, n: int = 1) -> None:
        self.total += n


_ACTIVE_COUNTERS: list[CircuitCounter] = []


@contextmanager
def count_circuits():
    """Count circuits issued by sampled evaluations inside the block."""
    counter = CircuitCounter()
    _ACTIVE_COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _ACTIVE_COUNTERS.remove(counter)


def _record_circuits(n: int) -> None:
    for counter in _ACTIVE_COUNTERS:
        counter.add(n)


# --- basis states and gates ------------------------------------------------


def basis_state(spec: AnsatzSpec, index: int) -> np.ndarray:
    """Unit vector for computational basis state ``index`` (qubit 0 = MSB)."""
    if not 0 <= index < spec.dim:
        raise ValueError(f"basis index {index} out of range for {spec.num_qubits} qubits")
    state = np.zeros(spec.dim, dtype=complex)
    state[index] = 1.0
    return state


@lru_cache(maxsize=None)
def _cnot_perm(num_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    cbit = (idx >> (num_qubits - 1 - control)) & 1
    perm = idx ^ (cbit << (num_qubits - 1 - target))
    perm.setflags(write=False)
    return perm


def _apply_ry(states: np.ndarray, num_qubits: int, qubit: int, angles) -> np.ndarray:
    """Ry(angle) on one qubit of a (B, 2^d) batch; ``angles`` scalar or (B,)."""
    b = states.shape[0]
    left = 2**qubit
    right = 2 ** (num_qubits - 1 - qubit)
    v = states.reshape(b, left, 2, right)
    half = np.asarray(angles) / 2.0
    c = np.cos(half).reshape(-1, 1, 1)
    s = np.sin(half).reshape(-1, 1, 1)
    v0 = c * v[:, :, 0, :] - s * v[:, :, 1, :]
    v1 = s * v[:, :, 0, :] + c * v[:, :, 1, :]
    out = np.empty_like(v)
    out[:, :, 0, :] = v0
    out[:, :, 1, :] = v1
    return out.reshape(b, -1)


def _ansatz_batch(spec: AnsatzSpec, thetas: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Apply the ansatz row-wise: thetas (B, P), states (B, 2^d)."""
    d = spec.num_qubits
    layers = thetas.reshape(thetas.shape[0], spec.depth + 1, d)
    for q in range(d):
        states = _apply_ry(states, d, q, layers[:, 0, q])
    for layer in range(1, spec.depth + 1):
        for q in range(d - 1):
            states = states[:, _cnot_perm(d, q, q + 1)]
        for q in range(d):
            states = _apply_ry(states, d, q, layers[:, layer, q])
    return states


def _check_theta(spec: AnsatzSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.num_parameters,):
        raise ValueError(
            f"expected {spec.num_parameters} parameters, got shape {theta.shape}"
        )
    return theta


def apply_ansatz(spec: AnsatzSpec, theta, state) -> np.ndarray:
    """Apply U(theta) to one statevector; norm is preserved."""
    theta = _check_theta(spec, theta)
    state = np.asarray(state, dtype=complex)
    if state.shape != (spec.dim,):
        raise ValueError(f"state must have dimension {spec.dim}")
    return _ansatz_batch(spec, theta[None, :], state[None, :].copy())[0]


def ansatz_states(spec: AnsatzSpec, thetas: np.ndarray, indices) -> np.ndarray:
    """Evolved basis states as an array of shape (B, len(indices), 2^d).

    ``thetas`` may be one vector (P,) or a batch (B, P). Row b, slot r holds
    U(thetas[b]) |indices[r]>.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    indices = np.asarray(indices, dtype=int)
    if indices.size and (indices.min() < 0 or indices.max() >= spec.dim):
        raise ValueError(f"basis index out of range for {spec.num_qubits} qubits")
    b, nidx = thetas.shape[0], indices.shape[0]
    states = np.zeros((b * nidx, spec.dim), dtype=complex)
    states[np.arange(b * nidx), np.tile(indices, b)] = 1.0
    tiled = np.repeat(thetas, nidx, axis=0)
    return _ansatz_batch(spec, tiled, states).reshape(b, nidx, spec.dim)


# --- Pauli actions ----------------------------------------------------------


@lru_cache(maxsize=None)
def _pauli_action(pauli: str) -> tuple[np.ndarray, np.ndarray, bool]:
    """Return (perm, phase, is_diagonal) with P|x> = phase[x] |perm-inverse...|.

    Encoded so that (P @ v) = (phase * v)[perm], using perm[y] = y ^ flip.
    """
    d = len(pauli)
    idx = np.arange(2**d)
    flip = 0
    phase = np.ones(2**d, dtype=complex)
    diagonal = True
    for q, letter in enumerate(pauli):
        shift = d - 1 - q
        bit = (idx >> shift) & 1
        if letter == "Z":
            phase = phase * np.where(bit, -1.0, 1.0)
        elif letter == "X":
            flip |= 1 << shift
            diagonal = False
        elif letter == "Y":
            flip |= 1 << shift
            diagonal = False
            phase = phase * np.where(bit, -1j, 1j)
    perm = idx ^ flip
    perm.setflags(write=False)
    phase.setflags(write=False)
    return perm, phase, diagonal


def apply_pauli(pauli: str, states: np.ndarray) -> np.ndarray:
    """P applied along the last axis of a state batch."""
    perm, phase, _ = _pauli_action(pauli)
    return (states * phase)[..., perm]


def is_identity(pauli: str) -> bool:
    return set(pauli) <= {"I"}


# --- exact mode -------------------------------------------------------------


def exact_element(spec: AnsatzSpec, theta, pauli: str, alpha: int, beta: int) -> complex:
    """<beta| U^dag P U |alpha> by statevector arithmetic."""
    check_pauli_string(pauli, spec.num_qubits)
    if is_identity(pauli):
        return complex(1.0 if alpha == beta else 0.0)
    states = ansatz_states(spec, _check_theta(spec, theta), [alpha, beta])[0]
    return complex(np.vdot(states[1], apply_pauli(pauli, states[0])))


def exact_matrix(spec: AnsatzSpec, theta, pauli: str, rank: int) -> np.ndarray:
    """All entries values[alpha][beta] for alpha, beta < rank."""
    check_pauli_string(pauli, spec.num_qubits)
    if rank > spec.dim:
        raise ValueError(f"rank {rank} exceeds subsystem dimension {spec.dim}")
    if is_identity(pauli):
        return np.eye(rank, dtype=complex)
    states = ansatz_states(spec, _check_theta(spec, theta), np.arange(rank))[0]
    return matrix_from_states(states, pauli)


def matrix_from_states(states: np.ndarray, pauli: str) -> np.ndarray:
    """values[alpha][beta] = <beta|P|alpha> for rows of evolved basis states."""
    return apply_pauli(pauli, states) @ states.conj().T


# --- hadamard-test sampling -------------------------------------------------

_H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
_HSDG_GATE = _H_GATE @ np.diag([1.0, -1.0j])


def _apply_1q(states: np.ndarray, num_qubits: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    b = states.shape[0]
    left = 2**qubit
    right = 2 ** (num_qubits - 1 - qubit)
    v = states.reshape(b, left, 2, right)
    out = np.einsum("ij,bljr->blir", gate, v)
    return out.reshape(b, -1)


def _measurement_signs(num_qubits: int, qubits) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    signs = np.ones(2**num_qubits)
    for q in qubits:
        signs *= np.where((idx >> (num_qubits - 1 - q)) & 1, -1.0, 1.0)
    return signs


def _sample_branch(psi: np.ndarray, num_qubits: int, pauli_ext: str,
                   shots: int, rng: np.random.Generator) -> float:
    """Rotate to the measurement basis of the Pauli string and sample."""
    _record_circuits(1)
    for q, letter in enumerate(pauli_ext):
        if letter == "X":
            psi = _apply_1q(psi, num_qubits, q, _H_GATE)
        elif letter == "Y":
            psi = _apply_1q(psi, num_qubits, q, _HSDG_GATE)
    probs = np.abs(psi[0]) ** 2
    probs = probs / probs.sum()
    signs = _measurement_signs(num_qubits, [q for q, c in enumerate(pauli_ext) if c != "I"])
    counts = rng.multinomial(shots, probs)
    return float(counts @ signs) / shots


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence(list(seed))
    return np.random.SeedSequence(seed)


def hadamard_element(spec: AnsatzSpec, theta, pauli: str, alpha: int, beta: int,
                     shots: int, seed) -> complex:
    """Unbiased shot estimate of the exact transition element.

    Runs one sampled circuit per part (real, then imaginary) with ``shots``
    samples each. Identity strings short-circuit to the exact Kronecker
    delta without sampling. Deterministic for a given seed; a tuple seed
    keys an independent stream per evaluation site.
    """
    check_pauli_string(pauli, spec.num_qubits)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if is_identity(pauli):
        return complex(1.0 if alpha == beta else 0.0)
    theta = _check_theta(spec, theta)
    states = ansatz_states(spec, theta, [beta, alpha])[0]
    # ancilla is the new most significant qubit: branch 0 carries |beta>
    psi = np.concatenate([states[0], states[1]])[None, :] / math.sqrt(2.0)
    rng_re, rng_im = (np.random.default_rng(s) for s in _seed_sequence(seed).spawn(2))
    real = _sample_branch(psi, spec.num_qubits + 1, "X" + pauli, shots, rng_re)
    imag = _sample_branch(psi, spec.num_qubits + 1, "Y" + pauli, shots, rng_im)
    return complex(real, imag)


def hadamard_matrix(spec: AnsatzSpec, theta, pauli: str, rank: int,
                    shots: int, seed) -> np.ndarray:
    """Shot-sampled matrix, symmetrized so the assembled operator is Hermitian."""
    check_pauli_string(pauli, spec.num_qubits)
    if rank > spec.dim:
        raise ValueError(f"rank {rank} exceeds subsystem dimension {spec.dim}")
    if is_identity(pauli):
        return np.eye(rank, dtype=complex)
    ss = _seed_sequence(seed)
    values = np.empty((rank, rank), dtype=complex)
    for alpha in range(rank):
        for beta in range(rank):
            entry_seed = np.random.SeedSequence(
                entropy=ss.entropy, spawn_key=ss.spawn_key + (alpha, beta)
            )
            values[alpha, beta] = hadamard_element(
                spec, theta, pauli, alpha, beta, shots, entry_seed
            )
    return (values + values.conj().T) / 2.0


# --- depolarizing-noise mode ------------------------------------------------

_MAX_NOISY_QUBITS = 12


def _rho_apply_ry(rho: np.ndarray, num_qubits: int, qubit: int, angles) -> np.ndarray:
    """Ry conjugation on a (B, 2^d, 2^d) batch of generalized density matrices.

    Mutates and returns ``rho``; Ry is real so the bra side needs no conjugate.
    """
    b, dim = rho.shape[0], rho.shape[1]
    left = 2**qubit
    right = 2 ** (num_qubits - 1 - qubit)
    half = np.broadcast_to(np.asarray(angles, dtype=float) / 2.0, (b,))
    c4 = np.cos(half).reshape(b, 1, 1, 1)
    s4 = np.sin(half).reshape(b, 1, 1, 1)
    v = rho.reshape(b, left, 2, right * dim)
    v0 = v[:, :, 0:1]
    v1 = v[:, :, 1:2]
    new0 = c4 * v0 - s4 * v1
    v1 *= c4
    v1 += s4 * v0
    v0[...] = new0
    c5 = c4.reshape(b, 1, 1, 1, 1)
    s5 = s4.reshape(b, 1, 1, 1, 1)
    w = rho.reshape(b, dim, left, 2, right)
    w0 = w[:, :, :, 0:1]
    w1 = w[:, :, :, 1:2]
    new0 = c5 * w0 - s5 * w1
    w1 *= c5
    w1 += s5 * w0
    w0[...] = new0
    return rho


def _rho_apply_perm(rho: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return rho[:, perm[:, None], perm[None, :]]


def _rho_depolarize_1q(rho: np.ndarray, num_qubits: int, qubit: int, p: float) -> np.ndarray:
    """Mutates and returns ``rho``."""
    if p == 0.0:
        return rho
    b = rho.shape[0]
    left = 2**qubit
    right = 2 ** (num_qubits - 1 - qubit)
    v = rho.reshape(b, left, 2, right, left, 2, right)
    tr = v[:, :, 0, :, :, 0, :] + v[:, :, 1, :, :, 1, :]
    tr *= p / 2.0
    rho *= 1.0 - p
    v[:, :, 0, :, :, 0, :] += tr
    v[:, :, 1, :, :, 1, :] += tr
    return rho


def _rho_depolarize_2q(rho: np.ndarray, num_qubits: int, qubit: int, p: float) -> np.ndarray:
    """Two-qubit depolarizing channel on the adjacent pair (qubit, qubit + 1).

    Mutates and returns ``rho``.
    """
    if p == 0.0:
        return rho
    b = rho.shape[0]
    left = 2**qubit
    right = 2 ** (num_qubits - 2 - qubit)
    v = rho.reshape(b, left, 4, right, left, 4, right)
    tr = v[:, :, 0, :, :, 0, :] + v[:, :, 1, :, :, 1, :]
    tr += v[:, :, 2, :, :, 2, :]
    tr += v[:, :, 3, :, :, 3, :]
    tr *= p / 4.0
    rho *= 1.0 - p
    for j in range(4):
        v[:, :, j, :, :, j, :] += tr
    return rho


def noisy_transition_batch(spec: AnsatzSpec, thetas: np.ndarray, alpha: int, beta: int,
                           noise: NoiseModel) -> np.ndarray:
    """Evolve |alpha><beta| through the noisy circuit for a batch of thetas.

    Returns the generalized density matrices after the measurement-basis
    channels; callers trace against observables. Linearity of the channels
    makes the alpha != beta case well defined.
    """
    d = spec.num_qubits
    if d > _MAX_NOISY_QUBITS:
        raise ValueError(
            f"noisy mode supports at most {_MAX_NOISY_QUBITS} qubits, got {d}"
        )
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    b = thetas.shape[0]
    layers = thetas.reshape(b, spec.depth + 1, d)
    rho = np.zeros((b, spec.dim, spec.dim), dtype=complex)
    rho[:, alpha, beta] = 1.0
    # state preparation channels
    for q in range(d):
        rho = _rho_depolarize_1q(rho, d, q, noise.p1)
    # basis-superposition preparation channels
    n_pairs = math.ceil(math.log2(max(alpha, beta) + 1)) if max(alpha, beta) >= 1 else 0
    for j in range(n_pairs):
        if d >= 2:
            rho = _rho_depolarize_2q(rho, d, j % (d - 1), noise.p2)
        else:
            rho = _rho_depolarize_1q(rho, d, 0, noise.p2)
    for q in range(d):
        rho = _rho_apply_ry(rho, d, q, layers[:, 0, q])
        rho = _rho_depolarize_1q(rho, d, q, noise.p1)
    for layer in range(1, spec.depth + 1):
        for q in range(d - 1):
            rho = _rho_apply_perm(rho, _cnot_perm(d, q, q + 1))
            rho = _rho_depolarize_2q(rho, d, q, noise.p2)
        for q in range(d):
            rho = _rho_apply_ry(rho, d, q, layers[:, layer, q])
            rho = _rho_depolarize_1q(rho, d, q, noise.p1)
    # measurement basis-change channels
    for q in range(d):
        rho = _rho_depolarize_1q(rho, d, q, noise.p1)
    return rho


def trace_pauli(pauli: str, rho: np.ndarray) -> np.ndarray:
    """Tr(P rho) along the last two axes of a (B, dim, dim) batch."""
    perm, phase, _ = _pauli_action(pauli)
    idx = np.arange(rho.shape[-1])
    return np.einsum("x,bx->b", phase, rho[:, idx, perm])


def noisy_element(spec: AnsatzSpec, theta, pauli: str, alpha: int, beta: int,
                  noise: NoiseModel) -> complex:
    """Transition element under the depolarizing-noise circuit model."""
    check_pauli_string(pauli, spec.num_qubits)
    if is_identity(pauli):
        return complex(1.0 if alpha == beta else 0.0)
    theta = _check_theta(spec, theta)
    rho = noisy_transition_batch(spec, theta[None, :], alpha, beta, noise)
    return complex(trace_pauli(pauli, rho)[0])


def noisy_matrix(spec: AnsatzSpec, theta, pauli: str, rank: int,
                 noise: NoiseModel) -> np.ndarray:
    check_pauli_string(pauli, spec.num_qubits)
    if rank > spec.dim:
        raise ValueError(f"rank {rank} exceeds subsystem dimension {spec.dim}")
    if is_identity(pauli):
        return np.eye(rank, dtype=complex)
    theta = _check_theta(spec, theta)
    values = np.empty((rank, rank), dtype=complex)
    for alpha in range(rank):
        for beta in range(rank):
            values[alpha, beta] = noisy_element(spec, theta, pauli, alpha, beta, noise)
    return values
