"""Joint optimization of subsystem circuit parameters and the correlation tensor.

Per iteration both parameter sets are updated with ADAM (simultaneously by
default, alternating when configured): circuit parameters via the
parameter-shift rule, the tensor via the hypersphere tangent gradient
followed by renormalization. Local expectation matrices are cached per
(subsystem, distinct local Pauli) within an evaluation; shot-sampled
evaluations derive one generator stream per (iteration, subsystem, Pauli,
entry) so shifted and unshifted evaluations of an iteration share random
numbers and scheduling order cannot change results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from dvqa import ctensor, engine
from dvqa.ctensor import CorrelationTensor
from dvqa.engine import AnsatzSpec, NoiseModel
from dvqa.hamiltonian import (
    Hamiltonian,
    Partition,
    batch_classical_energies,
    is_diagonal,
    partition_terms,
)
from dvqa._validation import bits_to_string

__all__ = [
    "Evaluation",
    "EXACT",
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "loss",
    "grad_theta",
    "grad_c",
    "adam_step",
    "optimize",
    "reconstruct_state",
    "extract_solution",
    "init_theta",
]

MAX_EXACT_WIDTH = 20
MAX_RECONSTRUCT_QUBITS = 20


@dataclass(frozen=True)
class Evaluation:
    """How local expectation values are produced."""

    mode: str = "exact"  # exact | shots | noisy
    shots: int = 1000
    noise: NoiseModel = NoiseModel()
    seed: int | tuple = 0
    tag: int = 0  # iteration tag mixed into shot streams

    def __post_init__(self):
        if self.mode not in ("exact", "shots", "noisy"):
            raise ValueError(f"unknown evaluation mode {self.mode!r}")
        if self.mode == "shots" and self.shots < 1:
            raise ValueError("shots must be >= 1")


EXACT = Evaluation()


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults match the benchmark protocol."""

    iterations: int = 200
    learning_rate: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    depth: int = 6
    mode: str = "exact"
    shots: int = 1000
    p1: float = 0.0
    p2: float = 0.0
    seed: int = 0
    restarts: int = 1
    real_c: bool = False
    c_mode: str = "auto"
    bond_dim: int = 2
    extraction_samples: int = 512
    train_theta: bool = True
    train_c: bool = True
    alternate: bool = False
    select_by: str = "energy"  # best restart by extracted energy or final loss
    time_budget: float | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.mode not in ("exact", "shots", "noisy"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.select_by not in ("energy", "loss"):
            raise ValueError(f"select_by must be 'energy' or 'loss', got {self.select_by!r}")

    def evaluation(self, seed=0, tag: int = 0) -> Evaluation:
        return Evaluation(
            mode=self.mode,
            shots=self.shots,
            noise=NoiseModel(self.p1, self.p2),
            seed=seed,
            tag=tag,
        )


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n), t=0)


@dataclass
class TrainResult:
    theta_star: list[np.ndarray]
    c_star: CorrelationTensor
    loss_trace: np.ndarray
    best_bitstring: str
    best_energy: float
    wall_time: float
    records: list[tuple] = field(default_factory=list)
    restart_index: int = 0
    completed_iterations: int = 0
    timed_out: bool = False
    max_c_norm_error: float = 0.0
    max_imag_residual: float = 0.0


# --- problem compilation -----------------------------------------------------


class CompiledProblem:
    """Partitioned terms with per-subsystem distinct-Pauli tables."""

    def __init__(self, h: Hamiltonian, part: Partition, depth: int):
        if part.num_qubits != h.num_qubits:
            raise ValueError("partition does not cover the Hamiltonian")
        self.h = h
        self.part = part
        self.specs = [AnsatzSpec(n, depth) for n in part.sizes]
        self.offset = h.offset
        self.weights = h.weights
        split = partition_terms(h, part)
        k_count = part.num_subsystems
        self.block_paulis: list[list[str]] = [[] for _ in range(k_count)]
        index: list[dict[str, int]] = [{} for _ in range(k_count)]
        self.term_legs: list[list[tuple[int, int]]] = []
        for term in split:
            legs = []
            for k, factor in enumerate(term.factors):
                if engine.is_identity(factor):
                    continue
                if factor not in index[k]:
                    index[k][factor] = len(self.block_paulis[k])
                    self.block_paulis[k].append(factor)
                legs.append((k, index[k][factor]))
            self.term_legs.append(legs)

    @property
    def num_terms(self) -> int:
        return len(self.term_legs)


def _check_theta_list(compiled: CompiledProblem, theta) -> list[np.ndarray]:
    if len(theta) != compiled.part.num_subsystems:
        raise ValueError(
            f"expected {compiled.part.num_subsystems} parameter vectors, got {len(theta)}"
        )
    return [np.asarray(t, dtype=float) for t in theta]


def _infer_depth(part: Partition, theta) -> int:
    n0 = part.sizes[0]
    p0 = len(theta[0])
    if p0 % n0 != 0 or p0 // n0 < 1:
        raise ValueError(f"parameter vector of length {p0} does not fit {n0} qubits")
    return p0 // n0 - 1


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def _block_values_batch(compiled: CompiledProblem, k: int, thetas: np.ndarray,
                        ev: Evaluation) -> np.ndarray:
    """Distinct-Pauli expectation matrices, shape (B, n_paulis, R, R)."""
    spec = compiled.specs[k]
    rank = compiled.part.ranks[k]
    paulis = compiled.block_paulis[k]
    thetas = np.atleast_2d(thetas)
    b = thetas.shape[0]
    out = np.empty((b, len(paulis), rank, rank), dtype=complex)
    if not paulis:
        return out
    if ev.mode == "exact":
        states = engine.ansatz_states(spec, thetas, np.arange(rank))
        for p_idx, pauli in enumerate(paulis):
            moved = engine.apply_pauli(pauli, states)
            out[:, p_idx] = np.einsum("bad,bcd->bac", moved, states.conj())
    elif ev.mode == "noisy":
        for alpha in range(rank):
            for beta in range(rank):
                rho = engine.noisy_transition_batch(spec, thetas, alpha, beta, ev.noise)
                for p_idx, pauli in enumerate(paulis):
                    out[:, p_idx, alpha, beta] = engine.trace_pauli(pauli, rho)
    else:  # shots; the stream key excludes the batch row for common random numbers
        base = _seed_tuple(ev.seed)
        for p_idx, pauli in enumerate(paulis):
            key = base + (ev.tag, k, p_idx)
            for row in range(b):
                out[row, p_idx] = engine.hadamard_matrix(
                    spec, thetas[row], pauli, rank, ev.shots, key
                )
    return out


def _unshifted_pieces(compiled: CompiledProblem, theta: list[np.ndarray],
                      ev: Evaluation):
    blockvals = [
        _block_values_batch(compiled, k, theta[k][None, :], ev)[0]
        for k in range(compiled.part.num_subsystems)
    ]
    legs_per_term = [
        {k: blockvals[k][p_idx] for k, p_idx in legs}
        for legs in compiled.term_legs
    ]
    return blockvals, legs_per_term


def _loss_value(compiled: CompiledProblem, c: CorrelationTensor,
                legs_per_term) -> tuple[float, float]:
    total = ctensor.contract_terms(c, legs_per_term, compiled.weights)
    imag = abs(total.imag)
    if imag > ctensor.IMAG_TOL:
        raise ValueError(f"objective has imaginary residue {total.imag:.3e}")
    return float(total.real + compiled.offset), imag


def loss(h: Hamiltonian, part: Partition, theta, c: CorrelationTensor,
         evaluation: Evaluation = EXACT) -> float:
    """Distributed objective for the given parameters.

    The ansatz depth is inferred from the parameter vector lengths.
    """
    compiled = CompiledProblem(h, part, _infer_depth(part, theta))
    theta = _check_theta_list(compiled, theta)
    _, legs_per_term = _unshifted_pieces(compiled, theta, evaluation)
    value, _ = _loss_value(compiled, c, legs_per_term)
    return value


def _shifted_thetas(theta_k: np.ndarray) -> np.ndarray:
    """Rows [t0+, t0-, t1+, t1-, ...] shifted by +-pi/2 per parameter."""
    p = theta_k.shape[0]
    out = np.tile(theta_k, (2 * p, 1))
    for t in range(p):
        out[2 * t, t] += math.pi / 2
        out[2 * t + 1, t] -= math.pi / 2
    return out


def _grad_theta_compiled(compiled: CompiledProblem, theta: list[np.ndarray],
                         c_dense: CorrelationTensor, blockvals, ev: Evaluation
                         ) -> list[np.ndarray]:
    k_count = compiled.part.num_subsystems
    grads = [np.zeros(t.shape[0]) for t in theta]
    # terms grouped by the subsystem they touch
    touching: list[list[tuple[int, int]]] = [[] for _ in range(k_count)]
    for i, legs in enumerate(compiled.term_legs):
        for k, p_idx in legs:
            touching[k].append((i, p_idx))
    for g in range(k_count):
        if not touching[g]:
            continue
        shifted = _block_values_batch(compiled, g, _shifted_thetas(theta[g]), ev)
        dvals = (shifted[0::2] - shifted[1::2]) / 2.0  # (P_g, n_paulis, R, R)
        acc = np.zeros(theta[g].shape[0], dtype=complex)
        for i, p_idx in touching[g]:
            other = {
                k: blockvals[k][q_idx]
                for k, q_idx in compiled.term_legs[i]
                if k != g
            }
            w_env = ctensor.dense_term_environment(c_dense, other, g)
            acc += compiled.weights[i] * np.einsum("tab,ba->t", dvals[:, p_idx], w_env)
        grads[g] = acc.real
    return grads


def grad_theta(h: Hamiltonian, part: Partition, theta, c: CorrelationTensor,
               evaluation: Evaluation = EXACT) -> list[np.ndarray]:
    """Parameter-shift gradient of the objective, one vector per subsystem.

    Exact for Y-rotation circuits and unbiased under shot sampling; the
    rule also holds in noisy mode because the channels do not depend on
    the rotation angles.
    """
    compiled = CompiledProblem(h, part, _infer_depth(part, theta))
    theta = _check_theta_list(compiled, theta)
    blockvals, _ = _unshifted_pieces(compiled, theta, evaluation)
    return _grad_theta_compiled(compiled, theta, ctensor.to_dense(c), blockvals, evaluation)


def _grad_c_compiled(compiled: CompiledProblem, c_dense: CorrelationTensor,
                     legs_per_term, real: bool) -> np.ndarray:
    mc = compiled.offset * c_dense.values.astype(complex)
    for w, legs in zip(compiled.weights, legs_per_term):
        mc = mc + w * ctensor._dense_apply_legs(c_dense, legs)
    g = 2.0 * mc
    if real:
        g = g.real.astype(complex)
    lam = 0.5 * np.vdot(c_dense.values, g).real
    return g - 2.0 * lam * c_dense.values


def grad_c(h: Hamiltonian, part: Partition, theta, c: CorrelationTensor,
           evaluation: Evaluation = EXACT, real: bool = False) -> np.ndarray:
    """Hypersphere tangent gradient with respect to the tensor entries.

    Returns an array shaped like the dense (squeezed) entries: the
    unconstrained gradient 2 M C minus 2 lambda C with
    lambda = Re(<C, 2MC>)/2, so Re(<C, result>) = 0.
    """
    compiled = CompiledProblem(h, part, _infer_depth(part, theta))
    theta = _check_theta_list(compiled, theta)
    _, legs_per_term = _unshifted_pieces(compiled, theta, evaluation)
    return _grad_c_compiled(compiled, ctensor.to_dense(c), legs_per_term, real)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              config: TrainConfig) -> tuple[np.ndarray, AdamState]:
    """One ADAM update on flat real parameter vectors."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state shapes disagree")
    t = state.t + 1
    m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * grads
    v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * grads**2
    m_hat = m / (1.0 - config.adam_beta1**t)
    v_hat = v / (1.0 - config.adam_beta2**t)
    updated = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return updated, AdamState(m=m, v=v, t=t)


def init_theta(part: Partition, depth: int, seed) -> list[np.ndarray]:
    """Per-subsystem parameter vectors, uniform in [-pi, pi)."""
    rng = np.random.default_rng(seed)
    return [
        rng.uniform(-math.pi, math.pi, size=AnsatzSpec(n, depth).num_parameters)
        for n in part.sizes
    ]


def _pack_c(values: np.ndarray, real_c: bool) -> np.ndarray:
    flat = values.ravel()
    if real_c:
        return flat.real.copy()
    return np.concatenate([flat.real, flat.imag])


def _unpack_c(x: np.ndarray, shape, real_c: bool) -> np.ndarray:
    if real_c:
        return x.reshape(shape).astype(complex)
    half = x.shape[0] // 2
    return (x[:half] + 1j * x[half:]).reshape(shape)


def optimize(h: Hamiltonian, part: Partition, config: TrainConfig) -> TrainResult:
    """Run ``config.restarts`` trainings and keep the best one.

    Restarts are ranked by extracted energy (default) or final loss per
    ``config.select_by``; ties break toward the lowest restart index.
    Requires a diagonal Hamiltonian (solution extraction scores basis
    states).
    """
    if not is_diagonal(h):
        raise ValueError("optimize requires a diagonal Hamiltonian")
    if config.mode == "exact" and part.width > MAX_EXACT_WIDTH:
        raise ValueError(
            f"subsystem width {part.width} too large for exact mode "
            f"(limit {MAX_EXACT_WIDTH})"
        )
    started = time.perf_counter()
    best: TrainResult | None = None
    for restart in range(config.restarts):
        result = _optimize_single(h, part, config, restart, started)
        score = result.best_energy if config.select_by == "energy" else result.loss_trace[-1]
        if best is None or score < best_score:
            result.restart_index = restart
            best = result
            best_score = score
        if result.timed_out:
            break
    best.wall_time = time.perf_counter() - started
    return best


def _optimize_single(h: Hamiltonian, part: Partition, config: TrainConfig,
                     restart: int, started: float) -> TrainResult:
    compiled = CompiledProblem(h, part, config.depth)
    theta = init_theta(part, config.depth, [config.seed, restart, 0])
    c = ctensor.init_random(
        part.ranks, mode=config.c_mode, bond_dim=config.bond_dim,
        seed=[config.seed, restart, 1], real=config.real_c,
    )
    c = ctensor.to_dense(c)
    shot_seed = (config.seed, restart, 3)

    theta_sizes = [t.shape[0] for t in theta]
    theta_flat = np.concatenate(theta)
    state_theta = AdamState.zeros(theta_flat.shape[0])
    c_x = _pack_c(c.values, config.real_c)
    state_c = AdamState.zeros(c_x.shape[0])

    trace = []
    records = []
    max_norm_err = 0.0
    max_imag = 0.0
    timed_out = False
    completed = 0

    def split_theta(flat):
        out, at = [], 0
        for n in theta_sizes:
            out.append(flat[at:at + n])
            at += n
        return out

    for it in range(config.iterations):
        ev = config.evaluation(seed=shot_seed, tag=it)
        theta = split_theta(theta_flat)
        blockvals, legs_per_term = _unshifted_pieces(compiled, theta, ev)
        value, imag = _loss_value(compiled, c, legs_per_term)
        trace.append(value)
        max_imag = max(max_imag, imag)

        do_theta = config.train_theta and (not config.alternate or it % 2 == 0)
        do_c = config.train_c and (not config.alternate or it % 2 == 1)

        gt_norm = 0.0
        if do_theta:
            g_theta = _grad_theta_compiled(compiled, theta, c, blockvals, ev)
            g_flat = np.concatenate(g_theta) if g_theta else np.zeros(0)
            gt_norm = float(np.linalg.norm(g_flat))
            theta_flat, state_theta = adam_step(theta_flat, g_flat, state_theta, config)
        gc_norm = 0.0
        if do_c:
            g_c = _grad_c_compiled(compiled, c, legs_per_term, config.real_c)
            gx = _pack_c(g_c, config.real_c)
            gc_norm = float(np.linalg.norm(gx))
            c_x, state_c = adam_step(c_x, gx, state_c, config)
            c = ctensor.renormalize(CorrelationTensor(
                part.ranks, values=_unpack_c(c_x, c.values.shape, config.real_c)
            ))
            c_x = _pack_c(c.values, config.real_c)
        norm_err = abs(c.norm() ** 2 - 1.0)
        max_norm_err = max(max_norm_err, norm_err)
        records.append((it, value, gt_norm, gc_norm, c.norm()))
        completed = it + 1
        if config.time_budget is not None and time.perf_counter() - started > config.time_budget:
            timed_out = True
            break

    theta = split_theta(theta_flat)
    ev = config.evaluation(seed=shot_seed, tag=config.iterations)
    _, legs_per_term = _unshifted_pieces(compiled, theta, ev)
    value, imag = _loss_value(compiled, c, legs_per_term)
    trace.append(value)
    max_imag = max(max_imag, imag)

    bitstring, energy = extract_solution(
        h, part, theta, c, config.extraction_samples, (config.seed, restart, 2)
    )
    return TrainResult(
        theta_star=theta,
        c_star=c,
        loss_trace=np.array(trace),
        best_bitstring=bitstring,
        best_energy=energy,
        wall_time=0.0,
        records=records,
        completed_iterations=completed,
        timed_out=timed_out,
        max_c_norm_error=max_norm_err,
        max_imag_residual=max_imag,
    )


def reconstruct_state(part: Partition, theta, c: CorrelationTensor) -> np.ndarray:
    """Global statevector sum_alpha C_alpha (x)_k U_k |alpha_k>.

    Subsystem-major bit ordering: block 0 holds the most significant bits.
    The result is renormalized against floating-point drift (block basis
    states are orthonormal, so the norm is 1 up to rounding).
    """
    if part.num_qubits > MAX_RECONSTRUCT_QUBITS:
        raise ValueError(
            f"reconstruction limited to {MAX_RECONSTRUCT_QUBITS} qubits, "
            f"got {part.num_qubits}"
        )
    theta = [np.asarray(t, dtype=float) for t in theta]
    depth = _infer_depth(part, theta)
    tensor = ctensor.to_dense(c).full_array()
    for k, n in enumerate(part.sizes):
        spec = AnsatzSpec(n, depth)
        states = engine.ansatz_states(spec, theta[k], np.arange(part.ranks[k]))[0]
        tensor = np.tensordot(tensor, states, axes=([0], [0]))
    psi = tensor.ravel()
    return psi / np.linalg.norm(psi)


def extract_solution(h: Hamiltonian, part: Partition, theta, c: CorrelationTensor,
                     samples: int, seed) -> tuple[str, float]:
    """Sample candidate bitstrings and rescore them classically.

    Draws the composite basis index from |C|^2, then per subsystem samples
    a bitstring from the evolved basis state, and returns the best of
    ``samples`` candidates under ``classical_energy``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    theta = [np.asarray(t, dtype=float) for t in theta]
    depth = _infer_depth(part, theta)
    dense = ctensor.to_dense(c)
    rng = np.random.default_rng(list(_seed_tuple(seed)))
    probs = np.abs(dense.values.ravel()) ** 2
    probs = probs / probs.sum()
    flat_alpha = rng.choice(probs.shape[0], size=samples, p=probs)
    shape = dense.values.shape if dense.values.ndim else (1,)
    multi = np.unravel_index(flat_alpha, shape)
    bits = np.empty((samples, h.num_qubits), dtype=np.uint8)
    bounds = part.boundaries
    for k, n in enumerate(part.sizes):
        spec = AnsatzSpec(n, depth)
        pos = dense.axis_position(k)
        alpha_k = multi[pos] if pos is not None else np.zeros(samples, dtype=int)
        block_bits = np.empty(samples, dtype=int)
        for a in np.unique(alpha_k):
            rows = np.nonzero(alpha_k == a)[0]
            state = engine.ansatz_states(spec, theta[k], [int(a)])[0, 0]
            p_k = np.abs(state) ** 2
            p_k = p_k / p_k.sum()
            block_bits[rows] = rng.choice(spec.dim, size=rows.shape[0], p=p_k)
        for j in range(n):
            bits[:, bounds[k] + j] = (block_bits >> (n - 1 - j)) & 1
    energies = batch_classical_energies(h, bits)
    best = int(np.argmin(energies))
    return bits_to_string(bits[best]), float(energies[best])
