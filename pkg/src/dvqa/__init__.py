"""Distributed variational quantum algorithm (DVQA) simulator.

Solves Ising-encoded combinatorial optimization problems by splitting the
Hamiltonian across small quantum subsystems, simulating each subsystem
circuit classically, and recombining local expectation values through a
trainable normalized correlation tensor.
"""

__version__ = "0.1.0"

from dvqa.hamiltonian import (
    Hamiltonian,
    Partition,
    PartitionedTerm,
    build_hamiltonian,
    classical_energy,
    partition_terms,
)
from dvqa.problems import (
    Graph,
    PortfolioInstance,
    maxcut_hamiltonian,
    portfolio_hamiltonian,
    synth_graph,
    synth_portfolio,
)
from dvqa.ctensor import CorrelationTensor, contract_objective
from dvqa.trainer import TrainConfig, TrainResult, optimize
from dvqa.estimator import DVQASolver

__all__ = [
    "Hamiltonian",
    "Partition",
    "PartitionedTerm",
    "build_hamiltonian",
    "classical_energy",
    "partition_terms",
    "Graph",
    "PortfolioInstance",
    "maxcut_hamiltonian",
    "portfolio_hamiltonian",
    "synth_graph",
    "synth_portfolio",
    "CorrelationTensor",
    "contract_objective",
    "TrainConfig",
    "TrainResult",
    "optimize",
    "DVQASolver",
]
