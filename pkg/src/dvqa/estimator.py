"""Scikit-learn style front-end for the distributed solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from dvqa.hamiltonian import Hamiltonian, Partition
from dvqa.problems import Graph, PortfolioInstance, maxcut_hamiltonian, portfolio_hamiltonian
from dvqa.trainer import TrainConfig, optimize

__all__ = ["DVQASolver"]


class DVQASolver(BaseEstimator):
    """Estimator wrapper: ``fit`` runs the joint optimization on one instance.

    ``fit`` accepts a :class:`Hamiltonian`, :class:`Graph` (mapped through
    MaxCut), or :class:`PortfolioInstance`. After fitting, ``bitstring_``,
    ``energy_``, ``loss_trace_``, and ``result_`` hold the outcome;
    ``predict`` returns the solution bits. Parameters follow scikit-learn
    conventions (``get_params`` / ``set_params`` / ``clone`` all work).
    """

    def __init__(self, subsystems=2, sizes=None, rank=1, ranks=None, depth=6,
                 iterations=200, learning_rate=0.05, mode="exact", shots=1000,
                 p1=0.0, p2=0.0, restarts=1, extraction_samples=512,
                 real_c=False, bond_dim=2, max_width=None, seed=0):
        self.subsystems = subsystems
        self.sizes = sizes
        self.rank = rank
        self.ranks = ranks
        self.depth = depth
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.mode = mode
        self.shots = shots
        self.p1 = p1
        self.p2 = p2
        self.restarts = restarts
        self.extraction_samples = extraction_samples
        self.real_c = real_c
        self.bond_dim = bond_dim
        self.max_width = max_width
        self.seed = seed

    def _as_hamiltonian(self, problem) -> Hamiltonian:
        if isinstance(problem, Hamiltonian):
            return problem
        if isinstance(problem, Graph):
            return maxcut_hamiltonian(problem)
        if isinstance(problem, PortfolioInstance):
            return portfolio_hamiltonian(problem)
        raise TypeError(
            "fit expects a Hamiltonian, Graph, or PortfolioInstance, "
            f"got {type(problem).__name__}"
        )

    def _partition(self, h: Hamiltonian) -> Partition:
        ranks = self.ranks if self.ranks is not None else self.rank
        if self.sizes is not None:
            return Partition(tuple(self.sizes), ranks, self.max_width)
        return Partition.even(h.num_qubits, self.subsystems, ranks, self.max_width)

    def fit(self, X, y=None):
        """Optimize circuit parameters and the correlation tensor for ``X``."""
        h = self._as_hamiltonian(X)
        part = self._partition(h)
        config = TrainConfig(
            iterations=self.iterations,
            learning_rate=self.learning_rate,
            depth=self.depth,
            mode=self.mode,
            shots=self.shots,
            p1=self.p1,
            p2=self.p2,
            seed=self.seed,
            restarts=self.restarts,
            real_c=self.real_c,
            bond_dim=self.bond_dim,
            extraction_samples=self.extraction_samples,
        )
        result = optimize(h, part, config)
        self.hamiltonian_ = h
        self.partition_ = part
        self.result_ = result
        self.theta_ = result.theta_star
        self.c_ = result.c_star
        self.loss_trace_ = result.loss_trace
        self.bitstring_ = result.best_bitstring
        self.energy_ = result.best_energy
        return self

    def predict(self, X=None) -> np.ndarray:
        """Solution bits of the fitted instance."""
        if not hasattr(self, "bitstring_"):
            raise NotFittedError("call fit before predict")
        return np.array([int(b) for b in self.bitstring_], dtype=int)
