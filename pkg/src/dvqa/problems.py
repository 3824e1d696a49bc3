"""Problem front-ends: MaxCut graphs and mean-variance portfolio instances.

Both map to diagonal Ising Hamiltonians with the shared spin convention
z = 1 - 2x. For portfolios, z = -1 (x = 1) means the asset is selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dvqa._validation import as_bit_array, check_positive_int, check_symmetric
from dvqa.hamiltonian import Hamiltonian, build_hamiltonian

__all__ = [
    "Graph",
    "PortfolioInstance",
    "ParseError",
    "maxcut_hamiltonian",
    "cut_value",
    "portfolio_hamiltonian",
    "portfolio_objective",
    "load_graph",
    "save_graph",
    "load_portfolio",
    "save_portfolio",
    "synth_graph",
    "synth_portfolio",
]


class ParseError(ValueError):
    """Raised when an instance file does not match its documented format."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with 0-indexed nodes.

    Edges are canonicalized to u < v; duplicate pairs are rejected.
    """

    num_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def __init__(self, num_nodes: int, edges):
        num_nodes = check_positive_int(num_nodes, "num_nodes")
        seen = set()
        canon = []
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ValueError(f"edge ({u},{v}) out of range for {num_nodes} nodes")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
            canon.append((u, v, w))
        object.__setattr__(self, "num_nodes", num_nodes)
        object.__setattr__(self, "edges", tuple(canon))


@dataclass(frozen=True)
class PortfolioInstance:
    """Expected returns, covariance risk matrix, and risk tolerance in [0, 1]."""

    returns: np.ndarray
    covariance: np.ndarray
    risk_tolerance: float

    def __init__(self, returns, covariance, risk_tolerance: float):
        returns = np.asarray(returns, dtype=float)
        if returns.ndim != 1:
            raise ValueError("returns must be a vector")
        covariance = check_symmetric(covariance, tol=1e-12, name="covariance")
        if covariance.shape[0] != returns.shape[0]:
            raise ValueError(
                f"covariance is {covariance.shape[0]}x{covariance.shape[0]} "
                f"but there are {returns.shape[0]} returns"
            )
        risk_tolerance = float(risk_tolerance)
        if not (0.0 <= risk_tolerance <= 1.0):
            raise ValueError(f"risk_tolerance must lie in [0, 1], got {risk_tolerance}")
        returns.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "covariance", covariance)
        object.__setattr__(self, "risk_tolerance", risk_tolerance)

    @property
    def num_assets(self) -> int:
        return self.returns.shape[0]


def maxcut_hamiltonian(g: Graph) -> Hamiltonian:
    """Ising encoding of MaxCut: per edge (w/2) Z_u Z_v with offset -w/2.

    Minimizing the energy maximizes the cut; for any bitstring x,
    classical_energy(H, x) == -cut_value(g, x).
    """
    terms = []
    offset = 0.0
    for u, v, w in g.edges:
        letters = ["I"] * g.num_nodes
        letters[u] = "Z"
        letters[v] = "Z"
        terms.append((w / 2.0, "".join(letters)))
        offset -= w / 2.0
    return build_hamiltonian(g.num_nodes, terms, offset)


def cut_value(g: Graph, x) -> float:
    """Total weight of edges whose endpoints fall in different parts."""
    bits = as_bit_array(x, g.num_nodes)
    return float(sum(w for u, v, w in g.edges if bits[u] != bits[v]))


def portfolio_hamiltonian(inst: PortfolioInstance) -> Hamiltonian:
    """Ising encoding of the binary mean-variance objective.

    Basis-state energies reproduce ``portfolio_objective`` exactly:
    linear coefficients (1/2)[(1-lam) r_i - lam sum_j V_ij], pair couplings
    (lam/2) V_ij, and constant (lam/4)(sum_ij V_ij + sum_i V_ii)
    - ((1-lam)/2) sum_i r_i. The x_i^2 = x_i reduction of the diagonal
    risk is folded into the constant rather than the linear terms.
    """
    lam = inst.risk_tolerance
    r = inst.returns
    v = inst.covariance
    n = inst.num_assets
    terms = []
    for i in range(n):
        h_i = 0.5 * ((1.0 - lam) * r[i] - lam * v[i].sum())
        letters = ["I"] * n
        letters[i] = "Z"
        terms.append((h_i, "".join(letters)))
    for i in range(n):
        for j in range(i + 1, n):
            letters = ["I"] * n
            letters[i] = "Z"
            letters[j] = "Z"
            terms.append((0.5 * lam * v[i, j], "".join(letters)))
    offset = 0.25 * lam * (v.sum() + np.trace(v)) - 0.5 * (1.0 - lam) * r.sum()
    return build_hamiltonian(n, terms, float(offset))


def portfolio_objective(inst: PortfolioInstance, x) -> float:
    """Binary objective lam * x^T V x - (1 - lam) * r^T x.

    Independent scoring oracle for :func:`portfolio_hamiltonian`.
    """
    bits = as_bit_array(x, inst.num_assets).astype(float)
    risk = float(bits @ inst.covariance @ bits)
    ret = float(inst.returns @ bits)
    return inst.risk_tolerance * risk - (1.0 - inst.risk_tolerance) * ret


def load_graph(path) -> Graph:
    """Read the graph format: first line num_nodes, then 'u v w' per line."""
    with open(path) as fh:
        first = fh.readline()
        try:
            num_nodes = int(first.split()[0])
        except (ValueError, IndexError):
            raise ParseError(path, 1, f"expected node count, got {first.strip()!r}")
        edges = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(path, line_no, f"expected 'u v w', got {line.strip()!r}")
            try:
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc))
    try:
        return Graph(num_nodes, edges)
    except ValueError as exc:
        raise ParseError(path, 1, str(exc))


def save_graph(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.num_nodes}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w:.17g}\n")


def load_portfolio(path) -> PortfolioInstance:
    """Read: line 1 'n lambda', line 2 the n returns, then n covariance rows."""
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(path, 1, f"expected 'n lambda', got {lines[0].strip()!r}")
    try:
        n, lam = int(header[0]), float(header[1])
    except ValueError as exc:
        raise ParseError(path, 1, str(exc))
    if len(lines) < 2 + n:
        raise ParseError(path, len(lines), f"expected {1 + n} more data lines")
    try:
        returns = [float(t) for t in lines[1].split()]
    except ValueError as exc:
        raise ParseError(path, 2, str(exc))
    if len(returns) != n:
        raise ParseError(path, 2, f"expected {n} returns, got {len(returns)}")
    rows = []
    for i in range(n):
        line_no = 3 + i
        try:
            row = [float(t) for t in lines[2 + i].split()]
        except ValueError as exc:
            raise ParseError(path, line_no, str(exc))
        if len(row) != n:
            raise ParseError(path, line_no, f"expected {n} entries, got {len(row)}")
        rows.append(row)
    try:
        return PortfolioInstance(returns, np.array(rows), lam)
    except ValueError as exc:
        raise ParseError(path, 1, str(exc))


def save_portfolio(inst: PortfolioInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{inst.num_assets} {inst.risk_tolerance:.17g}\n")
        fh.write(" ".join(f"{x:.17g}" for x in inst.returns) + "\n")
        for row in inst.covariance:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def synth_graph(n: int, density: float, seed: int) -> Graph:
    """Random graph: each pair kept with probability ``density``, weight in (0, 1]."""
    check_positive_int(n, "n")
    if not (0.0 < density <= 1.0):
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                edges.append((u, v, 1.0 - rng.random()))
    return Graph(n, edges)


def synth_portfolio(n: int, seed: int, risk_tolerance: float = 0.5) -> PortfolioInstance:
    """Random instance with positive-semidefinite covariance V = A A^T / n."""
    check_positive_int(n, "n")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    cov = a @ a.T / n
    cov = (cov + cov.T) / 2.0
    returns = rng.uniform(-1.0, 1.0, size=n)
    return PortfolioInstance(returns, cov, risk_tolerance)
