"""Pauli-string Hamiltonians, subsystem partitions, and term splitting.

A Hamiltonian is a weighted sum of Pauli strings plus a constant offset.
Terms are stored sparsely as (weight, string) pairs; strings use uppercase
letters over "IXYZ" with qubit 0 leftmost. Basis indices throughout the
package treat qubit 0 as the most significant bit.

Spin convention shared by every module: a classical bit x maps to the
Pauli-Z eigenvalue z = 1 - 2x, so x = 0 corresponds to z = +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from dvqa._validation import (
    as_bit_array,
    check_pauli_string,
    check_positive_int,
)

__all__ = [
    "Hamiltonian",
    "Partition",
    "PartitionedTerm",
    "build_hamiltonian",
    "partition_terms",
    "classical_energy",
    "batch_classical_energies",
    "pauli_support",
    "is_diagonal",
    "save_hamiltonian",
    "load_hamiltonian",
]


def pauli_support(s: str) -> int:
    """Number of non-identity letters in a Pauli string."""
    return sum(1 for c in s if c != "I")


@dataclass(frozen=True)
class Hamiltonian:
    """Weighted Pauli strings over ``num_qubits`` qubits plus a constant offset.

    Instances are immutable; construct through :func:`build_hamiltonian`,
    which canonicalizes (merges duplicates, drops zero weights).
    """

    num_qubits: int
    terms: tuple[tuple[float, str], ...]
    offset: float = 0.0

    @property
    def locality(self) -> int:
        """Largest support over all terms (0 for an empty/identity Hamiltonian)."""
        return max((pauli_support(s) for _, s in self.terms), default=0)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms], dtype=float)

    @property
    def weight_l1(self) -> float:
        return float(np.abs(self.weights).sum()) if self.terms else 0.0


def build_hamiltonian(
    num_qubits: int,
    raw_terms: Iterable[tuple[float, str]],
    offset: float = 0.0,
) -> Hamiltonian:
    """Canonicalize raw (weight, string) pairs into a :class:`Hamiltonian`.

    Duplicate strings are merged by summing weights and terms whose merged
    weight is exactly zero are dropped. Raises ``ValueError`` on string
    length mismatch or non-finite weights.
    """
    num_qubits = check_positive_int(num_qubits, "num_qubits")
    if not np.isfinite(offset):
        raise ValueError(f"offset must be finite, got {offset}")
    merged: dict[str, float] = {}
    order: list[str] = []
    for weight, string in raw_terms:
        weight = float(weight)
        if not np.isfinite(weight):
            raise ValueError(f"non-finite weight {weight} for term {string!r}")
        check_pauli_string(string, num_qubits)
        if string not in merged:
            merged[string] = 0.0
            order.append(string)
        merged[string] += weight
    terms = tuple((merged[s], s) for s in order if merged[s] != 0.0)
    return Hamiltonian(num_qubits=num_qubits, terms=terms, offset=float(offset))


def is_diagonal(h: Hamiltonian) -> bool:
    """True when every letter is I or Z."""
    return all(set(s) <= {"I", "Z"} for _, s in h.terms)


@dataclass(frozen=True)
class Partition:
    """Contiguous subsystem sizes and per-subsystem ranks.

    ``sizes[k]`` qubits belong to block k (blocks follow the given variable
    order; no graph partitioning is attempted). ``ranks[k]`` counts the
    computational basis states |0>, ..., |R_k - 1> used by block k.
    ``max_width`` optionally caps the widest block (hardware qubit limit).
    """

    sizes: tuple[int, ...]
    ranks: tuple[int, ...]
    max_width: int | None = None

    def __init__(
        self,
        sizes: Sequence[int],
        ranks: Sequence[int] | int = 1,
        max_width: int | None = None,
    ):
        sizes = tuple(check_positive_int(s, "subsystem size") for s in sizes)
        if not sizes:
            raise ValueError("partition needs at least one subsystem")
        if isinstance(ranks, int):
            ranks = (ranks,) * len(sizes)
        ranks = tuple(check_positive_int(r, "rank") for r in ranks)
        if len(ranks) != len(sizes):
            raise ValueError(
                f"got {len(ranks)} ranks for {len(sizes)} subsystems"
            )
        for k, (n, r) in enumerate(zip(sizes, ranks)):
            if r > 2**n:
                raise ValueError(
                    f"rank {r} exceeds 2^{n} basis states in subsystem {k}"
                )
        if max_width is not None and max(sizes) > max_width:
            raise ValueError(
                f"subsystem width {max(sizes)} exceeds hardware cap {max_width}"
            )
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "max_width", max_width)

    @property
    def num_qubits(self) -> int:
        return sum(self.sizes)

    @property
    def num_subsystems(self) -> int:
        return len(self.sizes)

    @property
    def width(self) -> int:
        """Widest subsystem."""
        return max(self.sizes)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Cumulative qubit offsets, length K + 1."""
        out = [0]
        for n in self.sizes:
            out.append(out[-1] + n)
        return tuple(out)

    @staticmethod
    def even(num_qubits: int, num_subsystems: int, ranks: Sequence[int] | int = 1,
             max_width: int | None = None) -> "Partition":
        """Split ``num_qubits`` into ``num_subsystems`` near-equal contiguous blocks."""
        k = check_positive_int(num_subsystems, "num_subsystems")
        n = check_positive_int(num_qubits, "num_qubits")
        if k > n:
            raise ValueError(f"cannot split {n} qubits into {k} subsystems")
        base, extra = divmod(n, k)
        sizes = [base + 1] * extra + [base] * (k - extra)
        return Partition(sizes, ranks, max_width)


@dataclass(frozen=True)
class PartitionedTerm:
    """One Hamiltonian term split into per-subsystem local factors."""

    weight: float
    factors: tuple[str, ...]


def partition_terms(h: Hamiltonian, part: Partition) -> list[PartitionedTerm]:
    """Slice every term's string at the partition boundaries.

    The factors of each returned term concatenate back to the original
    string, so the split is lossless.
    """
    if part.num_qubits != h.num_qubits:
        raise ValueError(
            f"partition covers {part.num_qubits} qubits, "
            f"Hamiltonian has {h.num_qubits}"
        )
    bounds = part.boundaries
    out = []
    for weight, string in h.terms:
        factors = tuple(string[bounds[k]:bounds[k + 1]] for k in range(part.num_subsystems))
        out.append(PartitionedTerm(weight=weight, factors=factors))
    return out


def classical_energy(h: Hamiltonian, x) -> float:
    """Energy <x|H|x> of a computational basis state, for diagonal H.

    ``x`` may be a "01" string or an iterable of bits; bit j belongs to
    qubit j and maps to spin z_j = 1 - 2 x_j.
    """
    if not is_diagonal(h):
        raise ValueError("classical_energy requires a diagonal Hamiltonian")
    bits = as_bit_array(x, h.num_qubits)
    z = 1.0 - 2.0 * bits.astype(float)
    total = h.offset
    for weight, string in h.terms:
        prod = 1.0
        for j, c in enumerate(string):
            if c == "Z":
                prod *= z[j]
        total += weight * prod
    return float(total)


def batch_classical_energies(h: Hamiltonian, bits: np.ndarray) -> np.ndarray:
    """Energies of many basis states at once; ``bits`` has shape (batch, N)."""
    if not is_diagonal(h):
        raise ValueError("batch_classical_energies requires a diagonal Hamiltonian")
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] != h.num_qubits:
        raise ValueError(f"bits must have shape (batch, {h.num_qubits})")
    z = 1.0 - 2.0 * bits.astype(float)
    out = np.full(bits.shape[0], h.offset)
    for weight, string in h.terms:
        support = [j for j, c in enumerate(string) if c == "Z"]
        if support:
            out += weight * np.prod(z[:, support], axis=1)
        else:
            out += weight
    return out


def save_hamiltonian(h: Hamiltonian, path) -> None:
    """Write the line-oriented text format.

    Header line ``<num_qubits>\\t<offset>``, then one ``weight\\t<string>``
    line per term. Floats use 17 significant digits and round-trip exactly.
    """
    with open(path, "w") as fh:
        fh.write(f"{h.num_qubits}\t{h.offset:.17g}\n")
        for weight, string in h.terms:
            fh.write(f"{weight:.17g}\t{string}\n")


def load_hamiltonian(path) -> Hamiltonian:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: header must be '<num_qubits>\\t<offset>'")
        num_qubits, offset = int(header[0]), float(header[1])
        terms = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'weight\\tstring'")
            terms.append((float(parts[0]), parts[1]))
    return build_hamiltonian(num_qubits, terms, offset)
