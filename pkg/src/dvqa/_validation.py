"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

PAULI_LETTERS = frozenset("IXYZ")


def check_pauli_string(s: str, num_qubits: int | None = None) -> str:
    if not isinstance(s, str):
        raise TypeError(f"Pauli string must be str, got {type(s).__name__}")
    bad = set(s) - PAULI_LETTERS
    if bad:
        raise ValueError(f"invalid Pauli letters {sorted(bad)} in {s!r}")
    if num_qubits is not None and len(s) != num_qubits:
        raise ValueError(
            f"Pauli string {s!r} has length {len(s)}, expected {num_qubits}"
        )
    return s


def check_probability(p: float, name: str) -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0) or not np.isfinite(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_positive_int(v: int, name: str) -> int:
    if int(v) != v or v < 1:
        raise ValueError(f"{name} must be a positive integer, got {v}")
    return int(v)


def as_bit_array(x, num_bits: int) -> np.ndarray:
    """Coerce a bitstring ("0110"), iterable of 0/1, or int array to uint8 bits."""
    if isinstance(x, str):
        if len(x) != num_bits:
            raise ValueError(f"bitstring length {len(x)} != {num_bits}")
        if set(x) - {"0", "1"}:
            raise ValueError(f"bitstring must contain only 0/1, got {x!r}")
        return np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(list(x) if not isinstance(x, np.ndarray) else x)
    if arr.shape != (num_bits,):
        raise ValueError(f"expected {num_bits} bits, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    return arr.astype(np.uint8)


def bits_to_string(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def check_symmetric(m: np.ndarray, tol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} is not symmetric within {tol}")
    return m
