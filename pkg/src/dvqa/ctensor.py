"""Trainable normalized correlation tensor and objective contraction.

The tensor C has one leg per subsystem with leg k of size ranks[k] and is
kept on the unit hypersphere (sum |C|^2 = 1). Two representations:

dense  an ndarray holding all prod(ranks) entries. Rank-1 legs are
       squeezed out of the stored array (ndarrays cap out at 64 axes and
       large subsystem counts routinely carry many rank-1 legs), so
       ``values.shape`` equals the ranks with the 1s removed.
train  a tensor-train: K cores, core k of shape (m_{k-1}, R_k, m_k) with
       boundary bonds 1 and internal bonds capped by the bond dimension.

Objective contraction works against per-term, per-subsystem matrices with
entries values[alpha][beta] = <beta|U^dag P U|alpha>; legs without an entry
are implicitly identity. The train path sweeps left to right per term,
entering through cached identity prefix environments and closing with
cached suffix environments, so leading and trailing identity legs cost
nothing and interior identity legs skip the operator multiply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CorrelationTensor",
    "init_random",
    "renormalize",
    "to_dense",
    "l1_norm",
    "contract_objective",
    "save_tensor",
    "load_tensor",
]

DENSE_AUTO_LIMIT = 4096
DENSE_HARD_LIMIT = 2**20
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class CorrelationTensor:
    """Normalized complex tensor weighting products of subsystem states."""

    ranks: tuple[int, ...]
    values: np.ndarray | None = None
    cores: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        if not ranks or any(r < 1 for r in ranks):
            raise ValueError(f"invalid ranks {ranks}")
        object.__setattr__(self, "ranks", ranks)
        if (self.values is None) == (self.cores is None):
            raise ValueError("exactly one of values/cores must be given")
        if self.values is not None:
            expected = tuple(r for r in ranks if r > 1)
            values = np.asarray(self.values, dtype=complex)
            if values.shape != expected:
                if values.size == int(np.prod(expected, dtype=object)):
                    values = values.reshape(expected)
                else:
                    raise ValueError(
                        f"dense values of shape {values.shape} do not match ranks {ranks}"
                    )
            object.__setattr__(self, "values", values)
        else:
            cores = tuple(np.asarray(g, dtype=complex) for g in self.cores)
            if len(cores) != len(ranks):
                raise ValueError("need one core per subsystem")
            bond = 1
            for k, g in enumerate(cores):
                if g.ndim != 3 or g.shape[0] != bond or g.shape[1] != ranks[k]:
                    raise ValueError(f"core {k} has shape {g.shape}, expected ({bond}, {ranks[k]}, *)")
                bond = g.shape[2]
            if bond != 1:
                raise ValueError("last core must close with bond 1")
            object.__setattr__(self, "cores", cores)

    @property
    def mode(self) -> str:
        return "dense" if self.values is not None else "train"

    @property
    def num_entries(self) -> int:
        """Logical entry count of the full tensor, prod(ranks)."""
        return int(np.prod(self.ranks, dtype=object))

    @property
    def bond_dims(self) -> tuple[int, ...] | None:
        if self.cores is None:
            return None
        return (1,) + tuple(g.shape[2] for g in self.cores)

    def axis_position(self, k: int) -> int | None:
        """Squeezed-array axis for subsystem k (None for rank-1 legs)."""
        if self.ranks[k] == 1:
            return None
        return sum(1 for r in self.ranks[:k] if r > 1)

    def norm(self) -> float:
        if self.values is not None:
            return float(np.linalg.norm(self.values.ravel()))
        env = np.ones((1, 1), dtype=complex)
        for g in self.cores:
            env = np.einsum("cm,cbn,mbk->nk", env, g.conj(), g)
        return float(math.sqrt(abs(env[0, 0].real)))

    def full_array(self) -> np.ndarray:
        """Entries reshaped to the full ranks tuple (small subsystem counts only)."""
        if len(self.ranks) > 32:
            raise ValueError("full_array limited to 32 subsystems; use the squeezed values")
        return to_dense(self).values.reshape(self.ranks)


def init_random(ranks, mode: str = "auto", bond_dim: int = 2, seed=0,
                real: bool = False) -> CorrelationTensor:
    """Fresh tensor with standard-normal entries, renormalized to the sphere.

    ``mode`` "auto" picks dense up to 4096 entries, tensor-train beyond.
    All-rank-1 tensors come out as the exact scalar 1.
    """
    ranks = tuple(int(r) for r in ranks)
    entries = int(np.prod(ranks, dtype=object))
    if mode == "auto":
        mode = "dense" if entries <= DENSE_AUTO_LIMIT else "train"
    rng = np.random.default_rng(seed)
    if mode == "dense":
        if entries > DENSE_HARD_LIMIT:
            raise ValueError(f"{entries} entries exceed the dense limit {DENSE_HARD_LIMIT}")
        shape = tuple(r for r in ranks if r > 1)
        if entries == 1:
            return CorrelationTensor(ranks, values=np.ones(shape, dtype=complex))
        values = rng.standard_normal(shape)
        values = values + (0.0 if real else 1j * rng.standard_normal(shape))
        return renormalize(CorrelationTensor(ranks, values=np.asarray(values, dtype=complex)))
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if bond_dim < 1:
        raise ValueError("bond_dim must be >= 1")
    k = len(ranks)
    bonds = [1]
    for i in range(1, k):
        left = int(np.prod(ranks[:i], dtype=object))
        right = int(np.prod(ranks[i:], dtype=object))
        bonds.append(int(min(bond_dim, left, right)))
    bonds.append(1)
    cores = []
    for i in range(k):
        shape = (bonds[i], ranks[i], bonds[i + 1])
        g = rng.standard_normal(shape)
        g = g + (0.0 if real else 1j * rng.standard_normal(shape))
        cores.append(np.asarray(g, dtype=complex))
    tensor = CorrelationTensor(ranks, cores=tuple(cores))
    if entries == 1:
        ones = tuple(np.ones((1, 1, 1), dtype=complex) for _ in ranks)
        return CorrelationTensor(ranks, cores=ones)
    return renormalize(tensor)


def renormalize(c: CorrelationTensor) -> CorrelationTensor:
    """Rescale onto the unit sphere; direction unchanged."""
    norm = c.norm()
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot renormalize a zero tensor")
    if c.values is not None:
        return CorrelationTensor(c.ranks, values=c.values / norm)
    scale = norm ** (1.0 / len(c.cores))
    return CorrelationTensor(c.ranks, cores=tuple(g / scale for g in c.cores))


def to_dense(c: CorrelationTensor) -> CorrelationTensor:
    """Exact dense representation (guarded against entry-count blow-up)."""
    if c.values is not None:
        return c
    if c.num_entries > DENSE_HARD_LIMIT:
        raise ValueError(f"{c.num_entries} entries exceed the dense limit {DENSE_HARD_LIMIT}")
    flat = np.ones((1, 1), dtype=complex)  # (entries so far, bond)
    for g in c.cores:
        flat = np.tensordot(flat, g, axes=([1], [0]))
        flat = flat.reshape(-1, g.shape[2])
    values = flat[:, 0]
    return CorrelationTensor(c.ranks, values=values.reshape(tuple(r for r in c.ranks if r > 1)))


def l1_norm(c: CorrelationTensor) -> float:
    """Sum of entry magnitudes, computed on the dense representation."""
    return float(np.abs(to_dense(c).values).sum())


# --- contraction ------------------------------------------------------------


def _dense_apply_legs(c: CorrelationTensor, legs: dict[int, np.ndarray]) -> np.ndarray:
    """Apply per-leg operators to a dense tensor: out_beta = sum_alpha prod values[a,b] C_a."""
    out = c.values
    scale = 1.0 + 0.0j
    for k, vals in legs.items():
        pos = c.axis_position(k)
        if pos is None:
            scale = scale * vals[0, 0]
        else:
            out = np.moveaxis(np.tensordot(out, vals, axes=([pos], [0])), -1, pos)
    if scale != 1.0:
        out = out * scale
    return out if out is not c.values else out.copy()


def dense_term_value(c: CorrelationTensor, legs: dict[int, np.ndarray]) -> complex:
    """<C| (tensor product of legs) |C> for one term; identity legs implicit."""
    return complex(np.vdot(c.values, _dense_apply_legs(c, legs)))


def dense_term_environment(c: CorrelationTensor, legs: dict[int, np.ndarray],
                           free: int) -> np.ndarray:
    """Partial contraction leaving subsystem ``free`` open.

    Returns W with W[beta, alpha] such that the term value equals
    sum_{a,b} values_free[a, b] * W[b, a]. ``legs`` must not contain ``free``.
    """
    applied = _dense_apply_legs(c, legs)
    pos = c.axis_position(free)
    if pos is None:
        return np.array([[np.vdot(c.values, applied)]], dtype=complex)
    axes = [a for a in range(c.values.ndim) if a != pos]
    return np.tensordot(c.values.conj(), applied, axes=(axes, axes))


def _train_transfer(env: np.ndarray, core: np.ndarray,
                    vals: np.ndarray | None) -> np.ndarray:
    """Move the sandwich environment one site right; ``vals`` None = identity leg."""
    t = np.einsum("cm,cbn->mbn", env, core.conj())
    if vals is None:
        return np.einsum("mbn,mbk->nk", t, core)
    # operator A[b, a] = vals[a, b]
    s = np.einsum("mbn,ab->man", t, vals)
    return np.einsum("man,mak->nk", s, core)


def _train_suffix_environments(cores) -> list[np.ndarray]:
    """suffix[k] closes the sandwich for identity legs k..K-1; suffix[K] = 1."""
    k = len(cores)
    suffix = [None] * (k + 1)
    suffix[k] = np.ones((1, 1), dtype=complex)
    for i in range(k - 1, -1, -1):
        g = cores[i]
        suffix[i] = np.einsum("cbn,mbk,nk->cm", g.conj(), g, suffix[i + 1])
    return suffix


def _train_prefix_environments(cores) -> list[np.ndarray]:
    """prefix[k] covers identity legs 0..k-1; prefix[0] = 1."""
    prefix = [np.ones((1, 1), dtype=complex)]
    for g in cores:
        prefix.append(_train_transfer(prefix[-1], g, None))
    return prefix


def _train_term_value(c: CorrelationTensor, legs: dict[int, np.ndarray],
                      prefix, suffix) -> complex:
    if not legs:
        return complex(prefix[len(c.cores)][0, 0])
    first, last = min(legs), max(legs)
    env = prefix[first]
    for k in range(first, last + 1):
        env = _train_transfer(env, c.cores[k], legs.get(k))
    return complex(np.einsum("nk,nk->", env, suffix[last + 1]))


def contract_objective(c: CorrelationTensor, pi: dict, weights, offset: float = 0.0) -> float:
    """Objective offset + sum_i w_i <C| (x)_k A_k^i |C>.

    ``pi`` maps (subsystem k, term i) to the R_k x R_k matrix of local
    transition expectations; pairs absent from the map are identity legs.
    The result must be real (Hermitian legs); an imaginary residue above
    1e-9 raises ValueError. Terms are accumulated in ascending index order
    so results are bit-reproducible.
    """
    weights = np.asarray(weights, dtype=float)
    legs_per_term: list[dict[int, np.ndarray]] = [dict() for _ in weights]
    for (k, i), vals in pi.items():
        if not (0 <= k < len(c.ranks) and 0 <= i < len(weights)):
            raise ValueError(f"entry ({k}, {i}) does not match the tensor/terms")
        vals = np.asarray(vals, dtype=complex)
        if vals.shape != (c.ranks[k], c.ranks[k]):
            raise ValueError(
                f"matrix for subsystem {k} has shape {vals.shape}, "
                f"expected ({c.ranks[k]}, {c.ranks[k]})"
            )
        legs_per_term[i][k] = vals
    total = contract_terms(c, legs_per_term, weights)
    if abs(total.imag) > IMAG_TOL:
        raise ValueError(f"objective has imaginary residue {total.imag:.3e}")
    return float(total.real + offset)


def contract_terms(c: CorrelationTensor, legs_per_term, weights) -> complex:
    """Weighted sum of term sandwiches, without the offset or realness check."""
    total = 0.0 + 0.0j
    if c.values is not None:
        for w, legs in zip(weights, legs_per_term):
            total += w * dense_term_value(c, legs)
        return total
    prefix = _train_prefix_environments(c.cores)
    suffix = _train_suffix_environments(c.cores)
    for w, legs in zip(weights, legs_per_term):
        total += w * _train_term_value(c, legs, prefix, suffix)
    return total


# --- checkpoint format -------------------------------------------------------


def save_tensor(c: CorrelationTensor, path) -> None:
    """Text checkpoint: header lines, then 're im' pairs at 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(f"{c.mode}\n")
        fh.write("ranks " + " ".join(str(r) for r in c.ranks) + "\n")
        if c.mode == "train":
            fh.write("bonds " + " ".join(str(b) for b in c.bond_dims) + "\n")
            arrays = c.cores
        else:
            arrays = (c.values,)
        for arr in arrays:
            for z in arr.ravel():
                fh.write(f"{z.real:.17g} {z.imag:.17g}\n")


def load_tensor(path) -> CorrelationTensor:
    with open(path) as fh:
        mode = fh.readline().strip()
        rank_line = fh.readline().split()
        if mode not in ("dense", "train") or rank_line[:1] != ["ranks"]:
            raise ValueError(f"{path}: malformed checkpoint header")
        ranks = tuple(int(t) for t in rank_line[1:])
        if mode == "train":
            bond_line = fh.readline().split()
            if bond_line[:1] != ["bonds"]:
                raise ValueError(f"{path}: missing bonds line")
            bonds = [int(t) for t in bond_line[1:]]
        entries = [complex(float(a), float(b))
                   for a, b in (line.split() for line in fh if line.strip())]
    data = np.array(entries, dtype=complex)
    if mode == "dense":
        return CorrelationTensor(ranks, values=data)
    cores = []
    at = 0
    for k, r in enumerate(ranks):
        shape = (bonds[k], r, bonds[k + 1])
        size = int(np.prod(shape))
        cores.append(data[at:at + size].reshape(shape))
        at += size
    return CorrelationTensor(ranks, cores=tuple(cores))
