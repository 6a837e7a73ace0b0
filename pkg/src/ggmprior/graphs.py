"""Canonical graph and matrix representations shared by every module.

Graphs are simple, undirected and unweighted: symmetric adjacency matrices
with a zero diagonal.  The continuous state used by the Langevin sampler is
the same shape but real valued ("relaxed" adjacency).  Both are flattened to
a half-vector holding the strict upper triangle in row-major order, i.e. the
pair sequence (0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1).  That order
is part of the serialization contract and must not change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "vech_dim",
    "n_from_dim",
    "pair_indices",
    "vech",
    "unvech",
    "MaskPartition",
    "apply_mask",
    "project_binary",
    "check_adjacency",
    "check_relaxed",
    "write_edge_list",
    "read_edge_list",
]


def vech_dim(n: int) -> int:
    """Half-vector length for an n-node graph: n(n-1)/2."""
    return n * (n - 1) // 2


def n_from_dim(dim: int) -> int:
    """Node count whose half-vector length is ``dim``; rejects non-triangular sizes."""
    n = int(round((1.0 + np.sqrt(1.0 + 8.0 * dim)) / 2.0))
    if vech_dim(n) != dim:
        raise ValueError(f"{dim} is not a triangular number n(n-1)/2")
    return n


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column index arrays of the strict upper triangle in half-vector order."""
    return np.triu_indices(n, k=1)


def check_adjacency(A: np.ndarray) -> np.ndarray:
    """Validate a binary adjacency matrix (symmetric, hollow, entries in {0,1})."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have a zero diagonal (no self-loops)")
    if not np.isin(A, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    return A


def check_relaxed(A: np.ndarray) -> np.ndarray:
    """Validate a relaxed (real-valued) adjacency: symmetric, hollow, finite."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("matrix must have a zero diagonal")
    if not np.isfinite(A).all():
        raise ValueError("matrix entries must be finite")
    return A


def vech(A: np.ndarray) -> np.ndarray:
    """Half-vectorize a symmetric hollow matrix.

    Returns the strict upper triangle in row-major order.  Rejects
    non-symmetric input or a nonzero diagonal, so ``unvech(vech(A)) == A``
    holds exactly.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("matrix must have a zero diagonal")
    iu, ju = pair_indices(A.shape[0])
    return A[iu, ju].copy()


def unvech(a: np.ndarray, n: int | None = None) -> np.ndarray:
    """Rebuild the symmetric hollow matrix from a half-vector."""
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError("half-vector must be one-dimensional")
    if n is None:
        n = n_from_dim(a.shape[0])
    elif vech_dim(n) != a.shape[0]:
        raise ValueError(f"half-vector of length {a.shape[0]} does not match n={n}")
    A = np.zeros((n, n), dtype=a.dtype)
    iu, ju = pair_indices(n)
    A[iu, ju] = a
    A[ju, iu] = a
    return A


@dataclass(frozen=True)
class MaskPartition:
    """Partition of the strict-upper-triangle pairs into observed and unknown.

    ``observed`` is a boolean half-vector flag (True where the entry is
    known).  The pair order is the half-vector order of :func:`vech`.
    """

    n: int
    observed: np.ndarray = field(repr=False)

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool)
        if obs.shape != (vech_dim(self.n),):
            raise ValueError(
                f"observed flags must have length {vech_dim(self.n)} for n={self.n}"
            )
        object.__setattr__(self, "observed", obs)

    @property
    def unknown(self) -> np.ndarray:
        return ~self.observed

    @property
    def n_unknown(self) -> int:
        return int(self.unknown.sum())

    def observed_pairs(self) -> list[tuple[int, int]]:
        iu, ju = pair_indices(self.n)
        return [(int(i), int(j)) for i, j in zip(iu[self.observed], ju[self.observed])]

    def unknown_pairs(self) -> list[tuple[int, int]]:
        iu, ju = pair_indices(self.n)
        return [(int(i), int(j)) for i, j in zip(iu[self.unknown], ju[self.unknown])]

    @classmethod
    def from_pairs(cls, n: int, observed_pairs) -> "MaskPartition":
        """Build from an iterable of (i, j) pairs with i < j; the rest is unknown."""
        dim = vech_dim(n)
        iu, ju = pair_indices(n)
        index = {(int(i), int(j)): p for p, (i, j) in enumerate(zip(iu, ju))}
        obs = np.zeros(dim, dtype=bool)
        for i, j in observed_pairs:
            if not (0 <= i < j < n):
                raise ValueError(f"pair ({i},{j}) invalid for n={n} (need 0 <= i < j < n)")
            obs[index[(i, j)]] = True
        return cls(n, obs)

    @classmethod
    def all_observed(cls, n: int) -> "MaskPartition":
        return cls(n, np.ones(vech_dim(n), dtype=bool))

    @classmethod
    def all_unknown(cls, n: int) -> "MaskPartition":
        return cls(n, np.zeros(vech_dim(n), dtype=bool))


def apply_mask(target: np.ndarray, source: np.ndarray, mask: MaskPartition) -> np.ndarray:
    """Copy the observed entries of ``source`` into ``target``.

    Observed pairs (and their transposes) come from ``source``; unknown
    entries are left untouched.  Returns a new matrix.
    """
    target = np.asarray(target, dtype=float)
    source = np.asarray(source)
    if target.shape != (mask.n, mask.n) or source.shape != (mask.n, mask.n):
        raise ValueError(
            f"shape mismatch: target {target.shape}, source {source.shape}, mask n={mask.n}"
        )
    out = target.copy()
    iu, ju = pair_indices(mask.n)
    oi, oj = iu[mask.observed], ju[mask.observed]
    out[oi, oj] = source[oi, oj]
    out[oj, oi] = source[oi, oj]
    return out


def project_binary(A: np.ndarray) -> np.ndarray:
    """Project a relaxed adjacency onto {0,1}: indicator of entry >= 0.5.

    The threshold is inclusive.  The diagonal is forced to zero so the output
    is always a valid adjacency matrix.
    """
    A = np.asarray(A, dtype=float)
    if not np.isfinite(A).all():
        raise ValueError("entries must be finite")
    out = (A >= 0.5).astype(np.int64)
    out = np.triu(out, k=1)
    return out + out.T


def write_edge_list(path, A: np.ndarray) -> None:
    """Write a graph in the edge-list text format.

    First line is ``n <count>``, then one ``i j`` line per edge with
    0-based indices and i < j.
    """
    A = check_adjacency(A)
    n = A.shape[0]
    iu, ju = pair_indices(n)
    sel = A[iu, ju] != 0
    with open(path, "w") as fh:
        fh.write(f"n {n}\n")
        for i, j in zip(iu[sel], ju[sel]):
            fh.write(f"{i} {j}\n")


def read_edge_list(path) -> np.ndarray:
    """Read a graph from the edge-list text format written by :func:`write_edge_list`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n":
            raise ValueError(f"{path}: expected header 'n <count>'")
        n = int(header[1])
        A = np.zeros((n, n), dtype=np.int64)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j = (int(tok) for tok in line.split())
            if not (0 <= i < j < n):
                raise ValueError(f"{path}: bad edge ({i},{j}) for n={n}")
            A[i, j] = A[j, i] = 1
    return A
