"""Per-bag neighborhood graphs and smoothness energies on attention values.

The graph couples instances that should receive similar attention. The
canonical first- and second-order energies are the Laplacian quadratic
forms fᵀLf and fᵀLLf = ||Lf||²; the literal pairwise sums (with their ½
and ¼ prefactors) are kept as non-differentiable oracles for testing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Tensor, matmul


@dataclass(frozen=True, eq=False)
class BagGraph:
    """Adjacency, degree and Laplacian matrices for one bag.

    Matrices are dense, float64 and write-protected; the Laplacian is
    L = D - A exactly, so every row sums to zero and L is PSD.
    """

    n: int
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray

    @classmethod
    def from_adjacency(cls, adjacency) -> "BagGraph":
        a = np.asarray(adjacency, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.diag(a).any():
            raise ValueError("adjacency must have a zero diagonal")
        if not np.isin(a, (0.0, 1.0)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        d = np.diag(a.sum(axis=1))
        lap = d - a
        for m in (a, d, lap):
            m.setflags(write=False)
        return cls(n=a.shape[0], adjacency=a, degree=d, laplacian=lap)


@lru_cache(maxsize=None)
def chain_graph(n: int) -> BagGraph:
    """Chain over instance order: i and j adjacent iff |i - j| == 1."""
    if n < 1:
        raise ValueError(f"chain graph needs at least one instance, got n={n}")
    a = np.zeros((n, n))
    if n > 1:
        off = np.arange(n - 1)
        a[off, off + 1] = 1.0
        a[off + 1, off] = 1.0
    return BagGraph.from_adjacency(a)


def _check_length(f: Tensor, graph: BagGraph, name: str) -> None:
    if f.ndim != 1 or f.shape[0] != graph.n:
        raise ValueError(f"{name}: value vector shape {f.shape} does not match graph size {graph.n}")


def energy_s1(f: Tensor, graph: BagGraph) -> Tensor:
    """First-order smoothness energy fᵀLf (differentiable through f)."""
    _check_length(f, graph, "energy_s1")
    return matmul(f, matmul(Tensor(graph.laplacian), f))


def energy_s2(f: Tensor, graph: BagGraph) -> Tensor:
    """Second-order smoothness energy fᵀLLf = ||Lf||² (differentiable)."""
    _check_length(f, graph, "energy_s2")
    lf = matmul(Tensor(graph.laplacian), f)
    return matmul(lf, lf)


def energy_competition(f: Tensor, graph: BagGraph) -> Tensor:
    """Sign-flipped energy fᵀ(D+A)f; rewards anti-correlated neighbors."""
    _check_length(f, graph, "energy_competition")
    return matmul(f, matmul(Tensor(graph.degree + graph.adjacency), f))


def energy_sum_form(values, graph: BagGraph, order: int) -> float:
    """Literal pairwise sums with their prefactors; test oracle only.

    order 1: ½ ΣΣ A_ij (f_i - f_j)²   (equals energy_s1)
    order 2: ¼ Σ_i (Σ_j A_ij (f_i - f_j))²   (equals energy_s2 / 4)
    """
    f = np.asarray(values, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != graph.n:
        raise ValueError(f"energy_sum_form: value vector shape {f.shape} does not match graph size {graph.n}")
    diffs = graph.adjacency * (f[:, None] - f[None, :])
    if order == 1:
        return 0.5 * float(np.sum(diffs * (f[:, None] - f[None, :])))
    if order == 2:
        return 0.25 * float(np.sum(diffs.sum(axis=1) ** 2))
    raise ValueError(f"order must be 1 or 2, got {order}")
