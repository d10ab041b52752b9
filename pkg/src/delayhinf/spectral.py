"""Chebyshev collocation: meshes, barycentric differentiation, and the
block-structured discretization of delay operators.

Meshes use Chebyshev extremal points so that the odd-count symmetric grid
contains 0 exactly and the differentiation matrix stays well conditioned.
All Lagrange-basis evaluation goes through barycentric formulas; direct
monomial evaluation is unstable already for moderate point counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def chebyshev_points(count, lo, hi):
    """``count`` Chebyshev extremal points on [lo, hi], ascending.

    Endpoints are exact; on a symmetric interval the grid is exactly
    symmetric (and so contains 0 for odd counts).
    """
    if count < 2:
        raise ValueError(f"need at least 2 points, got {count}")
    n = count - 1
    x = np.cos(np.pi * (n - np.arange(count)) / n)
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry on [-1, 1]
    # center/halfspan form keeps the symmetry (and the zero of a symmetric
    # interval) exact in floating point
    center = 0.5 * (lo + hi)
    halfspan = 0.5 * (hi - lo)
    return center + halfspan * x


def barycentric_weights(count):
    """Barycentric weights of the Chebyshev extremal family.

    Valid up to a common factor, which cancels in every formula below.
    """
    w = np.ones(count)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def lagrange_row(points, weights, t):
    """Row vector of all Lagrange basis polynomials evaluated at ``t``.

    Rows sum to 1 for any t. Node hits return an exact unit row.
    """
    d = t - points
    hit = np.flatnonzero(np.abs(d) < 1e-14 * (1.0 + abs(t)))
    row = np.zeros(len(points))
    if hit.size:
        row[hit[0]] = 1.0
        return row
    c = weights / d
    return c / c.sum()


@dataclass(frozen=True, eq=False)
class SpectralMesh:
    """Symmetric collocation mesh of 2N+1 points on [-tau_max, tau_max]."""

    N: int
    tau_max: float
    points: np.ndarray

    @property
    def zero_index(self):
        return self.N


@dataclass(frozen=True, eq=False)
class DifferentiationMatrix:
    """Barycentric differentiation matrix on a node set.

    ``matrix[i, k]`` is the derivative of the k-th Lagrange basis polynomial
    at node i. Row sums are zero (constants are annihilated).
    """

    points: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray

    def basis_row(self, t):
        """Lagrange evaluation row at an arbitrary point t."""
        return lagrange_row(self.points, self.weights, t)


def build_mesh(N, tau_max):
    """Collocation mesh of 2N+1 Chebyshev extremal points on [-tau_max, tau_max]."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not tau_max > 0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    pts = chebyshev_points(2 * N + 1, -float(tau_max), float(tau_max))
    pts.setflags(write=False)
    return SpectralMesh(N=int(N), tau_max=float(tau_max), points=pts)


def differentiation_on(points):
    """DifferentiationMatrix for a Chebyshev extremal node set."""
    points = np.asarray(points, dtype=float)
    w = barycentric_weights(len(points))
    n = len(points)
    D = np.zeros((n, n))
    dx = points[:, None] - points[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))  # rows annihilate constants
    return DifferentiationMatrix(points=points, weights=w, matrix=D)


def differentiation_matrix(mesh):
    """DifferentiationMatrix on a SpectralMesh."""
    return differentiation_on(mesh.points)


def discretize_block_operator(diff, block_dim, boundary_row, boundary_index=None):
    """Collocation matrix of a first-order delay operator.

    All rows are the Kronecker lift ``kron(D, I_block)`` of the
    differentiation matrix, except the block row at ``boundary_index`` which
    is replaced by the caller-supplied ``boundary_row`` (the discretized
    boundary/splicing condition). The default boundary index is the node
    closest to 0.
    """
    count = len(diff.points)
    if boundary_index is None:
        boundary_index = int(np.argmin(np.abs(diff.points)))
    boundary_row = np.asarray(boundary_row, dtype=float)
    if boundary_row.shape != (block_dim, count * block_dim):
        raise ValueError(
            f"boundary row has shape {boundary_row.shape}, expected "
            f"({block_dim}, {count * block_dim})"
        )
    L = np.kron(diff.matrix, np.eye(block_dim))
    L[boundary_index * block_dim:(boundary_index + 1) * block_dim, :] = boundary_row
    return L


def boundary_block_row(diff, block_dim, center_term, delay_terms, boundary_index=None):
    """Assemble the boundary block row from matrix coefficients.

    ``center_term`` multiplies the value at the boundary node; each entry of
    ``delay_terms`` is a pair (point, matrix) adding ``matrix`` times the
    interpolant evaluated at ``point``.
    """
    count = len(diff.points)
    if boundary_index is None:
        boundary_index = int(np.argmin(np.abs(diff.points)))
    row = np.zeros((block_dim, count * block_dim))
    row[:, boundary_index * block_dim:(boundary_index + 1) * block_dim] = center_term
    for point, mat in delay_terms:
        lr = diff.basis_row(point)
        for k in np.flatnonzero(np.abs(lr) > 0):
            row[:, k * block_dim:(k + 1) * block_dim] += mat * lr[k]
    return row
