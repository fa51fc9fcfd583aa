"""Orthonormal Legendre modal bases and Gauss-Legendre quadrature.

The 1D reference modes are Legendre polynomials on [-1, 1] scaled to unit
L2 norm there; on a physical cell of width h an extra 1/sqrt(h/2) factor
makes every mode unit-norm on its cell, so coefficient 2-norms equal L2
norms of the reconstructed functions.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on [-1, 1]; exact for degree <= 2*n_points - 1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self):
        return len(self.nodes)


@dataclass(frozen=True)
class PolyBasis:
    """Modal basis descriptor: P^k on an interval or total-degree P^k on a box."""

    dim: int
    degree: int

    @property
    def n_modes(self):
        k = self.degree
        return k + 1 if self.dim == 1 else (k + 1) * (k + 2) // 2

    @property
    def modes(self):
        """1D: mode orders 0..k.  2D: graded-lex (a, b) pairs with a+b <= k."""
        if self.dim == 1:
            return list(range(self.degree + 1))
        return basis_2d_index(self.degree)


@lru_cache(maxsize=64)
def gauss_quadrature(n_points):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if n_points < 1:
        raise ValueError("quadrature needs at least one point")
    nodes, weights = leggauss(n_points)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(nodes=nodes, weights=weights)


def legendre_modes(k, x_ref):
    """Orthonormal Legendre values and derivatives at reference points.

    Returns arrays of shape (k+1,) + shape(x_ref).  Mode m is
    sqrt((2m+1)/2) * P_m, which has unit L2 norm on [-1, 1].
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x_ref, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise ValueError("reference coordinate outside [-1, 1]")
    vals = np.zeros((k + 1,) + x.shape)
    ders = np.zeros_like(vals)
    vals[0] = 1.0
    if k >= 1:
        vals[1] = x
        ders[1] = 1.0
    for n in range(1, k):
        vals[n + 1] = ((2 * n + 1) * x * vals[n] - n * vals[n - 1]) / (n + 1)
        ders[n + 1] = ders[n - 1] + (2 * n + 1) * vals[n]
    scale = np.sqrt((2.0 * np.arange(k + 1) + 1.0) / 2.0)
    shape = (k + 1,) + (1,) * x.ndim
    return vals * scale.reshape(shape), ders * scale.reshape(shape)


@lru_cache(maxsize=64)
def basis_2d_index(k):
    """Graded-lexicographic ordering of the 2D modes {(a, b): a+b <= k}."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return tuple((tot - b, b) for tot in range(k + 1) for b in range(tot + 1))


@lru_cache(maxsize=64)
def reference_tables(k):
    """Cached endpoint traces and stiffness of the orthonormal 1D modes.

    Returns (right, left, stiffness) where stiffness[n, m] integrates
    mode_m * mode_n' over [-1, 1].
    """
    m = k + 1
    scale = np.sqrt((2.0 * np.arange(m) + 1.0) / 2.0)
    right = scale.copy()                       # P_m(1) = 1
    left = scale * (-1.0) ** np.arange(m)      # P_m(-1) = (-1)^m
    stiff = np.zeros((m, m))
    for n in range(m):
        for j in range(n):
            if (n - j) % 2 == 1:
                stiff[n, j] = np.sqrt((2 * j + 1) * (2 * n + 1))
    for a in (right, left, stiff):
        a.setflags(write=False)
    return right, left, stiff
