"""Constructive n = 1 solves of du/dzbar = f and the weighted estimate ratio.

The particular solution is the solid Cauchy transform
u(z) = (1/pi) int f(zeta) / (z - zeta) dA(zeta); subtracting its weighted
Bergman projection onto a polynomial subspace yields the minimal-norm
solution, whose squared norm against int (|f|^2 / psi_zz) e^{-(phi+psi)}
gives the estimate ratio (<= 1 for subharmonic phi, by the classical weighted
estimate; > 1 witnesses failure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .bochner import FormField01, GridDiscretization
from .extension import _monomial_values, _solve_gram, monomial_exponents
from .fields import ScalarField
from .geometry import DomainBox


@dataclass(frozen=True)
class SolveResult:
    u_particular: np.ndarray
    u_minimal: np.ndarray
    residual: float
    minimal_norm_sq: float
    comparison_integral: float
    ratio: float
    degree: int


def _square_grid_1d(grid: GridDiscretization) -> float:
    if grid.n != 1:
        raise ValueError("the transform is one-dimensional; use an n = 1 grid")
    hx, hy = grid.spacing
    if abs(hx - hy) > 1e-12 * max(hx, hy):
        raise ValueError("the transform needs equal spacing on both real axes")
    return float(hx)


def cauchy_transform(f_values: np.ndarray, grid: GridDiscretization) -> np.ndarray:
    """Particular solution of du/dzbar = f by the discrete solid Cauchy transform.

    The singular node cell is excised: its closed-form cell integral of the
    kernel vanishes by symmetry, so the diagonal kernel entry is zero and the
    quadrature stays second-order accurate.  Implemented as an FFT
    convolution over the uniform grid.
    """
    h = _square_grid_1d(grid)
    nn = grid.nodes_per_axis
    f = np.asarray(f_values, dtype=complex).reshape(nn, nn)
    if np.max(np.abs(f[0, :])) > 1e-12 or np.max(np.abs(f[-1, :])) > 1e-12 or np.max(
        np.abs(f[:, 0])
    ) > 1e-12 or np.max(np.abs(f[:, -1])) > 1e-12:
        raise ValueError("support touches the grid boundary")
    offsets = np.arange(-(nn - 1), nn) * h
    dx, dy = np.meshgrid(offsets, offsets, indexing="ij")
    kernel = np.zeros((2 * nn - 1, 2 * nn - 1), dtype=complex)
    dz = dx + 1j * dy
    nonzero = dz != 0.0
    kernel[nonzero] = 1.0 / dz[nonzero]
    u = fftconvolve(f, kernel, mode="same") * (h * h / math.pi)
    return u.ravel()


def dbar_residual(
    u_values: np.ndarray,
    f_values: np.ndarray,
    grid: GridDiscretization,
    margin_cells: int = 4,
) -> float:
    """Interior sup-norm of du/dzbar - f (4th-order differences inside)."""
    du = grid.d_dzbar(np.asarray(u_values, dtype=complex), 0)
    mask = grid.interior_mask(margin_cells)
    return float(np.max(np.abs(du - np.asarray(f_values))[mask]))


def weighted_bergman_projection(
    u_values: np.ndarray,
    eta: ScalarField,
    degree: int,
    grid: GridDiscretization,
    domain: Optional[DomainBox] = None,
    center=None,
):
    """Best degree <= N holomorphic polynomial approximation of u in
    L^2(e^{-eta}) over the grid box (or the given sub-domain).

    Returns (h_values, coefficients); the residual u - h is orthogonal to
    every basis monomial (Gram normal equations).
    """
    pts = grid.points
    mask = np.ones(pts.shape[0], dtype=bool)
    if domain is not None:
        mask = domain.contains(pts)
    w = grid.weights * mask
    eta_vals = eta(pts)
    w = w * np.exp(-np.clip(eta_vals, -700.0, None))
    z0 = np.zeros(1, dtype=complex) if center is None else np.asarray(center, complex)
    exps = monomial_exponents(1, degree)
    mono = _monomial_values(pts - z0, exps)
    gram = (mono.conj().T * w) @ mono
    rhs = mono.conj().T @ (w * np.asarray(u_values, dtype=complex))
    coeffs = _solve_gram(gram, rhs)
    h_values = mono @ coeffs
    return h_values, coeffs


def projection_orthogonality(
    u_values, h_values, eta: ScalarField, degree: int, grid, domain=None, center=None
) -> float:
    """Max relative pairing of (u - h) against the basis monomials."""
    pts = grid.points
    mask = np.ones(pts.shape[0], dtype=bool)
    if domain is not None:
        mask = domain.contains(pts)
    w = grid.weights * mask * np.exp(-np.clip(eta(pts), -700.0, None))
    z0 = np.zeros(1, dtype=complex) if center is None else np.asarray(center, complex)
    mono = _monomial_values(pts - z0, monomial_exponents(1, degree))
    res = np.asarray(u_values) - np.asarray(h_values)
    pair = mono.conj().T @ (w * res)
    res_norm = math.sqrt(max(float(np.real(np.dot(np.conj(res), w * res))), 1e-300))
    mono_norms = np.sqrt(np.maximum(np.real(np.einsum("ma,m,ma->a", np.conj(mono), w, mono)), 1e-300))
    return float(np.max(np.abs(pair) / (res_norm * mono_norms)))


def hormander_ratio(
    phi: ScalarField,
    psi: ScalarField,
    f: FormField01,
    degree: int,
    grid: GridDiscretization,
    domain: Optional[DomainBox] = None,
) -> SolveResult:
    """Minimal-norm solve of du/dzbar = f_1 and the weighted estimate ratio.

    ratio = ||u_min||^2_{phi+psi} / int (|f|^2 / psi_zz) e^{-(phi+psi)}.
    The minimal norm is taken over u_particular minus polynomials of degree
    <= N, which can only overestimate it, so ratio <= 1 verdicts are sound.
    """
    if f.n != 1:
        raise ValueError("the constructive solve is one-dimensional")
    pts = grid.points
    fv = f.evaluate(pts)[0]
    u_part = cauchy_transform(fv, grid)
    residual = dbar_residual(u_part, fv, grid)

    weight = phi + psi
    u_min_vals, _ = weighted_bergman_projection(u_part, weight, degree, grid, domain)
    u_min = u_part - u_min_vals

    mask = np.ones(pts.shape[0], dtype=bool)
    if domain is not None:
        mask = domain.contains(pts)
    wq = grid.weights * mask * np.exp(-np.clip(weight(pts), -700.0, None))
    minimal_norm_sq = float(np.real(np.dot(np.conj(u_min), wq * u_min)))

    if psi.hess is not None:
        psi_zz = np.real(psi.hess(pts)[:, 0, 0])
    else:
        psi_zz = np.real(grid.d_dzbar(grid.d_dz(psi(pts), 0), 0))
    on_support = np.abs(fv) > 0.0
    if np.any(psi_zz[on_support & mask] < 1e-8):
        raise ValueError("psi is not strictly subharmonic on the support of f")
    comparison_nodes = np.zeros(pts.shape[0])
    comparison_nodes[on_support] = np.abs(fv[on_support]) ** 2 / psi_zz[on_support]
    comparison = float(np.dot(comparison_nodes, wq))

    ratio = minimal_norm_sq / comparison
    return SolveResult(u_part, u_min, residual, minimal_norm_sq, comparison, ratio, degree)
