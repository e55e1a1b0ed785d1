"""
Single-particle machinery: tridiagonal diagonalization, exact spectral
time evolution, end-to-end reflection/transmission amplitudes and the
effective 2x2 beam-splitter matrix read off at the transfer time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .lattice import ChainSpec

__all__ = [
    "SpectralDecomp",
    "ScatterMatrix",
    "diagonalize",
    "rt_coefficients",
    "evolve_single",
    "propagator",
    "density_history",
    "scatter_matrix",
]


@dataclass(frozen=True)
class SpectralDecomp:
    """
    Eigenvalues E_k (ascending) and orthonormal real eigenvectors O
    (columns) of the single-particle Hamiltonian, plus the ChainSpec
    they came from.
    """
    spec: ChainSpec
    energies: np.ndarray
    modes: np.ndarray

    def end_components(self) -> tuple[np.ndarray, np.ndarray]:
        """(O_{ak}, O_{bk}) rows at the flagged end sites a, b."""
        a, b = self.spec.end_sites
        return self.modes[a - 1, :], self.modes[b - 1, :]


def diagonalize(spec: ChainSpec) -> SpectralDecomp:
    """
    Full symmetric-tridiagonal eigendecomposition.

    Deterministic sign convention: the first component of each eigenvector
    whose magnitude exceeds 1e-12 of the column maximum is made positive,
    so serialized decompositions reproduce bit-for-bit.
    """
    d, e = spec.tridiagonal()
    energies, modes = eigh_tridiagonal(d, e)
    modes = np.ascontiguousarray(modes)
    for k in range(modes.shape[1]):
        col = modes[:, k]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if col[nz[0]] < 0.0:
            modes[:, k] = -col
    energies.setflags(write=False)
    modes.setflags(write=False)
    return SpectralDecomp(spec=spec, energies=energies, modes=modes)


def rt_coefficients(decomp: SpectralDecomp, t):
    """
    Return (R, T) at time t (scalar or array):
      R(t) = sum_k O_{1k}^2 exp(-i E_k t)      amplitude end -> same end
      T(t) = sum_k O_{1k} O_{Lk} exp(-i E_k t) amplitude end -> other end
    where 1 and L are the flagged end sites.
    """
    o1, oL = decomp.end_components()
    t = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t, decomp.energies))
    R = phases @ (o1 * o1)
    T = phases @ (o1 * oL)
    if t.ndim == 0:
        return complex(R), complex(T)
    return R, T


def evolve_single(decomp: SpectralDecomp, psi0: np.ndarray, t: float) -> np.ndarray:
    """psi(t) = O exp(-iEt) O^T psi0; requires a normalized input state."""
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
        raise ValueError("psi0 must be normalized")
    c = decomp.modes.T @ psi0
    return decomp.modes @ (np.exp(-1j * decomp.energies * t) * c)


def propagator(decomp: SpectralDecomp, t: float) -> np.ndarray:
    """Dense unitary exp(-iHt)."""
    return (decomp.modes * np.exp(-1j * decomp.energies * t)) @ decomp.modes.T


def density_history(decomp: SpectralDecomp, psi0: np.ndarray, t_grid) -> np.ndarray:
    """<n_j(t)> for each t in t_grid; shape (len(t_grid), L)."""
    psi0 = np.asarray(psi0, dtype=complex)
    c = decomp.modes.T @ psi0
    t_grid = np.asarray(t_grid, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t_grid, decomp.energies))
    psi_t = (phases * c) @ decomp.modes.T
    return np.abs(psi_t) ** 2


# ---- effective beam splitter ----

@dataclass(frozen=True)
class ScatterMatrix:
    """
    Effective 2x2 operator S(t*) = [[r, t], [t, r]] between the end sites,
    factored as S = D * unitary_part. |D|^2 = |r|^2 + |t|^2 and the phase
    of D is anchored so that the unitary part matches the asymptotic
    impurity form (diagonal phase arg beta/(i+beta); for chains without a
    center impurity the diagonal is anchored real positive). unitary_part
    is the exactly unitary polar factor of S/D; residual records how far
    S/D was from it.
    """
    r: complex
    t: complex
    damping: complex
    unitary_part: np.ndarray
    residual: float


def _anchor_phases(spec: ChainSpec) -> tuple[float, float]:
    """Target phases (theta_r, theta_t) of the unitary part's entries."""
    beta = 0.0
    if spec.embedded_length % 2 == 1:
        a, b = spec.end_sites
        beta = float(spec.potentials[(a + b) // 2 - 1])
    if beta != 0.0:
        theta_r = float(np.angle(beta / (1j + beta)))
    else:
        theta_r = 0.0
    return theta_r, theta_r - np.pi / 2.0


def scatter_matrix(decomp: SpectralDecomp, t_star: float) -> ScatterMatrix:
    """
    Read off the beam splitter at the transfer time. Raises when almost
    no amplitude sits at the end sites (wrong t_star).
    """
    if t_star <= 0.0:
        raise ValueError("t_star must be > 0")
    r, t = rt_coefficients(decomp, t_star)
    mag2 = abs(r) ** 2 + abs(t) ** 2
    if mag2 < 1e-8:
        raise ValueError("degenerate extraction: |r|^2 + |t|^2 < 1e-8 at this t_star")

    theta_r, theta_t = _anchor_phases(decomp.spec)
    # anchor the damping phase on the larger entry for conditioning
    if abs(r) >= abs(t):
        phase = np.angle(r) - theta_r
    else:
        phase = np.angle(t) - theta_t
    D = np.sqrt(mag2) * np.exp(1j * phase)

    s_plus = (r + t) / D      # eigenvalues of S/D in the +/- basis
    s_minus = (r - t) / D
    p_plus = s_plus / abs(s_plus)
    p_minus = s_minus / abs(s_minus)
    unitary = np.array([
        [0.5 * (p_plus + p_minus), 0.5 * (p_plus - p_minus)],
        [0.5 * (p_plus - p_minus), 0.5 * (p_plus + p_minus)],
    ])
    scaled = np.array([[r, t], [t, r]]) / D
    residual = float(np.max(np.abs(scaled - unitary)))
    return ScatterMatrix(r=complex(r), t=complex(t), damping=complex(D),
                         unitary_part=unitary, residual=residual)
