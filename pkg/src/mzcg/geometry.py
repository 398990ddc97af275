"""Linear coarse-graining maps: splitting phase space into resolved and
unresolved directions from a full-rank selector matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative singular-value cutoff below which a selector counts as rank deficient.
RANK_RTOL = 1e-10


class DimensionMismatchError(ValueError):
    """Shapes of a selector, state, or component vector are incompatible."""


class RankDeficientError(ValueError):
    """The selector matrix is numerically rank deficient."""


@dataclass(frozen=True)
class CGMap:
    """Resolved/unresolved decomposition built from an m-by-N selector ``phi``.

    ``sigma`` is the symmetric positive-definite square root of ``phi @ phi.T``,
    ``phi_star = phi.T @ inv(sigma_sq)`` lifts resolved values back into phase
    space, and ``psi`` has orthonormal rows spanning the unresolved directions.
    The defining identity is the partition of identity::

        phi_star @ phi + psi.T @ psi == eye(N)

    so any state splits as ``x = phi_star @ (phi @ x) + psi.T @ (psi @ x)``.
    Instances are immutable and safe to share across threads.
    """

    phi: np.ndarray
    sigma: np.ndarray
    sigma_sq: np.ndarray
    phi_star: np.ndarray
    psi: np.ndarray

    @property
    def n_resolved(self) -> int:
        return self.phi.shape[0]

    @property
    def n_full(self) -> int:
        return self.phi.shape[1]


def build_cg_map(phi) -> CGMap:
    """Construct a :class:`CGMap` from a full-rank m-by-N selector.

    ``psi`` is read off the SVD ``inv(sigma) @ phi = U D V.T`` as the last
    N - m rows of ``V.T``; its row signs are canonicalised (first entry of
    significant magnitude made positive) so outputs are reproducible even
    though the rows are only defined up to sign.

    Raises ``DimensionMismatchError`` if m > N and ``RankDeficientError`` if
    the smallest singular value falls below ``RANK_RTOL`` times the largest.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.ndim != 2:
        raise DimensionMismatchError(f"selector must be a matrix, got shape {phi.shape}")
    m, n = phi.shape
    if m > n:
        raise DimensionMismatchError(f"selector has more rows than columns: {m} > {n}")

    svals = np.linalg.svd(phi, compute_uv=False)
    if svals[-1] <= RANK_RTOL * svals[0]:
        raise RankDeficientError(
            f"selector is rank deficient: singular values span {svals[0]:.3e}..{svals[-1]:.3e}"
        )

    sigma_sq = phi @ phi.T
    # Symmetric eigendecomposition keeps sigma exactly symmetric for small m.
    evals, evecs = np.linalg.eigh(sigma_sq)
    sigma = (evecs * np.sqrt(evals)) @ evecs.T
    sigma_inv = (evecs * (1.0 / np.sqrt(evals))) @ evecs.T

    u, _, vt = np.linalg.svd(sigma_inv @ phi, full_matrices=True)
    # phi.T @ inv(sigma_sq) in factored form: the partition of identity then
    # rests on the orthogonality of V alone, not on cond(phi)^2.
    phi_star = vt[:m].T @ (u.T @ sigma_inv)
    psi = vt[m:].copy()
    for row in psi:
        big = np.nonzero(np.abs(row) > 1e-8)[0]
        if big.size and row[big[0]] < 0.0:
            row *= -1.0

    return CGMap(phi=phi, sigma=sigma, sigma_sq=sigma_sq, phi_star=phi_star, psi=psi)


def decompose(cg_map: CGMap, x) -> tuple[np.ndarray, np.ndarray]:
    """Split a phase-space vector into (resolved, unresolved) components."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cg_map.n_full,):
        raise DimensionMismatchError(
            f"state has shape {x.shape}, expected ({cg_map.n_full},)"
        )
    return cg_map.phi @ x, cg_map.psi @ x


def reconstruct(cg_map: CGMap, h, xt) -> np.ndarray:
    """Rebuild the phase-space vector from its (resolved, unresolved) parts."""
    h = np.asarray(h, dtype=float)
    xt = np.asarray(xt, dtype=float)
    m = cg_map.n_resolved
    k = cg_map.n_full - m
    if h.shape != (m,):
        raise DimensionMismatchError(f"resolved part has shape {h.shape}, expected ({m},)")
    if xt.shape != (k,):
        raise DimensionMismatchError(f"unresolved part has shape {xt.shape}, expected ({k},)")
    return cg_map.phi_star @ h + cg_map.psi.T @ xt
