"""Memory-kernel machinery: Monte Carlo estimation by sampling characteristics
of the orthogonal (fluctuation) dynamics, the closed-form exponential
approximation of the kernel, its divergence, and the collapsed (instantaneous)
memory integrals used by the reduced models.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from . import benchmark
from .benchmark import BenchmarkParams
from .geometry import CGMap
from .sde import (
    BLOWUP_LIMIT,
    IntegratorConfig,
    NoiseStream,
    NumericalBlowupError,
    Trajectory,
    map_stream_blocks,
)

# Samples per work block in the Monte Carlo estimators; fixed so estimates do
# not depend on the thread count.
SAMPLE_BLOCK = 2048


@dataclass(frozen=True)
class KernelEstimate:
    """Monte Carlo estimate of the scalar memory kernel at conditioning value
    ``x0``: per-lag values with standard errors."""

    x0: float
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def __post_init__(self):
        _check_lags(self.lags)
        if not (len(self.lags) == len(self.values) == len(self.stderr)):
            raise ValueError("lags, values and stderr must have equal length")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")


@dataclass(frozen=True)
class KernelMatrixEstimate:
    """Monte Carlo estimate of the block memory-kernel matrix: per-lag N-by-N
    matrices in the (resolved, unresolved) projection basis of a CGMap."""

    x0: float
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def __post_init__(self):
        _check_lags(self.lags)
        if not (len(self.lags) == len(self.values) == len(self.stderr)):
            raise ValueError("lags, values and stderr must have equal length")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")


def _check_lags(lags):
    if lags[0] != 0.0:
        raise ValueError("lag grid must start at 0")
    if len(lags) > 1 and not np.all(np.diff(lags) > 0.0):
        raise ValueError("lag grid must be strictly increasing")


def kernel_decay_rate(p: BenchmarkParams, h) -> float:
    """Decay rate lam * (1 + tau^2 omega^2 cos^2(omega h)) of the approximate
    kernel at conditioning value ``h``."""
    c2 = np.square(np.cos(p.omega * np.asarray(h, dtype=float)))
    return p.lam * (1.0 + p.tau * p.tau * p.omega * p.omega * c2)


def approx_kernel(p: BenchmarkParams, s, h):
    """Closed-form kernel approximation
    lam tau^2 omega^2 cos^2(omega h) * exp(-lam (1 + tau^2 omega^2 cos^2(omega h)) s),
    valid when initial fluctuations of the unresolved mode are small."""
    c2 = np.square(np.cos(p.omega * np.asarray(h, dtype=float)))
    t2w2 = p.tau * p.tau * p.omega * p.omega
    return p.lam * t2w2 * c2 * np.exp(-p.lam * (1.0 + t2w2 * c2) * np.asarray(s, dtype=float))


def approx_kernel_div(p: BenchmarkParams, s, h):
    """d/dh of :func:`approx_kernel` (exact derivative of the closed form)."""
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    c2 = np.square(np.cos(p.omega * h))
    t2w2 = p.tau * p.tau * p.omega * p.omega
    return (
        -p.lam
        * t2w2
        * p.omega
        * np.sin(2.0 * p.omega * h)
        * (1.0 - p.lam * t2w2 * c2 * s)
        * np.exp(-p.lam * (1.0 + t2w2 * c2) * s)
    )


def memory_integral_closed_form(p: BenchmarkParams, h):
    """Lag integrals of the approximate kernel with the conditioning value
    frozen, as (drift_term, div_term):

        drift_term = tau^2 omega^2 cos^2(omega h) / (1 + tau^2 omega^2 cos^2(omega h)) * mu h
        div_term   = (1/beta) tau^2 omega^3 sin(2 omega h) / (1 + tau^2 omega^2 cos^2(omega h))^2
    """
    h = np.asarray(h, dtype=float)
    c2 = np.square(np.cos(p.omega * h))
    t2w2 = p.tau * p.tau * p.omega * p.omega
    denom = 1.0 + t2w2 * c2
    drift_term = t2w2 * c2 / denom * (p.mu * h)
    div_term = (1.0 / p.beta) * t2w2 * p.omega * np.sin(2.0 * p.omega * h) / np.square(denom)
    return drift_term, div_term


def _odrift_xy(p, x, y):
    # Component form of benchmark.orthogonal_drift on contiguous arrays,
    # shared by the RK4 stages.
    wx = x * p.omega
    c = np.cos(wx)
    np.sin(wx, out=wx)
    wx *= p.tau
    wx -= y  # wx is now the valley gap tau*sin(omega x) - y
    dy = p.lam * wx
    wx *= c
    wx *= -(p.lam * p.tau * p.omega)
    return wx, dy


def _rk4_march(p, x, y, span, dt):
    """Advance a batch of orthogonal-dynamics states by ``span`` with classical
    RK4, using equal substeps no longer than ``dt`` (landing exactly)."""
    n_sub = max(1, ceil(span / dt - 1e-12))
    h = span / n_sub
    for _ in range(n_sub):
        k1x, k1y = _odrift_xy(p, x, y)
        k2x, k2y = _odrift_xy(p, x + (0.5 * h) * k1x, y + (0.5 * h) * k1y)
        k3x, k3y = _odrift_xy(p, x + (0.5 * h) * k2x, y + (0.5 * h) * k2y)
        k4x, k4y = _odrift_xy(p, x + h * k3x, y + h * k3y)
        x = x + (h / 6.0) * (k1x + 2.0 * (k2x + k3x) + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * (k2y + k3y) + k4y)
    return x, y


def orthogonal_trajectory(p: BenchmarkParams, x0, y0, cfg: IntegratorConfig) -> Trajectory:
    """Integrate one characteristic curve of the orthogonal dynamics (the full
    nonlinear fluctuation drift, no noise) from (x0, y0) with classical RK4 at
    step ``cfg.dt``."""
    x = np.array([x0], dtype=float)
    y = np.array([y0], dtype=float)
    rec_idx = cfg.record_steps()
    recorded = np.empty((len(rec_idx), 2))
    rec_pos = 0
    if rec_idx[0] == 0:
        recorded[0] = (x[0], y[0])
        rec_pos = 1
    for step in range(1, cfg.n_steps + 1):
        x, y = _rk4_march(p, x, y, cfg.dt, cfg.dt)
        if not max(abs(x[0]), abs(y[0])) < BLOWUP_LIMIT:
            raise NumericalBlowupError(
                step,
                trajectory=Trajectory(rec_idx[:rec_pos] * cfg.dt, recorded[:rec_pos]),
            )
        if rec_pos < len(rec_idx) and step == rec_idx[rec_pos]:
            recorded[rec_pos] = (x[0], y[0])
            rec_pos += 1
    return Trajectory(rec_idx * cfg.dt, recorded)


def _sample_orthogonal_drifts(p, x0, lags, n_samples, stream, cfg, threads):
    """Fluctuation-drift vectors along sampled orthogonal characteristics.

    Sample ``i`` starts at (x0, y0_i) with y0_i drawn from the conditional law
    of the unresolved mode on stream ``stream.stream_id + i``, and is marched
    between consecutive lags with RK4 substeps of at most ``cfg.dt``.  Returns
    an array of shape (n_lags, n_samples, 2).
    """
    lags = np.asarray(lags, dtype=float)
    _check_lags(lags)
    if lags[-1] > cfg.t_final * (1.0 + 1e-12):
        raise ValueError(f"largest lag {lags[-1]:g} exceeds horizon {cfg.t_final:g}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")

    def worker(a, b):
        k = b - a
        y = np.empty(k)
        for i in range(k):
            sub = NoiseStream(stream.master_seed, stream.stream_id + a + i)
            y[i] = benchmark.conditional_y_sample(p, x0, sub)
        x = np.full(k, float(x0))
        out = np.empty((len(lags), k, 2))
        prev = 0.0
        for li, s in enumerate(lags):
            if s > prev:
                x, y = _rk4_march(p, x, y, s - prev, cfg.dt)
                prev = s
            peak = max(np.abs(x).max(), np.abs(y).max())
            if not peak < BLOWUP_LIMIT:
                bad = int(np.argmax(~(np.maximum(np.abs(x), np.abs(y)) < BLOWUP_LIMIT)))
                raise NumericalBlowupError(li, stream_id=stream.stream_id + a + bad)
            out[li] = benchmark.orthogonal_drift(p, x, y)
        return out

    blocks = map_stream_blocks(worker, n_samples, threads=threads, block=SAMPLE_BLOCK)
    return np.concatenate(blocks, axis=1)


def _mc_moments(prod, beta):
    n = prod.shape[1]
    values = beta * prod.mean(axis=1)
    stderr = beta * prod.std(axis=1, ddof=1) / np.sqrt(n)
    return values, stderr


def empirical_kernel(
    p: BenchmarkParams, x0, lags, n_samples, stream, cfg, threads=1
) -> KernelEstimate:
    """Estimate the scalar memory kernel at conditioning value ``x0``.

    For each sample the resolved component of the fluctuation drift is
    evaluated along an orthogonal characteristic at every lag; the kernel is
    beta times the sample mean of its product with the lag-zero value.
    """
    lags = np.asarray(lags, dtype=float)
    drifts = _sample_orthogonal_drifts(p, x0, lags, n_samples, stream, cfg, threads)
    a = drifts[:, :, 0]
    values, stderr = _mc_moments(a * a[0], p.beta)
    return KernelEstimate(
        x0=float(x0), lags=lags, values=values, stderr=stderr, n_samples=n_samples
    )


def empirical_kernel_matrix(
    p: BenchmarkParams, cg_map: CGMap, x0, lags, n_samples, stream, cfg, threads=1
) -> KernelMatrixEstimate:
    """Estimate the block kernel matrix: fluctuation drifts are projected onto
    (inv(sigma) @ phi, psi) and all pairwise lag-s x lag-0 products are
    averaged.  With the same stream and grid, entry (0, 0) reproduces
    :func:`empirical_kernel` exactly."""
    lags = np.asarray(lags, dtype=float)
    drifts = _sample_orthogonal_drifts(p, x0, lags, n_samples, stream, cfg, threads)
    sigma_inv_phi = np.linalg.solve(cg_map.sigma, cg_map.phi)
    proj = np.vstack([sigma_inv_phi, cg_map.psi])  # (N, N)
    g = drifts @ proj.T  # (n_lags, n, N)
    nfull = proj.shape[0]
    values = np.empty((len(lags), nfull, nfull))
    stderr = np.empty_like(values)
    for j in range(nfull):
        for k in range(nfull):
            values[:, j, k], stderr[:, j, k] = _mc_moments(g[:, :, j] * g[0, :, k], p.beta)
    return KernelMatrixEstimate(
        x0=float(x0), lags=lags, values=values, stderr=stderr, n_samples=n_samples
    )


def default_lag_grid(p: BenchmarkParams, x0, n_lags=60, efolds=5.0) -> np.ndarray:
    """Lag grid for kernel estimation: zero plus geometrically spaced points
    out to ``efolds`` decay times of the approximate kernel at ``x0``."""
    s_max = efolds / kernel_decay_rate(p, x0)
    return np.concatenate([[0.0], np.geomspace(s_max / 100.0, s_max, n_lags - 1)])


def fit_decay_rate(lags, values, s_max=None, floor_ratio=1e-3) -> float:
    """Least-squares slope of log |values| against lag, over lags up to
    ``s_max`` and values above ``floor_ratio`` of the lag-zero magnitude.
    Returns the fitted (negative) rate."""
    lags = np.asarray(lags, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = np.abs(values) > floor_ratio * np.abs(values[0])
    if s_max is not None:
        mask &= lags <= s_max * (1.0 + 1e-12)
    if mask.sum() < 2:
        raise ValueError("fewer than two usable points for the decay fit")
    slope, _ = np.polyfit(lags[mask], np.log(np.abs(values[mask])), 1)
    return float(slope)
