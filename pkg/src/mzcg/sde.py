"""Euler-Maruyama integration of the full 2D dynamics and of scalar reduced
models, driven by counter-addressed Gaussian streams so that runs are exactly
reproducible, ensembles are independent of thread scheduling, and reduced
models can share the resolved-component Brownian increments of the full system
(common random numbers).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from . import models
from .benchmark import BenchmarkParams

# Any coordinate beyond this magnitude (or non-finite) counts as a blowup.
BLOWUP_LIMIT = 1e12

# Steps of noise generated per block inside the integration loops.
NOISE_CHUNK = 4096

# Ensembles are integrated in fixed-size stream blocks regardless of the
# worker count, so the arithmetic performed per trajectory never depends on
# how many threads execute it.
STREAM_BLOCK = 256


class GridMismatchError(ValueError):
    """Trajectories passed to an ensemble reduction have different time grids."""


class NumericalBlowupError(RuntimeError):
    """State left the representable range during integration.

    Carries the failing ``step`` index and optionally the ``stream_id`` of the
    offending trajectory.  Batch integrators stash the prefix recorded before
    the failure in ``recorded`` as (times, states); the single-trajectory
    wrappers re-raise with that prefix as a ``trajectory``.
    """

    def __init__(self, step, stream_id=None, trajectory=None, recorded=None):
        self.step = step
        self.stream_id = stream_id
        self.trajectory = trajectory
        self.recorded = recorded
        where = f" (stream {stream_id})" if stream_id is not None else ""
        super().__init__(f"state exceeded {BLOWUP_LIMIT:g} at step {step}{where}")


@dataclass
class NoiseStream:
    """Deterministic Gaussian increment source addressed by
    (master_seed, stream_id, position).

    Position ``n`` owns two dedicated 64-bit words of a Philox counter stream
    keyed by (master_seed, stream_id); the words become a standard-normal pair
    through the inverse normal CDF.  Every draw is therefore a pure function
    of the address, independent of chunking, replay, or thread schedule, and
    distinct stream ids give independent sequences.

    ``scalars`` returns the first component of the pair at the same position,
    which is what lets a reduced scalar model consume exactly the resolved
    component of the 2D increments driving the full model.
    """

    master_seed: int
    stream_id: int
    position: int = 0
    _key: np.ndarray = field(init=False, repr=False)
    _bitgen: Philox | None = field(init=False, repr=False, default=None)
    _word_cursor: int = field(init=False, repr=False, default=-1)

    def __post_init__(self):
        self._key = np.array(
            [self.master_seed % 2**64, self.stream_id % 2**64], dtype=np.uint64
        )

    def _take_words(self, count: int) -> np.ndarray:
        # Words [2*position, 2*position + count) of the keyed counter stream.
        # The generator persists between calls; it is reseeked only when
        # ``position`` was changed externally (Philox advances in 4-word
        # blocks, so a reseek may discard up to 2 words).
        word_start = 2 * self.position
        if self._bitgen is None or self._word_cursor != word_start:
            self._bitgen = Philox(key=self._key)
            if word_start >= 4:
                self._bitgen.advance(word_start // 4)
            skip = word_start % 4
            if skip:
                self._bitgen.random_raw(skip)
            self._word_cursor = word_start
        words = self._bitgen.random_raw(count)
        self._word_cursor += count
        return words

    def pairs(self, count: int) -> np.ndarray:
        """Next ``count`` standard-normal pairs, shape (count, 2)."""
        words = self._take_words(2 * count).reshape(count, 2)
        self.position += count
        u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)

    def scalars(self, count: int) -> np.ndarray:
        """Next ``count`` scalar draws: component 0 of :meth:`pairs` at the
        same positions, bit for bit."""
        return self.pairs(count)[:, 0]


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration window: step ``dt``, horizon ``t_final``, and the
    number of steps between recorded samples."""

    dt: float
    t_final: float
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least dt")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    def record_steps(self) -> np.ndarray:
        """Step indices at which the state is recorded (0 and n_steps always)."""
        idx = np.arange(0, self.n_steps + 1, self.record_stride)
        if idx[-1] != self.n_steps:
            idx = np.append(idx, self.n_steps)
        return idx


@dataclass(frozen=True)
class Trajectory:
    """One recorded realisation: strictly increasing ``times`` and per-time
    ``states`` (shape (n,) for scalar models, (n, 2) for the full system)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("times must be strictly increasing")

    @property
    def x(self) -> np.ndarray:
        """The resolved component (first coordinate for 2D states)."""
        return self.states if self.states.ndim == 1 else self.states[:, 0]


def _noise_amplitude(p: BenchmarkParams, dt: float) -> float:
    return np.sqrt(2.0 * dt / p.beta)


def integrate_full_batch(p, x0s, cfg, streams=None, thermostat=True):
    """Euler-Maruyama on the full 2D dynamics for a batch of trajectories.

    ``x0s`` has shape (n, 2); ``streams`` supplies one NoiseStream per row and
    may be omitted when ``thermostat`` is off (no noise is consumed then).
    Returns (times, recorded) with recorded of shape (n, n_rec, 2).
    """
    state = np.array(x0s, dtype=float)
    n = state.shape[0]
    if thermostat and (streams is None or len(streams) != n):
        raise ValueError("thermostatted runs need one stream per trajectory")
    n_steps = cfg.n_steps
    rec_idx = cfg.record_steps()
    recorded = np.empty((n, len(rec_idx), 2))
    rec_pos = 0
    if rec_idx[0] == 0:
        recorded[:, 0] = state
        rec_pos = 1

    dt = cfg.dt
    mu, lam, tau, omega = p.mu, p.lam, p.tau, p.omega
    amp = _noise_amplitude(p, dt)
    lto = lam * tau * omega

    step = 0
    while step < n_steps:
        span = min(NOISE_CHUNK, n_steps - step)
        if thermostat:
            noise = np.stack([s.pairs(span) for s in streams], axis=1)
        for j in range(span):
            x = state[:, 0]
            y = state[:, 1]
            c = np.cos(omega * x)
            gap = tau * np.sin(omega * x) - y
            gx = mu * x + lto * gap * c
            gy = -lam * gap
            if thermostat:
                zj = noise[j]
                state = np.stack(
                    (x - gx * dt + amp * zj[:, 0], y - gy * dt + amp * zj[:, 1]),
                    axis=-1,
                )
            else:
                state = np.stack((x - gx * dt, y - gy * dt), axis=-1)
            step += 1
            peak = np.abs(state).max()
            if not peak < BLOWUP_LIMIT:
                bad = int(np.argmax(~(np.abs(state).max(axis=1) < BLOWUP_LIMIT)))
                sid = streams[bad].stream_id if streams is not None else None
                raise NumericalBlowupError(
                    step,
                    stream_id=sid,
                    recorded=(rec_idx[:rec_pos] * dt, recorded[:, :rec_pos]),
                )
            if rec_pos < len(rec_idx) and step == rec_idx[rec_pos]:
                recorded[:, rec_pos] = state
                rec_pos += 1

    return rec_idx * dt, recorded


def integrate_scalar_batch(model, p, h0s, cfg, streams=None, thermostat=True):
    """Euler-Maruyama on a reduced scalar model for a batch of trajectories.

    The noise term is ``diffusion(model, h) * sqrt(2 dt / beta) * xi`` with
    ``xi`` the scalar view of each stream, so runs share the resolved-component
    increments of :func:`integrate_full_batch` at equal stream addresses.
    Returns (times, recorded) with recorded of shape (n, n_rec).
    """
    if thermostat:
        models.diffusion(model, 0.0)  # rejects models with no noise closure
    h = np.array(h0s, dtype=float)
    if thermostat and (streams is None or len(streams) != h.shape[0]):
        raise ValueError("thermostatted runs need one stream per trajectory")
    n_steps = cfg.n_steps
    rec_idx = cfg.record_steps()
    recorded = np.empty((h.shape[0], len(rec_idx)))
    rec_pos = 0
    if rec_idx[0] == 0:
        recorded[:, 0] = h
        rec_pos = 1

    dt = cfg.dt
    amp = _noise_amplitude(p, dt)

    step = 0
    while step < n_steps:
        span = min(NOISE_CHUNK, n_steps - step)
        if thermostat:
            noise = np.stack([s.scalars(span) for s in streams], axis=1)
        for j in range(span):
            if thermostat:
                h = h + models.drift(model, h) * dt + models.diffusion(model, h) * (
                    amp * noise[j]
                )
            else:
                h = h + models.drift(model, h) * dt
            step += 1
            peak = np.abs(h).max()
            if not peak < BLOWUP_LIMIT:
                bad = int(np.argmax(~(np.abs(h) < BLOWUP_LIMIT)))
                sid = streams[bad].stream_id if streams is not None else None
                raise NumericalBlowupError(
                    step,
                    stream_id=sid,
                    recorded=(rec_idx[:rec_pos] * dt, recorded[:, :rec_pos]),
                )
            if rec_pos < len(rec_idx) and step == rec_idx[rec_pos]:
                recorded[:, rec_pos] = h
                rec_pos += 1

    return rec_idx * dt, recorded


def integrate_crn_batch(p, scalar_models, xy0, h0, cfg, streams):
    """Integrate the full 2D dynamics and several reduced scalar models side by
    side under common random numbers: per stream and step, the full system
    consumes the increment pair while every scalar model consumes its first
    component, exactly as in the separate batch integrators.

    All trajectories start from the same ``xy0`` (full) and ``h0`` (models).
    Returns (times, full_x, model_recs) where full_x has shape (n, n_rec) and
    model_recs is one same-shaped array per model.
    """
    n = len(streams)
    state = np.tile(np.asarray(xy0, dtype=float), (n, 1))
    hs = [np.full(n, float(h0)) for _ in scalar_models]
    for model in scalar_models:
        models.diffusion(model, 0.0)

    n_steps = cfg.n_steps
    rec_idx = cfg.record_steps()
    full_x = np.empty((n, len(rec_idx)))
    model_recs = [np.empty((n, len(rec_idx))) for _ in scalar_models]
    rec_pos = 0
    if rec_idx[0] == 0:
        full_x[:, 0] = state[:, 0]
        for rec, h in zip(model_recs, hs):
            rec[:, 0] = h
        rec_pos = 1

    dt = cfg.dt
    mu, lam, tau, omega = p.mu, p.lam, p.tau, p.omega
    amp = _noise_amplitude(p, dt)
    lto = lam * tau * omega

    step = 0
    while step < n_steps:
        span = min(NOISE_CHUNK, n_steps - step)
        noise = np.stack([s.pairs(span) for s in streams], axis=1)
        for j in range(span):
            zj = noise[j]
            x = state[:, 0]
            y = state[:, 1]
            c = np.cos(omega * x)
            gap = tau * np.sin(omega * x) - y
            gx = mu * x + lto * gap * c
            gy = -lam * gap
            state = np.stack(
                (x - gx * dt + amp * zj[:, 0], y - gy * dt + amp * zj[:, 1]),
                axis=-1,
            )
            z0 = zj[:, 0]
            for i, model in enumerate(scalar_models):
                h = hs[i]
                hs[i] = h + models.drift(model, h) * dt + models.diffusion(model, h) * (
                    amp * z0
                )
            step += 1
            peak = max(np.abs(state).max(), max(np.abs(h).max() for h in hs))
            if not peak < BLOWUP_LIMIT:
                raise NumericalBlowupError(step)
            if rec_pos < len(rec_idx) and step == rec_idx[rec_pos]:
                full_x[:, rec_pos] = state[:, 0]
                for rec, h in zip(model_recs, hs):
                    rec[:, rec_pos] = h
                rec_pos += 1

    return rec_idx * dt, full_x, model_recs


def simulate_full(p, x0, cfg, stream, thermostat=True) -> Trajectory:
    """Integrate one realisation of the full 2D dynamics from ``x0``.

    With the thermostat off the Brownian term is dropped entirely and the run
    is a deterministic gradient flow.  On blowup the raised error carries the
    trajectory recorded so far.
    """
    try:
        times, rec = integrate_full_batch(
            p, np.asarray(x0, dtype=float)[None, :], cfg,
            None if not thermostat else [stream], thermostat,
        )
    except NumericalBlowupError as err:
        t_part, rec_part = err.recorded
        raise NumericalBlowupError(
            err.step, stream_id=stream.stream_id,
            trajectory=Trajectory(t_part, rec_part[0]),
        ) from None
    return Trajectory(times, rec[0])


def simulate_scalar(model, p, h0, cfg, stream, thermostat=True) -> Trajectory:
    """Integrate one realisation of a reduced scalar model from ``h0``."""
    try:
        times, rec = integrate_scalar_batch(
            model, p, np.array([h0], dtype=float), cfg,
            None if not thermostat else [stream], thermostat,
        )
    except NumericalBlowupError as err:
        t_part, rec_part = err.recorded
        raise NumericalBlowupError(
            err.step, stream_id=stream.stream_id,
            trajectory=Trajectory(t_part, rec_part[0]),
        ) from None
    return Trajectory(times, rec[0])


def ensemble_mean(trajectories) -> tuple[Trajectory, np.ndarray]:
    """Pointwise mean of trajectories on one common grid, plus the pointwise
    standard error of the mean (zero for a single trajectory)."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    times = trajectories[0].times
    for t in trajectories[1:]:
        if t.times.shape != times.shape or not np.array_equal(t.times, times):
            raise GridMismatchError("trajectories are on different time grids")
    stack = np.stack([t.states for t in trajectories])
    mean = stack.mean(axis=0)
    if len(trajectories) == 1:
        stderr = np.zeros_like(mean)
    else:
        stderr = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    return Trajectory(times, mean), stderr


def map_stream_blocks(worker, n_items, threads=1, block=STREAM_BLOCK):
    """Run ``worker(start, stop)`` over fixed-size index blocks and return the
    results in block order.

    The block partition never depends on ``threads``, so each trajectory is
    computed by identical array operations whatever the worker count; only
    scheduling changes.  Workers must not mutate shared state.
    """
    spans = [(i, min(i + block, n_items)) for i in range(0, n_items, block)]
    if threads <= 1 or len(spans) == 1:
        return [worker(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, a, b) for a, b in spans]
        return [f.result() for f in futures]
