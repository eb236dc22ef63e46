"""Stochastic propagation of monitored open systems.

The conditioned state advances by an Ito scheme in which the deterministic
drift takes the same fourth-order step as the unconditioned integrator while
the measurement back-action enters at first order in the noise (weak order 1,
strong order 1/2).  With no measurement the scheme therefore reduces exactly
to the unconditioned integrator.  Both the nonlinear (normalized, true
statistics) and the linear (unnormalized, ostensible statistics with
log-weights) forms are provided, together with the purity-rate prediction for
pure states, the Heisenberg-picture noise completion, and the noise-coupling
blocks of the optical realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    LindbladModel,
    _Propagator,
    check_density_matrix,
    measurement_ops,
)
from .errors import (
    DimensionMismatchError,
    InternalInconsistencyError,
    NotPureError,
    StateInvalidError,
    ValidationError,
    WeightUnderflowError,
)
from .linalg import DEFAULT_TOL, positive_sqrt
from .noise import NoiseSource
from .reps import BRep, MRep, validate_brep

MODES = ("nonlinear", "linear")


@dataclass(frozen=True)
class SimulationConfig:
    """Knobs of an ensemble run; all randomness flows from ``seed``.

    ``snapshot_stride=None`` stores about fifty evenly spaced snapshots; the
    initial and final states are always included.  ``positivity_tol=None``
    scales the abort threshold to the discretization noise of the scheme (an
    Ito step from a nearly pure state dips negative by O(dt) routinely, so an
    absolute threshold would have to depend on dt).
    """

    dt: float
    steps: int
    n_traj: int
    seed: int
    mode: str = "nonlinear"
    snapshot_stride: int | None = None
    store_dw: bool = True
    store_purity: bool = True
    positivity_tol: float | None = None
    log_weight_floor: float = -700.0

    def __post_init__(self):
        if self.dt <= 0.0 or not np.isfinite(self.dt):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValidationError(f"steps must be at least 1, got {self.steps}")
        if self.n_traj < 1:
            raise ValidationError(f"n_traj must be at least 1, got {self.n_traj}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be at least 1 when given")


@dataclass(frozen=True)
class Trajectory:
    """Per-trajectory view of an ensemble record.

    ``currents`` holds the measured current (increment divided by dt) for each
    step; ``purity`` and ``log_weight`` are tabulated on the full time grid.
    """

    stream_id: int
    times: np.ndarray
    currents: np.ndarray
    noise: np.ndarray | None
    purity: np.ndarray | None
    log_weight: np.ndarray
    snapshot_steps: np.ndarray
    snapshots: np.ndarray | None


@dataclass(frozen=True)
class Ensemble:
    """Seeded record of an ensemble of conditioned trajectories."""

    config: SimulationConfig
    hbar: float
    times: np.ndarray
    currents: np.ndarray
    noise: np.ndarray | None
    purity: np.ndarray | None
    log_weight: np.ndarray
    snapshot_steps: np.ndarray
    snapshots: np.ndarray | None
    model_fingerprint: str = ""
    rep_fingerprint: str = ""

    @property
    def n_traj(self) -> int:
        return self.currents.shape[0]

    @property
    def steps(self) -> int:
        return self.currents.shape[1]

    @property
    def noise_dim(self) -> int:
        return self.currents.shape[2]

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(
            stream_id=k,
            times=self.times,
            currents=self.currents[k],
            noise=None if self.noise is None else self.noise[k],
            purity=None if self.purity is None else self.purity[k],
            log_weight=self.log_weight[k],
            snapshot_steps=self.snapshot_steps,
            snapshots=None if self.snapshots is None else self.snapshots[:, k],
        )

    def trajectories(self):
        return [self.trajectory(k) for k in range(self.n_traj)]

    def snapshot_index(self, step: int) -> int:
        hits = np.nonzero(self.snapshot_steps == step)[0]
        if hits.size == 0:
            raise ValidationError(f"no snapshot stored at step {step}")
        return int(hits[0])


class _StepWork:
    """Precomputed operators shared by every step of one (model, measurement) pair."""

    def __init__(self, model: LindbladModel, mrep: MRep):
        if model.channels != mrep.channels:
            raise DimensionMismatchError(
                f"model has {model.channels} channels, measurement matrix {mrep.channels}"
            )
        if abs(model.hbar - mrep.hbar) > 1e-12 * max(model.hbar, mrep.hbar):
            raise ValidationError(
                f"model and measurement matrix carry different scales:"
                f" {model.hbar} vs {mrep.hbar}"
            )
        self.hbar = model.hbar
        self.dim = model.dim
        self.prop = _Propagator(model)
        self.xops = measurement_ops(mrep, model.lindblads)

    def noise_scale(self) -> float:
        return float(np.sum(np.abs(self.xops) ** 2)) / self.hbar**2


def _mean_current(work: _StepWork, rho: np.ndarray) -> np.ndarray:
    """True mean of the measured current for a (batch of) state(s), shape (..., 2L)."""
    return 2.0 * np.real(np.einsum("jab,...ba->...j", work.xops, rho)) / work.hbar


def _step_nonlinear(work: _StepWork, rho: np.ndarray, dw: np.ndarray, dt: float):
    """Batched nonlinear step; returns (normalized state, current increment, pre-norm trace)."""
    drift = work.prop.rk4(rho, dt)
    e = np.tensordot(dw, work.xops, axes=([-1], [0]))
    lin = e @ rho + rho @ e.conj().swapaxes(-1, -2)
    tr_lin = np.real(np.einsum("...ii->...", lin))
    update = (lin - tr_lin[..., None, None] * rho) / work.hbar
    out = drift + update
    out = (out + out.conj().swapaxes(-1, -2)) / 2.0
    tr = np.real(np.einsum("...ii->...", out))
    y_dt = _mean_current(work, rho) * dt + dw
    return out / tr[..., None, None], y_dt, tr


def _step_linear(work: _StepWork, rho: np.ndarray, y_dt: np.ndarray, dt: float):
    """Batched linear step; returns (unnormalized state, its trace)."""
    drift = work.prop.rk4(rho, dt)
    e = np.tensordot(y_dt, work.xops, axes=([-1], [0]))
    lin = (e @ rho + rho @ e.conj().swapaxes(-1, -2)) / work.hbar
    out = drift + lin
    out = (out + out.conj().swapaxes(-1, -2)) / 2.0
    tr = np.real(np.einsum("...ii->...", out))
    return out, tr


def _check_step_args(work: _StepWork, rho: np.ndarray, vec: np.ndarray, dt: float, name: str):
    if rho.shape != (work.dim, work.dim):
        raise DimensionMismatchError(
            f"state must be {work.dim} x {work.dim}, got {rho.shape}"
        )
    if vec.shape != (work.xops.shape[0],):
        raise DimensionMismatchError(
            f"{name} must have length {work.xops.shape[0]}, got shape {vec.shape}"
        )
    if dt <= 0.0:
        raise ValidationError("dt must be positive")


def sme_step_nonlinear(
    model: LindbladModel, mrep: MRep, rho: np.ndarray, dw: np.ndarray, dt: float
):
    """One normalized conditioned step; returns (new state, current increment).

    The current increment carries the true-mean term plus the supplied Wiener
    increment; the returned state is Hermitized and renormalized.  Positivity
    is not checked here (the ensemble runner monitors it).
    """
    work = _StepWork(model, mrep)
    rho = np.asarray(rho, dtype=complex)
    dw = np.asarray(dw, dtype=float)
    _check_step_args(work, rho, dw, dt, "dw")
    out, y_dt, _tr = _step_nonlinear(work, rho, dw, dt)
    return out, y_dt


def sme_step_linear(
    model: LindbladModel, mrep: MRep, rho_bar: np.ndarray, y_dt: np.ndarray, dt: float
):
    """One unnormalized (ostensible-statistics) step.

    ``y_dt`` is the ostensible current increment (zero mean, variance dt per
    component).  Returns the unnormalized updated matrix and the log-weight
    increment log Tr[out] - log Tr[in].
    """
    work = _StepWork(model, mrep)
    rho_bar = np.asarray(rho_bar, dtype=complex)
    y_dt = np.asarray(y_dt, dtype=float)
    _check_step_args(work, rho_bar, y_dt, dt, "y_dt")
    tr_in = float(np.real(np.trace(rho_bar)))
    if tr_in <= 0.0:
        raise StateInvalidError(f"input trace {tr_in} is not positive")
    out, tr = _step_linear(work, rho_bar, y_dt, dt)
    if tr <= 0.0:
        raise StateInvalidError(f"updated trace {float(tr)} is not positive")
    return out, float(np.log(tr / tr_in))


def _snapshot_steps(steps: int, stride: int | None) -> np.ndarray:
    if stride is None:
        stride = max(1, steps // 50)
    marks = set(range(0, steps + 1, stride))
    marks.add(0)
    marks.add(steps)
    return np.array(sorted(marks), dtype=int)


def _auto_positivity_tol(work: _StepWork, dt: float) -> float:
    # An Ito step from a nearly pure state acquires a negative eigenvalue of
    # order dt * |z|^2 * (noise scale); the threshold sits far above that so
    # only genuine instability (dt too large for the rates) trips it.
    return max(1e-6, 60.0 * dt * max(1.0, work.noise_scale()))


def simulate_ensemble(
    model: LindbladModel,
    mrep: MRep,
    rho0: np.ndarray,
    config: SimulationConfig,
    block_steps: int = 256,
) -> Ensemble:
    """Run independent conditioned trajectories, one noise stream per trajectory.

    Trajectory ``k`` consumes the stream keyed by (seed, k); the output is a
    deterministic function of the configuration alone, independent of
    ``block_steps`` (an internal batching knob).
    """
    check_density_matrix(rho0)
    # Local import: the file-format layer depends on the domain layers, not
    # the other way around; only the fingerprint helpers are needed here.
    from .serialize import RepFile, fingerprint_model, fingerprint_rep

    model_fp = fingerprint_model(model)
    rep_fp = fingerprint_rep(RepFile("mrep", mrep, mrep.hbar))
    work = _StepWork(model, mrep)
    n, steps, dt = config.n_traj, config.steps, config.dt
    linear = config.mode == "linear"
    noise_dim = work.xops.shape[0]
    dim = model.dim
    pos_tol = (
        config.positivity_tol
        if config.positivity_tol is not None
        else _auto_positivity_tol(work, dt)
    )

    times = np.arange(steps + 1) * dt
    currents = np.empty((n, steps, noise_dim))
    noise = np.empty((n, steps, noise_dim)) if config.store_dw else None
    pur = np.empty((n, steps + 1)) if config.store_purity else None
    logw = np.zeros((n, steps + 1))
    snap_steps = _snapshot_steps(steps, config.snapshot_stride)
    snaps = np.empty((snap_steps.size, n, dim, dim), dtype=complex)
    snap_pos = {int(s): i for i, s in enumerate(snap_steps)}

    rho = np.broadcast_to(np.asarray(rho0, dtype=complex), (n, dim, dim)).copy()
    if pur is not None:
        pur[:, 0] = np.real(np.einsum("nab,nba->n", rho, rho))
    snaps[0] = rho

    sources = [NoiseSource(config.seed, k, noise_dim) for k in range(n)]
    m = 0
    while m < steps:
        block = min(block_steps, steps - m)
        dw_block = np.stack([src.draw_block(block, dt) for src in sources])
        for j in range(block):
            dw = dw_block[:, j]
            if linear:
                out, tr = _step_linear(work, rho, dw, dt)
                if np.any(tr <= 0.0):
                    bad = int(np.argmax(tr <= 0.0))
                    raise StateInvalidError(
                        f"trajectory {bad}, step {m + 1}: non-positive trace {tr[bad]:.3e}"
                    )
                logw[:, m + 1] = logw[:, m] + np.log(tr)
                if np.any(logw[:, m + 1] < config.log_weight_floor):
                    bad = int(np.argmax(logw[:, m + 1] < config.log_weight_floor))
                    raise WeightUnderflowError(
                        f"trajectory {bad}, step {m + 1}: log-weight"
                        f" {logw[bad, m + 1]:.1f} below floor"
                    )
                rho = out / tr[:, None, None]
                y_dt = dw
            else:
                rho, y_dt, _tr = _step_nonlinear(work, rho, dw, dt)
            currents[:, m] = y_dt / dt
            if noise is not None:
                noise[:, m] = dw
            if np.isfinite(pos_tol):
                wmin = np.linalg.eigvalsh(rho)[:, 0]
                if np.any(wmin < -pos_tol):
                    bad = int(np.argmax(wmin < -pos_tol))
                    raise StateInvalidError(
                        f"trajectory {bad}, step {m + 1}: min eigenvalue {wmin[bad]:.3e}"
                        f" below -{pos_tol:.3e}"
                    )
            if pur is not None:
                pur[:, m + 1] = np.real(np.einsum("nab,nba->n", rho, rho))
            if (m + 1) in snap_pos:
                snaps[snap_pos[m + 1]] = rho
            m += 1

    return Ensemble(
        config=config,
        hbar=model.hbar,
        times=times,
        currents=currents,
        noise=noise,
        purity=pur,
        log_weight=logw,
        snapshot_steps=snap_steps,
        snapshots=snaps,
        model_fingerprint=model_fp,
        rep_fingerprint=rep_fp,
    )


# ---------------------------------------------------------------------------
# purity rate and Heisenberg-picture identities


def lindblad_covariance(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Covariance matrix of the coupling operators in the given state (PSD, Hermitian)."""
    rho = np.asarray(rho, dtype=complex)
    cs = model.lindblads
    cbar = np.einsum("kab,ba->k", cs, rho)
    second = np.einsum("jba,kbc,ca->jk", cs.conj(), cs, rho)
    return second - np.outer(cbar.conj(), cbar)


def purity_increment_predicted(
    model: LindbladModel, mrep: MRep, rho: np.ndarray, tol: float = DEFAULT_TOL
) -> float:
    """Predicted d(Tr rho^2)/dt for a pure state under the given monitoring.

    Vanishes exactly for unit-efficiency monitoring and is otherwise negative,
    proportional to the trace of the coupling covariance against the
    efficiency deficit.
    """
    rho = np.asarray(rho, dtype=complex)
    p = float(np.real(np.einsum("ab,ba->", rho, rho)))
    if p < 1.0 - max(tol, 1e-12):
        raise NotPureError(f"state purity {p} is below 1")
    if model.channels != mrep.channels:
        raise DimensionMismatchError(
            f"model has {model.channels} channels, measurement matrix {mrep.channels}"
        )
    cov = lindblad_covariance(model, rho)
    gram = mrep.matrix @ mrep.matrix.conj().T / mrep.hbar
    deficit = gram - np.eye(mrep.channels)
    return float(2.0 / model.hbar * np.real(np.trace(cov @ deficit.T)))


def noise_completion(mrep: MRep, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Coefficient of the extra vacuum noise completing the current operator.

    Returns the 2L x 2L matrix whose scaled square accounts for the part of
    the current variance not supplied by the measured field; its defining
    property is hbar^2 L L^dag + M^dag M = hbar * identity.
    """
    m = mrep.matrix
    z = mrep.hbar * np.eye(2 * mrep.channels) - m.conj().T @ m
    return positive_sqrt(z, tol=tol) / mrep.hbar


@dataclass(frozen=True)
class BrepNoiseMatrices:
    """Input-output coefficients of the optical realization's current operator.

    ``signal`` couples the monitored output field, ``loss`` the vacuum
    entering through the inefficiency ports, and ``splitter`` the vacuum
    entering through the quadrature splitters.  Together they compose the
    identity: signal signal^dag / hbar + hbar (loss loss^dag + splitter
    splitter^dag) = identity.
    """

    signal: np.ndarray
    loss: np.ndarray
    splitter: np.ndarray
    hbar: float = 1.0

    def measurement_matrix(self) -> np.ndarray:
        return self.signal.conj().T


def brep_noise_matrices(
    brep: BRep, hbar: float = 1.0, tol: float = DEFAULT_TOL
) -> BrepNoiseMatrices:
    """Noise-coupling blocks of an optical realization, checked for completeness."""
    validate_brep(brep, tol=tol)
    hbar = float(hbar)
    if hbar <= 0.0:
        raise ValidationError(f"hbar must be positive, got {hbar}")
    rh = np.sqrt(np.clip(brep.eta, 0.0, 1.0))
    rhb = np.sqrt(np.clip(1.0 - brep.eta, 0.0, 1.0))
    rq = np.sqrt(np.clip(brep.theta, 0.0, 1.0))
    rqb = np.sqrt(np.clip(1.0 - brep.theta, 0.0, 1.0))
    s = brep.mixing
    top = (rq[:, None] * s) * rh[None, :]
    bot = 1j * (rqb[:, None] * s) * rh[None, :]
    signal = np.sqrt(hbar) * np.vstack([top, bot])
    loss = np.vstack([(rq[:, None] * s) * rhb[None, :], 1j * (rqb[:, None] * s) * rhb[None, :]])
    loss = loss / np.sqrt(hbar)
    splitter = np.vstack([np.diag(rqb), -1j * np.diag(rq)]) / np.sqrt(hbar)
    total = (
        signal @ signal.conj().T / hbar
        + hbar * (loss @ loss.conj().T)
        + hbar * (splitter @ splitter.conj().T)
    )
    defect = float(np.linalg.norm(total - np.eye(2 * brep.channels)))
    if defect > max(tol, 1e-10):
        raise InternalInconsistencyError(
            f"noise blocks do not compose the identity (defect {defect:.3e})"
        )
    return BrepNoiseMatrices(signal=signal, loss=loss, splitter=splitter, hbar=hbar)
