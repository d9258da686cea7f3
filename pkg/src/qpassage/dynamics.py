"""Closed- and open-system propagation plus passage diagnostics.

Closed dynamics uses a midpoint exponential propagator, exp(-i H(t_mid) dt)
per step, which is unitary by construction.  Open dynamics integrates

    drho/dt = -i[H(t), rho] + sum_j (rate_j / 2) * (2 L_j rho L_j+
                                                    - L_j+ L_j rho - rho L_j+ L_j)

with classic RK4, re-Hermitizing the state each step.  With that convention a
single decaying qubit loses excited population as exp(-rate * t).  Positivity
is monitored at checkpoints, never enforced: a violation beyond tolerance
means the step size is wrong and should fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import (check_density_matrix, check_state_vector, dagger,
                     expm_hermitian, frobenius, hermiticity_defect)
from .tolerances import TOL

__all__ = [
    "TimeGrid",
    "Dissipator",
    "StepSizeError",
    "StateTrajectory",
    "DensityTrajectory",
    "SimulationResult",
    "propagate_schrodinger",
    "propagate_lindblad",
    "von_neumann_residual",
    "gd_matrices",
    "reconstruct_evolution",
    "metrics",
]


class StepSizeError(RuntimeError):
    """Integration diagnostics exceeded their hard bounds; use more steps."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of `steps` intervals on [t0, t1]."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one step")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)


@dataclass(frozen=True, eq=False)
class Dissipator:
    """One Lindblad channel: a jump operator acting in the full space and its rate."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("dissipation rate must be non-negative")


@dataclass
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray          # (len(times), dim)
    norm_drift: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class DensityTrajectory:
    times: np.ndarray
    matrices: np.ndarray        # (len(times), dim, dim)
    trace_drift: float
    min_eigenvalue: float

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]


@dataclass
class SimulationResult:
    """Populations, fidelity, and integration diagnostics on a common grid.

    `fidelity` is measured against the target of the protocol step active at
    each time; `auxiliary` may carry further per-grid-point arrays (fidelity
    against the final target, passage residual) and `steps` per-step records.
    """

    times: np.ndarray
    populations: dict
    fidelity: np.ndarray
    final_state: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    auxiliary: dict = field(default_factory=dict)

    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])


def propagate_schrodinger(hamiltonian: Callable[[float], np.ndarray],
                          psi0: np.ndarray, grid: TimeGrid) -> StateTrajectory:
    """Midpoint-exponential propagation of a pure state.

    H is evaluated at each interval midpoint and must be Hermitian to 1e-10
    (relative); the propagator itself is unitary up to round-off, so norm
    drift only reflects accumulated floating-point error.
    """
    from .linalg import expm_hermitian

    psi = check_state_vector(psi0).astype(complex)
    times = grid.times
    out = np.empty((times.size, psi.size), dtype=complex)
    out[0] = psi
    dt = grid.dt
    drift = 0.0
    for i in range(grid.steps):
        t_mid = times[i] + 0.5 * dt
        h = np.asarray(hamiltonian(t_mid), dtype=complex)
        if hermiticity_defect(h) > 1e-10:
            raise ValueError(f"Hamiltonian is not Hermitian at t = {t_mid:.6f}")
        psi = expm_hermitian(h, -1j * dt) @ psi
        out[i + 1] = psi
        drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
    return StateTrajectory(times=times, states=out, norm_drift=drift)


def _lindblad_rhs(h: np.ndarray, rho: np.ndarray, channels) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for op, op_dag, op2, rate in channels:
        out += rate * (op @ rho @ op_dag - 0.5 * (op2 @ rho + rho @ op2))
    return out


def propagate_lindblad(hamiltonian: Callable[[float], np.ndarray],
                       dissipators: list[Dissipator], rho0: np.ndarray,
                       grid: TimeGrid, checkpoints: int = 10) -> DensityTrajectory:
    """RK4 integration of the master equation with per-step re-Hermitization.

    Raises :class:`StepSizeError` when the trace drifts by more than 1e-6 or
    the smallest checkpoint eigenvalue falls below -1e-7; both indicate the
    grid is too coarse for the requested dynamics.
    """
    rho = check_density_matrix(rho0).astype(complex)
    channels = []
    for d in dissipators:
        op = np.asarray(d.operator, dtype=complex)
        channels.append((op, dagger(op), dagger(op) @ op, d.rate))

    times = grid.times
    out = np.empty((times.size, rho.shape[0], rho.shape[1]), dtype=complex)
    out[0] = rho
    dt = grid.dt
    drift = 0.0
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    check_every = max(1, grid.steps // max(checkpoints, 1))

    h_left = np.asarray(hamiltonian(times[0]), dtype=complex)
    for i in range(grid.steps):
        h_mid = np.asarray(hamiltonian(times[i] + 0.5 * dt), dtype=complex)
        h_right = np.asarray(hamiltonian(times[i + 1]), dtype=complex)
        k1 = _lindblad_rhs(h_left, rho, channels)
        k2 = _lindblad_rhs(h_mid, rho + 0.5 * dt * k1, channels)
        k3 = _lindblad_rhs(h_mid, rho + 0.5 * dt * k2, channels)
        k4 = _lindblad_rhs(h_right, rho + dt * k3, channels)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        out[i + 1] = rho
        h_left = h_right

        drift = max(drift, abs(np.trace(rho).real - 1.0))
        if drift > TOL.trace_drift_error:
            raise StepSizeError(
                f"trace drifted by {drift:.3e} at t = {times[i + 1]:.6f}; "
                "increase the number of grid steps")
        if (i + 1) % check_every == 0 or i + 1 == grid.steps:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho)[0]))

    if min_eig < -TOL.positivity_drift:
        raise StepSizeError(
            f"density matrix eigenvalue reached {min_eig:.3e}; "
            "increase the number of grid steps")
    return DensityTrajectory(times=times, matrices=out, trace_drift=drift,
                             min_eigenvalue=min_eig)


def von_neumann_residual(projector: Callable[[float], np.ndarray],
                         hamiltonian: Callable[[float], np.ndarray],
                         t: float, h: float = TOL.fd_step,
                         projector_derivative: np.ndarray | None = None) -> float:
    """|| dP/dt + i [H(t), P(t)] ||_F for a rank-1 projector P.

    A vanishing residual is the exact transitionless-evolution condition for
    the state P projects onto.  dP/dt comes from the analytic frame
    derivatives when the caller supplies them, otherwise from a centered
    difference with step h.
    """
    p = np.asarray(projector(t), dtype=complex)
    if projector_derivative is not None:
        dp = np.asarray(projector_derivative, dtype=complex)
    else:
        dp = (np.asarray(projector(t + h), dtype=complex)
              - np.asarray(projector(t - h), dtype=complex)) / (2.0 * h)
    ham = np.asarray(hamiltonian(t), dtype=complex)
    return frobenius(dp + 1j * (ham @ p - p @ ham))


def gd_matrices(frame, hamiltonian: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Geometric and dynamical coefficient matrices in the frame basis.

    G[k, n] = i <mu_k | d mu_n / dt> and D[k, n] = <mu_k | H | mu_n>.  G is
    Hermitian to 1e-10 because the frame stays orthonormal.
    """
    v = frame.vectors
    dv = frame.derivatives
    g = 1j * (np.conj(v.T) @ dv)
    d = np.conj(v.T) @ np.asarray(hamiltonian, dtype=complex) @ v
    if hermiticity_defect(g) > 1e-10:
        raise ValueError("geometric matrix is not Hermitian; frame derivatives are inconsistent")
    return g, d


def reconstruct_evolution(frames, phases) -> np.ndarray:
    """Evolution operators U(t) = sum_k e^{i f_k(t)} |mu_k(t)><mu_k(0)|.

    `frames` is a sequence of frames on the same grid as `phases` (either a
    GeneratedPhases object or a (K, L) phase matrix).  Each U is unitary to
    1e-10 by orthonormality of the frames.
    """
    f = phases.as_matrix() if hasattr(phases, "as_matrix") else np.asarray(phases)
    if len(frames) != f.shape[1]:
        raise ValueError(f"{len(frames)} frames but {f.shape[1]} phase samples")
    v0_dag = np.conj(frames[0].vectors.T)
    dim = frames[0].dim
    out = np.empty((len(frames), dim, dim), dtype=complex)
    for i, frame in enumerate(frames):
        u = (frame.vectors * np.exp(1j * f[:, i])) @ v0_dag
        defect = frobenius(np.conj(u.T) @ u - np.eye(dim))
        if defect > 1e-10:
            raise ValueError(f"reconstructed operator is not unitary (defect {defect:.3e})")
        out[i] = u
    return out


def _population(state: np.ndarray, ket: np.ndarray) -> float:
    if state.ndim == 1:
        return float(np.abs(np.vdot(ket, state)) ** 2)
    return float(np.real(np.vdot(ket, state @ ket)))


def metrics(trajectory, target: np.ndarray, labels: dict) -> SimulationResult:
    """Populations over labeled kets and fidelity against a pure target.

    `labels` maps a name to either a basis index or a ket; works for state
    and density trajectories alike.  The sum of populations never exceeds one
    beyond round-off, and equals one when the labels cover a basis.
    """
    target = check_state_vector(np.asarray(target, dtype=complex))
    states = trajectory.states if isinstance(trajectory, StateTrajectory) else trajectory.matrices
    dim = states.shape[-1]
    kets = {}
    for name, ref in labels.items():
        if np.isscalar(ref):
            ket = np.zeros(dim, dtype=complex)
            ket[int(ref)] = 1.0
        else:
            ket = np.asarray(ref, dtype=complex)
        if ket.size != dim:
            raise ValueError(f"label {name!r} has dimension {ket.size}, states have {dim}")
        kets[name] = ket
    if target.size != dim:
        raise ValueError("target dimension does not match the trajectory")

    n_t = states.shape[0]
    pops = {name: np.empty(n_t) for name in kets}
    fid = np.empty(n_t)
    for i in range(n_t):
        state = states[i]
        for name, ket in kets.items():
            pops[name][i] = _population(state, ket)
        fid[i] = _population(state, target)

    diagnostics = {"population_sum_max": float(max(
        np.max(sum(pops.values())), 0.0))}
    if isinstance(trajectory, StateTrajectory):
        diagnostics["norm_drift"] = trajectory.norm_drift
    else:
        diagnostics["trace_drift"] = trajectory.trace_drift
        diagnostics["min_eigenvalue"] = trajectory.min_eigenvalue
    return SimulationResult(times=trajectory.times, populations=pops,
                            fidelity=fid, final_state=states[-1],
                            diagnostics=diagnostics)
