"""Shared oracles and random-instance builders for the test suite.

The oracles here are deliberately independent of the library code paths they
check: the Kronecker and Gram oracles are explicit element loops, the matrix
exponential oracle is a truncated Taylor series, and the propagation oracle
steps the Schrodinger equation directly so reconstructed evolution operators
and generated phases can be compared against raw integration.
"""

import numpy as np

from qpassage.ancillary import SubspaceLayout
from qpassage.linalg import dagger
from qpassage.schedules import ParameterSchedule, ScheduleSet


def kron_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-by-element Kronecker product."""
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


def taylor_expm(a: np.ndarray, scale: complex = 1.0, cutoff: float = 1e-14) -> np.ndarray:
    """exp(scale*a) by plain Taylor summation with a term-norm cutoff."""
    x = scale * np.asarray(a, dtype=complex)
    term = np.eye(x.shape[0], dtype=complex)
    out = term.copy()
    for k in range(1, 200):
        term = term @ x / k
        out += term
        if np.linalg.norm(term) < cutoff:
            break
    return out


def gram_oracle(vectors: np.ndarray) -> np.ndarray:
    """Gram matrix by explicit inner products."""
    k = vectors.shape[1]
    g = np.zeros((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            g[i, j] = np.vdot(vectors[:, i], vectors[:, j])
    return g


def brute_force_unitaries(hamiltonian, dim: int, t0: float, t1: float,
                          steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Propagate the identity through H(t) with midpoint exponentials.

    Returns (times, U) with U[i] the evolution operator from t0 to times[i].
    """
    from qpassage.linalg import expm_hermitian

    times = np.linspace(t0, t1, steps + 1)
    dt = (t1 - t0) / steps
    u = np.eye(dim, dtype=complex)
    out = np.empty((steps + 1, dim, dim), dtype=complex)
    out[0] = u
    for i in range(steps):
        h = np.asarray(hamiltonian(times[i] + 0.5 * dt), dtype=complex)
        u = expm_hermitian(h, -1j * dt) @ u
        out[i + 1] = u
    return times, out


def random_layout(rng, max_assistant: int = 3, max_working: int = 4) -> SubspaceLayout:
    return SubspaceLayout(int(rng.integers(1, max_assistant + 1)),
                          int(rng.integers(2, max_working + 1)))


def random_schedule_set(rng, layout: SubspaceLayout, duration: float = 1.0,
                        ramp_amplitude: float = np.pi / 2,
                        cross_phase_locked: bool = True) -> ScheduleSet:
    """Constant cascade angles/phases plus a cosine-ramp mixing angle.

    With cross_phase_locked the pair phase and drive phase are drawn so that
    varphi + alpha sits at an odd multiple of pi/2, where the synthesized
    detuning reduces to d(alpha)/dt = 0.
    """
    table = {}
    for m in range(layout.assistant_levels - 1):
        table[f"ttheta_{m}"] = ParameterSchedule.constant(
            rng.uniform(0.1, np.pi / 2 - 0.1), duration)
        table[f"talpha_{m}"] = ParameterSchedule.constant(
            rng.uniform(0.0, 2 * np.pi), duration)
    for n in range(layout.working_levels - 1):
        table[f"theta_{n}"] = ParameterSchedule.constant(
            rng.uniform(0.1, np.pi / 2 - 0.1), duration)
        table[f"alpha_{n}"] = ParameterSchedule.constant(
            rng.uniform(0.0, 2 * np.pi), duration)
    alpha = rng.uniform(0.0, 2 * np.pi)
    if cross_phase_locked:
        vphi = rng.choice([np.pi / 2, 3 * np.pi / 2]) - alpha
    else:
        vphi = rng.uniform(0.0, 2 * np.pi)
    table["alpha"] = ParameterSchedule.constant(alpha, duration)
    table["varphi"] = ParameterSchedule.constant(vphi, duration)
    table["phi"] = ParameterSchedule.cosine_ramp(ramp_amplitude, duration)
    return ScheduleSet(layout.assistant_levels, layout.working_levels, duration, table)


def frame_columns_oracle(frame) -> None:
    """Assert the pairwise cascade orthogonality relations by raw inner products."""
    lay = frame.layout
    m_rows = lay.assistant_levels - 1
    for m in range(m_rows):
        assert abs(np.vdot(frame.vectors[:, m], frame.assistant_brights[:, m])) < 1e-12
    for n in range(lay.working_levels - 1):
        assert abs(np.vdot(frame.vectors[:, m_rows + n], frame.working_brights[:, n])) < 1e-12
    assert abs(np.vdot(frame.passage_lo, frame.passage_hi)) < 1e-12


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])))
