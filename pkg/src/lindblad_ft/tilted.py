"""Generating-function operator evolution.

The tilted generator weights each jump term by e^{-xi * ds}, where ds is
that channel's per-jump bath entropy.  Its solution Psi(xi, t) carries the
statistics of the accumulated bath entropy: diagonal entries are final-state
constrained averages of e^{-xi * dS_B}, the trace is the unconstrained one.
At xi = 1 summing the solutions over a complete set of initial projectors
must reproduce the identity at all times, which is the operator form of the
integral fluctuation theorem; ft_functional and jarzynski_lhs evaluate the
scalar consequences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, Operator, eigh
from .model import LindbladModel, channel_entropy
from .superop import GeneratorMatrix, rk4_step, time_grid
from .dynamics import check_step_bound, _as_matrix


@dataclass(frozen=True)
class TiltedState:
    """Psi(xi, t) snapshot with its tilting parameter and initial-condition tag."""

    xi: float
    operator: Operator
    initial_tag: str = ""

    def trace(self) -> complex:
        return complex(np.trace(self.operator.mat))


@dataclass(frozen=True)
class TiltedSeries:
    xi: float
    times: np.ndarray
    ops: np.ndarray                   # (n, d, d)
    initial_tag: str = ""

    def at(self, i: int) -> TiltedState:
        return TiltedState(self.xi, Operator(self.ops[i]), self.initial_tag)

    def traces(self) -> np.ndarray:
        return np.trace(self.ops, axis1=1, axis2=2)


def tilted_generator(model: LindbladModel, x, xi: float, t: float = 0.0) -> Operator:
    """-i[H,X] + sum_l gamma_l (e^{-xi ds_l} L X L' - {L'L, X}/2) on one operator."""
    xm = _as_matrix(x)
    if xm.shape != (model.dim, model.dim):
        raise ValueError(f"operator shape {xm.shape} does not match model dim {model.dim}")
    h = model.h_matrix(t)
    out = -1j * (h @ xm - xm @ h)
    rates = model.rates(t)
    for lam, (ch, g) in enumerate(zip(model.channels, rates)):
        if g > 0.0 and xi != 0.0:
            weight = g * np.exp(-xi * channel_entropy(model, lam, t))
        else:
            weight = g
        out[ch.target, ch.target] += weight * xm[ch.source, ch.source]
        out[ch.source, :] -= 0.5 * g * xm[ch.source, :]
        out[:, ch.source] -= 0.5 * g * xm[:, ch.source]
    return Operator(out)


def _evolve_many(model: LindbladModel, x0s: np.ndarray, xi: float,
                 t_f: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4-evolve a stack (m, d, d) of initial operators under one tilted generator."""
    times = time_grid(t_f, dt)
    check_step_bound(model, dt, t_f)
    d = model.dim
    m = x0s.shape[0]
    gen = GeneratorMatrix(model, xi=xi)

    y = np.ascontiguousarray(x0s.reshape(m, d * d).T).astype(complex)   # (d^2, m)
    out = np.empty((len(times), m, d, d), dtype=complex)
    out[0] = x0s

    def rhs(t: float, yv: np.ndarray) -> np.ndarray:
        return gen(t) @ yv

    for i in range(1, len(times)):
        y = rk4_step(rhs, times[i - 1], y, dt)
        out[i] = y.T.reshape(m, d, d)
    return times, out


def evolve_tilted(model: LindbladModel, x0, xi: float, t_f: float, dt: float,
                  initial_tag: str = "") -> TiltedSeries:
    """Evolve Psi(xi, t) from one initial operator.

    Hermiticity is preserved for real xi and Hermitian input; the trace is
    not preserved away from xi = 0.
    """
    x0m = _as_matrix(x0)
    times, out = _evolve_many(model, x0m[None, :, :], xi, t_f, dt)
    return TiltedSeries(xi=float(xi), times=times, ops=out[:, 0], initial_tag=initial_tag)


def _projector_stack(basis: np.ndarray) -> np.ndarray:
    """Rank-1 projectors onto the columns of a unitary basis matrix."""
    return np.einsum("jk,lk->kjl", basis, basis.conj())


def psi_bar_one(model: LindbladModel, t_f: float, dt: float,
                basis: np.ndarray | None = None) -> np.ndarray:
    """Max-norm deviation of sum_j Psi(1, t | Pi_j) from the identity, per grid time.

    `basis` columns define the initial projectors; default is the jump basis.
    The sum solves the tilted equation with initial condition 1 and must stay
    at 1 up to integrator error.
    """
    d = model.dim
    if basis is None:
        basis = np.eye(d, dtype=complex)
    projs = _projector_stack(np.asarray(basis, dtype=complex))
    times, out = _evolve_many(model, projs, 1.0, t_f, dt)
    total = out.sum(axis=1)
    dev = np.max(np.abs(total - np.eye(d)), axis=(1, 2))
    return dev


def psi_bar_operator(model: LindbladModel, t_f: float, dt: float,
                     basis: np.ndarray | None = None) -> TiltedSeries:
    """The summed operator itself (for basis-independence checks)."""
    d = model.dim
    if basis is None:
        basis = np.eye(d, dtype=complex)
    projs = _projector_stack(np.asarray(basis, dtype=complex))
    times, out = _evolve_many(model, projs, 1.0, t_f, dt)
    return TiltedSeries(xi=1.0, times=times, ops=out.sum(axis=1), initial_tag="sum of projectors")


def ft_functional(model: LindbladModel, rho0: DensityMatrix, rho_f, t_f: float,
                  dt: float) -> float:
    """Integral fluctuation theorem value; equals 1 for any unit-trace final state.

    Diagonalises rho0, evolves Psi(1, t | Pi_b0) for every eigenvector, and
    contracts the weighted sum with rho_f.  The weights p * e^{-log p} are
    taken analytically (= 1), so zero eigenvalues contribute like any other
    direction, and e^{log rho_f} = rho_f is never formed through a matrix log.
    """
    rf = _as_matrix(rho_f)
    tr_f = complex(np.trace(rf))
    if abs(tr_f - 1.0) > 1e-8:
        raise ValueError(f"final state must have unit trace, got {tr_f}")
    _, vecs = eigh(Operator(_as_matrix(rho0)))
    projs = _projector_stack(vecs)
    _, out = _evolve_many(model, projs, 1.0, t_f, dt)
    summed = out[-1].sum(axis=0)
    return float(np.real(np.trace(summed @ rf)))


def psi_one_series(model: LindbladModel, projector, t_f: float, dt: float) -> TiltedSeries:
    """Psi(1, t | Pi) for a single initial projector (QMC cross-validation target)."""
    return evolve_tilted(model, projector, 1.0, t_f, dt, initial_tag="projector")


def jarzynski_lhs(model: LindbladModel, beta: float, t_f: float, dt: float) -> tuple[float, float]:
    """Driven single-temperature work relation, evaluated two independent ways.

    Left: tilted evolution from the H(0) eigenprojectors with Gibbs endpoint
    weights e^{beta H_jj(0)} and e^{-beta H(t_f)}.  Right: Z_t/Z_0 from the
    instantaneous spectra.  The two must agree.
    """
    betas = {b.beta for b in model.baths}
    if len(betas) > 1:
        raise ValueError(f"work relation needs equal-temperature baths, got betas {sorted(betas)}")
    if betas and not np.isclose(next(iter(betas)), beta):
        raise ValueError(f"beta={beta} does not match the baths' {betas}")

    e0, v0 = eigh(Operator(model.h_matrix(0.0)))
    z0 = float(np.sum(np.exp(-beta * e0)))
    p0 = np.exp(-beta * e0) / z0

    projs = _projector_stack(v0)
    _, out = _evolve_many(model, projs, 1.0, t_f, dt)

    ef, vf = eigh(Operator(model.h_matrix(t_f)))
    gibbs_f = (vf * np.exp(-beta * ef)) @ vf.conj().T
    weights = p0 * np.exp(beta * e0)
    weighted = np.tensordot(weights, out[-1], axes=1)
    lhs = float(np.real(np.trace(weighted @ gibbs_f)))

    zt = float(np.sum(np.exp(-beta * ef)))
    return lhs, zt / z0
