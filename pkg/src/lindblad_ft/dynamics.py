"""Deterministic integration of the master equation.

Fixed-step RK4 on the full density matrix (vectorised internally), with
per-bath diagonal heat integrated alongside, von Neumann entropies, and the
second-law monitor.  Positivity is watched, never enforced.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, Operator
from .model import LindbladModel, channel_gap
from .superop import GeneratorMatrix, rk4_step, time_grid

# dt * max(norm(H), total rate) must stay below this for the fixed-step scheme
CFL_BOUND = 0.05
TRACE_DRIFT_TOL = 1e-9
POSITIVITY_ABORT = -1e-5
_EIG_FLOOR = 1e-14


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.mat
    if isinstance(rho, Operator):
        return rho.mat
    return np.asarray(rho, dtype=complex)


def lindblad_generator(model: LindbladModel, rho, t: float = 0.0) -> Operator:
    """Right-hand side -i[H,rho] + sum_l gamma_l (L rho L' - {L'L, rho}/2)."""
    r = _as_matrix(rho)
    if r.shape != (model.dim, model.dim):
        raise ValueError(f"state shape {r.shape} does not match model dim {model.dim}")
    h = model.h_matrix(t)
    out = -1j * (h @ r - r @ h)
    rates = model.rates(t)
    for ch, g in zip(model.channels, rates):
        out[ch.target, ch.target] += g * r[ch.source, ch.source]
        out[ch.source, :] -= 0.5 * g * r[ch.source, :]
        out[:, ch.source] -= 0.5 * g * r[:, ch.source]
    return Operator(out)


def dual_dissipator(model: LindbladModel, x, t: float = 0.0, bath=None) -> np.ndarray:
    """Adjoint (Heisenberg-picture) dissipator D*[X], optionally for one bath.

    D*[X] = sum_l gamma_l (X_{j'j'} Pi_j - {Pi_j, X}/2) over channels j->j'.
    """
    xm = _as_matrix(x)
    out = np.zeros_like(xm)
    rates = model.rates(t)
    for ch, g in zip(model.channels, rates):
        if bath is not None and ch.bath != bath:
            continue
        j = ch.source
        out[j, j] += g * xm[ch.target, ch.target]
        out[j, :] -= 0.5 * g * xm[j, :]
        out[:, j] -= 0.5 * g * xm[:, j]
    return out


def diag_heat_current(model: LindbladModel, rho, alpha: int, t: float = 0.0) -> float:
    """Diagonal heat current Tr[rho D*_alpha[H_D(t)]] into the system from bath alpha."""
    hd = np.diag(model.h_diag(t).astype(complex))
    flow = dual_dissipator(model, hd, t, bath=alpha)
    val = np.trace(_as_matrix(rho) @ flow)
    return float(val.real)


@dataclass(frozen=True)
class StateSeries:
    """Density matrix and accumulated diagonal heats on a uniform grid."""

    times: np.ndarray                 # (n,)
    rho: np.ndarray                   # (n, d, d)
    heats: np.ndarray                 # (n_baths, n), Q_D per bath, zero at t=0
    bath_betas: tuple

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def final(self) -> DensityMatrix:
        return DensityMatrix(Operator(self.rho[-1]))

    def entropy_series(self) -> np.ndarray:
        return von_neumann_entropy_series(self.rho)

    def write_csv(self, path) -> None:
        d = self.rho.shape[1]
        header = ["t"]
        for j in range(d):
            for k in range(d):
                header += [f"re_rho_{j}{k}", f"im_rho_{j}{k}"]
        header += [f"q_d_{_bath_letter(i)}" for i in range(self.heats.shape[0])]
        header += ["s_vn"]
        svn = self.entropy_series()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for j in range(d):
                    for k in range(d):
                        row += [repr(float(self.rho[i, j, k].real)),
                                repr(float(self.rho[i, j, k].imag))]
                row += [repr(float(q)) for q in self.heats[:, i]]
                row.append(repr(float(svn[i])))
                w.writerow(row)


def _bath_letter(i: int) -> str:
    return chr(ord("a") + i) if i < 26 else str(i)


def check_step_bound(model: LindbladModel, dt: float, t_f: float) -> None:
    """Enforce dt * max(norm(H), total rate) <= CFL_BOUND at sampled times."""
    worst = 0.0
    for t in (0.0, 0.5 * t_f, t_f):
        h = model.h_matrix(t)
        hnorm = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (h + h.conj().T)))))
        worst = max(worst, hnorm, float(np.sum(model.rates(t))))
    if dt * worst > CFL_BOUND:
        raise ValueError(
            f"dt={dt} too large: dt*max(|H|, total rate)={dt * worst:.3g} exceeds {CFL_BOUND}")


def evolve_density(model: LindbladModel, rho0: DensityMatrix, t_f: float, dt: float) -> StateSeries:
    """RK4 evolution of the master equation with diagonal-heat accounting."""
    times = time_grid(t_f, dt)
    check_step_bound(model, dt, t_f)
    d = model.dim
    r0 = _as_matrix(rho0)
    if r0.shape != (d, d):
        raise ValueError(f"initial state shape {r0.shape} does not match model dim {d}")

    gen = GeneratorMatrix(model, xi=0.0)
    n_b = len(model.baths)
    bath_of = np.array([ch.bath for ch in model.channels], dtype=int)
    bath_masks = [bath_of == b for b in range(n_b)]
    src = np.array([ch.source for ch in model.channels], dtype=int)
    tgt = np.array([ch.target for ch in model.channels], dtype=int)
    diag_idx = np.arange(d) * d + np.arange(d)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        dy = np.empty_like(y)
        dy[: d * d] = gen(t) @ y[: d * d]
        dy[d * d:] = 0.0
        if len(model.channels):
            rates = model.rates(t)
            hd = model.h_diag(t)
            pops = y[diag_idx].real
            flows = rates * (hd[tgt] - hd[src]) * pops[src]
            for b in range(n_b):
                dy[d * d + b] = np.sum(flows[bath_masks[b]])
        return dy

    y = np.concatenate([r0.ravel(), np.zeros(n_b, dtype=complex)])
    out = np.empty((len(times), d, d), dtype=complex)
    heats = np.zeros((n_b, len(times)))
    out[0] = r0
    for i in range(1, len(times)):
        y = rk4_step(rhs, times[i - 1], y, dt)
        tr = y[diag_idx].real.sum()
        drift = abs(tr - 1.0)
        if drift > TRACE_DRIFT_TOL:
            raise RuntimeError(
                f"trace drift {drift:.3e} at t={times[i]:.6g} exceeds {TRACE_DRIFT_TOL}; "
                "reduce dt")
        y[: d * d] /= tr
        out[i] = y[: d * d].reshape(d, d)
        heats[:, i] = y[d * d:].real

    lo = float(np.min(np.linalg.eigvalsh(0.5 * (out + out.conj().transpose(0, 2, 1)))))
    if lo < POSITIVITY_ABORT:
        raise RuntimeError(
            f"positivity violated: smallest eigenvalue {lo:.3e} below {POSITIVITY_ABORT}; "
            "step size too large")

    betas = tuple(b.beta for b in sorted(model.baths, key=lambda b: b.label))
    return StateSeries(times=times, rho=out, heats=heats, bath_betas=betas)


def von_neumann_entropy(rho) -> float:
    """-sum lam log lam over eigenvalues above the floor; zero for pure states."""
    vals = np.linalg.eigvalsh(_as_matrix(rho))
    vals = vals[vals > _EIG_FLOOR]
    return float(-np.sum(vals * np.log(vals)))


def von_neumann_entropy_series(rhos: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(0.5 * (rhos + rhos.conj().transpose(0, 2, 1)))
    vals = np.where(vals > _EIG_FLOOR, vals, 1.0)   # log 1 = 0 kills the floored terms
    return -np.sum(vals * np.log(vals), axis=1)


def second_law_gap(series: StateSeries) -> np.ndarray:
    """Entropy balance dS_S(t) - sum_a beta_a Q_{D,a}(t), nonnegative along solutions."""
    svn = series.entropy_series()
    betas = np.asarray(series.bath_betas)
    return (svn - svn[0]) - betas @ series.heats
