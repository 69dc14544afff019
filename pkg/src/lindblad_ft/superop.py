"""Vectorised (d^2 x d^2) representation of the generators.

States are flattened row-major, so vec(A X B) = kron(A, B^T) vec(X).  Each
channel contributes a constant jump monomial J = kron(L, conj(L)) and a
constant anticommutator monomial A = (kron(L'L, I) + kron(I, L'L))/2; only
the scalar rates (and, when tilted, the per-jump weights) change with time,
which keeps reassembly cheap for driven Hamiltonians.
"""
from __future__ import annotations

import numpy as np

from .model import LindbladModel


def commutator_matrix(h: np.ndarray) -> np.ndarray:
    """Superoperator of X -> -i[H, X]."""
    d = h.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


class GeneratorMatrix:
    """Assembles the (tilted) Lindblad generator as a d^2 x d^2 matrix.

    xi = 0 reproduces the plain master-equation generator; for xi != 0 the
    jump term of channel lam is weighted by e^{-xi * ds_lam(t)}, with ds the
    per-jump bath entropy -log(rate_rev/rate_fwd).
    """

    def __init__(self, model: LindbladModel, xi: float = 0.0):
        self.model = model
        self.xi = float(xi)
        d = model.dim
        eye = np.eye(d)
        jumps, antis = [], []
        for ch in model.channels:
            L = np.zeros((d, d))
            L[ch.target, ch.source] = 1.0
            proj = np.zeros((d, d))
            proj[ch.source, ch.source] = 1.0
            jumps.append(np.kron(L, L))
            antis.append(0.5 * (np.kron(proj, eye) + np.kron(eye, proj)))
        n = len(model.channels)
        self._jumps = np.array(jumps).reshape(n, d * d, d * d) if n else np.zeros((0, d * d, d * d))
        self._antis = np.array(antis).reshape(n, d * d, d * d) if n else np.zeros((0, d * d, d * d))
        if self.xi != 0.0:
            missing = [k for k, r in enumerate(model.reverse_index) if r < 0]
            if missing:
                raise ValueError(
                    f"tilted generator (xi={xi}) requires reversed channels; missing for {missing}")
        self._cache = None if model.time_dependent else self._assemble(0.0)

    def _tilt_factors(self, rates: np.ndarray) -> np.ndarray:
        if self.xi == 0.0:
            return np.ones_like(rates)
        rev = np.array(self.model.reverse_index)
        factors = np.ones_like(rates)
        active = rates > 0.0
        rev_rates = rates[rev]
        bad = active & (rev_rates <= 0.0)
        if np.any(bad):
            raise ValueError(
                f"tilted generator needs positive reverse rates; violated by channels "
                f"{np.nonzero(bad)[0].tolist()}")
        factors[active] = (rev_rates[active] / rates[active]) ** self.xi
        return factors

    def _assemble(self, t: float) -> np.ndarray:
        mat = commutator_matrix(self.model.h_matrix(t))
        if len(self.model.channels):
            rates = self.model.rates(t)
            jw = rates * self._tilt_factors(rates)
            mat = mat + np.tensordot(jw, self._jumps, axes=1) \
                      - np.tensordot(rates, self._antis, axes=1)
        return mat

    def __call__(self, t: float) -> np.ndarray:
        if self._cache is not None:
            return self._cache
        return self._assemble(t)


def rk4_step(rhs, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of y' = rhs(t, y)."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_grid(t_f: float, dt: float) -> np.ndarray:
    """Uniform grid 0..t_f with step dt; t_f must be an integer number of steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = round(t_f / dt)
    if n < 1 or abs(n * dt - t_f) > 1e-9 * max(1.0, t_f):
        raise ValueError(f"t_f={t_f} is not an integer multiple of dt={dt}")
    return np.arange(n + 1) * dt
