"""Declarative Lindblad models.

A model is a jump basis, a (possibly time-dependent) Hamiltonian, a set of
baths and a set of elementary jump channels |j'><j| with nonnegative rates.
Thermal channels get their rates from the bosonic-bath law and satisfy
detailed balance by construction; custom rate tables are accepted as long
as every channel has a reverse channel through the same bath
(microreversibility), which is all the fluctuation machinery needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Pauli matrices in the {up, down} basis (sigma_z |up> = +|up>).
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

# below this |beta*omega| the rate law switches to its series expansion
_SMALL_GAP = 1e-6


def bosonic_rate(omega: float, beta: float, g: float) -> float:
    """Thermal jump rate for a bosonic bath at gap `omega`.

    gamma(omega) = g|omega| / (e^{beta|omega|} - 1) * e^{-beta*omega} for
    omega >= 0 and without the Boltzmann factor for omega < 0, so that
    gamma(omega)/gamma(-omega) = e^{-beta*omega} (detailed balance).  The
    omega -> 0 limit g/beta is taken by series expansion.
    """
    if not (math.isfinite(omega) and math.isfinite(beta) and math.isfinite(g)):
        raise ValueError("bosonic_rate requires finite omega, beta, g")
    if beta <= 0:
        raise ValueError(f"inverse temperature must be positive, got {beta}")
    if g < 0:
        raise ValueError(f"coupling must be nonnegative, got {g}")
    x = beta * omega
    if abs(x) < _SMALL_GAP:
        # gamma = (g/beta) * (1 - 3x/2) + O(x^2) for x>=0, (1 + x/2) + O(x^2) for x<0
        slope = -1.5 if x >= 0 else 0.5
        return g / beta * (1.0 + slope * x)
    absx = abs(x)
    rate = g * abs(omega) / math.expm1(absx)
    if omega > 0:
        rate *= math.exp(-x)
    return rate


@dataclass(frozen=True)
class BathSpec:
    """One thermal (or custom-rate) environment."""

    label: int
    beta: float
    g: float = 0.0
    rate_law: str = "bosonic"       # "bosonic" | "custom"

    def __post_init__(self):
        if self.rate_law not in ("bosonic", "custom"):
            raise ValueError(f"unknown rate law {self.rate_law!r}")
        if self.rate_law == "bosonic":
            if not (math.isfinite(self.beta) and self.beta > 0):
                raise ValueError(f"thermal bath needs finite beta > 0, got {self.beta}")
            if self.g < 0:
                raise ValueError("coupling g must be nonnegative")


@dataclass(frozen=True)
class JumpChannel:
    """Elementary transition |target><source| driven by one bath."""

    source: int
    target: int
    bath: int
    rate: Callable[[float], float]

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("jump channel must connect two distinct basis states")


@dataclass(frozen=True)
class LindbladModel:
    """Jump basis, Hamiltonian and channels of one master equation."""

    dim: int
    basis_labels: tuple
    hamiltonian: Callable[[float], np.ndarray]
    baths: tuple
    channels: tuple
    time_dependent: bool = True
    # reverse_index[k] = index of the channel (target->source, same bath); -1 if absent
    reverse_index: tuple = field(init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if len(self.basis_labels) != self.dim:
            raise ValueError("need one basis label per dimension")
        baths = {b.label for b in self.baths}
        for ch in self.channels:
            for idx in (ch.source, ch.target):
                if not 0 <= idx < self.dim:
                    raise ValueError(f"channel references basis index {idx} outside 0..{self.dim-1}")
            if ch.bath not in baths:
                raise ValueError(f"channel references unknown bath {ch.bath}")
        lookup = {(c.source, c.target, c.bath): k for k, c in enumerate(self.channels)}
        rev = tuple(lookup.get((c.target, c.source, c.bath), -1) for c in self.channels)
        object.__setattr__(self, "reverse_index", rev)

    def h_matrix(self, t: float) -> np.ndarray:
        return self.hamiltonian(t)

    def h_diag(self, t: float) -> np.ndarray:
        """Diagonal of H(t) in the jump basis (real)."""
        return np.real(np.diag(self.hamiltonian(t)))

    def rates(self, t: float) -> np.ndarray:
        return np.array([ch.rate(t) for ch in self.channels], dtype=float)

    def bath_beta(self, label: int) -> float:
        for b in self.baths:
            if b.label == label:
                return b.beta
        raise KeyError(f"no bath labelled {label}")


def channel_gap(model: LindbladModel, lam: int, t: float) -> float:
    """Energy gap omega = H_D(target) - H_D(source) of channel `lam` at time t."""
    ch = model.channels[lam]
    hd = model.h_diag(t)
    return float(hd[ch.target] - hd[ch.source])


def channel_entropy(model: LindbladModel, lam: int, t: float) -> float:
    """Bath entropy increment -log(gamma_rev/gamma_fwd) for one jump of channel `lam`.

    Equals -beta*omega for thermal rates.  Raises if either direction has a
    nonpositive rate (microreversibility violation).
    """
    ch = model.channels[lam]
    rev = model.reverse_index[lam]
    if rev < 0:
        raise ValueError(f"channel {lam} ({ch.source}->{ch.target}) has no reverse channel")
    fwd_rate = ch.rate(t)
    rev_rate = model.channels[rev].rate(t)
    if fwd_rate <= 0.0 or rev_rate <= 0.0:
        raise ValueError(
            f"channel {lam} needs positive rates in both directions at t={t} "
            f"(fwd {fwd_rate}, rev {rev_rate})"
        )
    return -math.log(rev_rate / fwd_rate)


def build_two_spin_model(J: float, h0: float, h1: float, t_f: float,
                         T_a: float, T_b: float, g: float) -> LindbladModel:
    """Two spin-1/2 particles, each flipped by its own thermal bath.

    H(t) = -J sx(x)sx - h(t) (sz(x)1 + 1(x)sz) with the linear ramp
    h(t) = h0 + (h1-h0) t/t_f, in the product basis {uu, ud, du, dd}.
    Each spin's flip operator decomposes into two elementary channels per
    direction; rates follow the bosonic law at the instantaneous gap.
    """
    if T_a <= 0 or T_b <= 0:
        raise ValueError("bath temperatures must be positive")
    if h1 != h0 and t_f <= 0:
        raise ValueError("driving (h1 != h0) requires t_f > 0")

    beta = {0: 1.0 / T_a, 1: 1.0 / T_b}
    hj = -J * np.kron(SIGMA_X, SIGMA_X)
    hz = -(np.kron(SIGMA_Z, ID2) + np.kron(ID2, SIGMA_Z))
    static = h1 == h0

    def field_at(t: float) -> float:
        return h0 if static else h0 + (h1 - h0) * t / t_f

    if static:
        h_static = hj + h0 * hz
        h_static.setflags(write=False)

        def hamiltonian(t: float) -> np.ndarray:
            return h_static
    else:
        def hamiltonian(t: float) -> np.ndarray:
            return hj + field_at(t) * hz

    # diagonal of H(t): (-2h, 0, 0, +2h); the exchange term is antidiagonal
    def gap(source: int, target: int, t: float) -> float:
        h = field_at(t)
        diag = (-2.0 * h, 0.0, 0.0, 2.0 * h)
        return diag[target] - diag[source]

    def thermal_rate(source: int, target: int, bath: int) -> Callable[[float], float]:
        b = beta[bath]

        def rate(t: float) -> float:
            return bosonic_rate(gap(source, target, t), b, g)

        return rate

    # spin a (bath 0): sigma_- flips uu->du, ud->dd; spin b (bath 1): uu->ud, du->dd
    pairs = [((0, 2), 0), ((1, 3), 0), ((0, 1), 1), ((2, 3), 1)]
    channels = []
    for (j, jp), bath in pairs:
        channels.append(JumpChannel(j, jp, bath, thermal_rate(j, jp, bath)))
        channels.append(JumpChannel(jp, j, bath, thermal_rate(jp, j, bath)))

    return LindbladModel(
        dim=4,
        basis_labels=("uu", "ud", "du", "dd"),
        hamiltonian=hamiltonian,
        baths=(BathSpec(0, beta[0], g), BathSpec(1, beta[1], g)),
        channels=tuple(channels),
        time_dependent=not static,
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ModelDiagnostics:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "detail": c.detail} for c in self.checks}


def validate_model(model: LindbladModel, times: Sequence[float] = (0.0,),
                   db_atol: float = 1e-10) -> ModelDiagnostics:
    """Report-only diagnostics: Hermiticity, microreversibility, detailed balance."""
    checks = []

    worst = 0.0
    for t in times:
        h = model.h_matrix(t)
        worst = max(worst, float(np.max(np.abs(h - h.conj().T))))
    checks.append(CheckResult(
        "hamiltonian_hermitian", worst <= 1e-12,
        f"max asymmetry {worst:.3e} over {len(list(times))} sampled times"))

    missing = [k for k, r in enumerate(model.reverse_index) if r < 0]
    checks.append(CheckResult(
        "microreversibility", not missing,
        "all channels reversed" if not missing else f"channels without reverse: {missing}"))

    # test every reversed pair against e^(-beta*omega) whenever the bath
    # carries a usable temperature; non-thermal custom tables will simply fail
    with_beta = {b.label for b in model.baths if math.isfinite(b.beta) and b.beta > 0}
    worst_db = 0.0
    tested = 0
    for k, ch in enumerate(model.channels):
        rev = model.reverse_index[k]
        if rev < 0 or ch.bath not in with_beta:
            continue
        b = model.bath_beta(ch.bath)
        for t in times:
            fwd = ch.rate(t)
            bwd = model.channels[rev].rate(t)
            if fwd <= 0 or bwd <= 0:
                worst_db = math.inf
                continue
            omega = channel_gap(model, k, t)
            worst_db = max(worst_db, abs(fwd / bwd - math.exp(-b * omega)))
            tested += 1
    checks.append(CheckResult(
        "detailed_balance", worst_db <= db_atol,
        f"max |ratio - e^(-beta*omega)| = {worst_db:.3e} over {tested} checks"))

    return ModelDiagnostics(tuple(checks))
