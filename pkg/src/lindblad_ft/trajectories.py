"""Quantum-jump Monte Carlo unraveling with per-jump entropy accounting.

Each trajectory is a pure state evolved by first-order no-jump drift steps
interrupted by stochastic jumps; every jump through channel j->j' adds that
channel's bath-entropy increment to the running total.  Randomness comes
from one counter-based Philox stream per trajectory, derived from
(master seed, basis-mode id, trajectory index), so any batch or worker
split reproduces bit-identical trajectories: the stream is consumed as one
uniform for the initial projection followed by exactly one uniform per step.

The ensemble estimators reduce trajectories through commutative sums, so
they accept either materialised Trajectory objects or streamed batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .hilbert import DensityMatrix, Ket
from .model import LindbladModel
from .results import ResultSeries
from .superop import time_grid

RNG_ALGORITHM = "philox"
MODE_IDS = {"eigen": 0, "jump": 1}
OVERLAP_FLOOR = 1e-30
_NORM_COLLAPSE = 1e-12
ENTROPY_VARIANTS = ("ratio", "logexp")   # -log overlap ratio vs expectation of log rho


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int
    bath: int
    omega: float
    ds: float


@dataclass(frozen=True)
class Trajectory:
    seed: int
    index: int
    mode: str
    init_index: int
    init_prob: float
    times: np.ndarray          # output grid
    kets: np.ndarray           # (n_out, d)
    dsb: np.ndarray            # accumulated bath entropy at output grid
    events: tuple


@dataclass(frozen=True)
class InitialCondition:
    ket: Ket
    index: int
    probability: float
    mode: str


@dataclass(frozen=True)
class EntropyHistogram:
    final_index: int
    bin_edges: np.ndarray
    weights: np.ndarray        # normalised so that all final indices sum to 1


def make_rng(seed: int, mode_id: int, index: int) -> np.random.Generator:
    """The fixed per-trajectory stream: Philox keyed by (seed, mode, index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(mode_id, index))
    return np.random.Generator(np.random.Philox(ss))


def _rho_matrix(rho0) -> np.ndarray:
    return rho0.mat if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)


def _initial_table(rho0, mode: str):
    """Sampling weights and state vectors for one projection basis."""
    rho = _rho_matrix(rho0)
    d = rho.shape[0]
    if mode == "eigen":
        vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        weights = np.clip(vals, 0.0, None)
    elif mode == "jump":
        vecs = np.eye(d, dtype=complex)
        weights = np.clip(np.real(np.diag(rho)), 0.0, None)
    else:
        raise ValueError(f"unknown initial basis mode {mode!r}; pick from {sorted(MODE_IDS)}")
    weights = weights / weights.sum()
    return weights, vecs, np.cumsum(weights)


def sample_initial(rho0, mode: str, rng: np.random.Generator) -> InitialCondition:
    """Draw the initial pure state: eigenvector of rho0 or jump-basis state."""
    weights, vecs, cum = _initial_table(rho0, mode)
    u = rng.random()
    k = min(int(np.searchsorted(cum, u, side="right")), len(weights) - 1)
    return InitialCondition(ket=Ket(vecs[:, k]), index=k,
                            probability=float(weights[k]), mode=mode)


class _StepTables:
    """Per-time-step channel tables; computed once for static models."""

    def __init__(self, model: LindbladModel, dt: float):
        self.model = model
        self.dt = dt
        self.d = model.dim
        self.src = np.array([c.source for c in model.channels], dtype=int)
        self.tgt = np.array([c.target for c in model.channels], dtype=int)
        self.bath = np.array([c.bath for c in model.channels], dtype=int)
        self.rev = np.array(model.reverse_index, dtype=int)
        self._cache = None if model.time_dependent else self._build(0.0)

    def _build(self, t: float):
        model, d = self.model, self.d
        rates = model.rates(t)
        n_ch = len(rates)
        if n_ch == 0:
            drift = np.eye(d, dtype=complex) - 1j * self.dt * model.h_matrix(t)
            return np.zeros(0), np.zeros(d), np.zeros(0), np.zeros(0), drift
        if np.any(rates < 0):
            raise ValueError(f"negative channel rate at t={t}")
        active = rates > 0
        rev_rates = rates[self.rev]
        if np.any(active & (rev_rates <= 0)):
            bad = np.nonzero(active & (rev_rates <= 0))[0].tolist()
            raise ValueError(f"microreversibility violated at t={t} by channels {bad}")
        ds = np.zeros_like(rates)
        ds[active] = -np.log(rev_rates[active] / rates[active])
        hd = model.h_diag(t)
        omega = hd[self.tgt] - hd[self.src]
        exit_rate = np.bincount(self.src, weights=rates, minlength=d)
        drift = np.eye(d, dtype=complex) - 1j * self.dt * model.h_matrix(t)
        drift[np.arange(d), np.arange(d)] -= 0.5 * self.dt * exit_rate
        return rates * self.dt, exit_rate * self.dt, ds, omega, drift

    def at(self, t: float):
        if self._cache is not None:
            return self._cache
        return self._build(t)


def _drift_and_norm(psi: np.ndarray, drift: np.ndarray):
    """Apply the no-jump propagator row by row.

    einsum contracts each row with a fixed per-element reduction order that
    does not depend on the batch size, so trajectories stay bit-identical
    under any batching (BLAS matmul would not guarantee that).
    """
    out = np.einsum("bm,km->bk", psi, drift)
    nrm = np.einsum("bk,bk->b", out.real, out.real) \
        + np.einsum("bk,bk->b", out.imag, out.imag)
    return out, nrm


def _simulate(model: LindbladModel, psi0: np.ndarray, t_f: float, dt: float,
              draw_uniforms, out_stride: int, record_events: bool = True):
    """Advance a batch of pure states; returns the output grid, kets, dsb, events.

    draw_uniforms(n) must return a (B, n) block continuing each row's stream.
    """
    times = time_grid(t_f, dt)
    n_steps = len(times) - 1
    if out_stride < 1 or n_steps % out_stride != 0:
        raise ValueError(f"out_stride={out_stride} must divide the {n_steps} steps")
    n_out = n_steps // out_stride + 1
    B, d = psi0.shape

    tables = _StepTables(model, dt)
    has_channels = len(model.channels) > 0
    psi = psi0.astype(complex).copy()
    dsb = np.zeros(B)
    kets_out = np.empty((B, n_out, d), dtype=complex)
    dsb_out = np.empty((B, n_out))
    kets_out[:, 0] = psi
    dsb_out[:, 0] = dsb
    events = [[] for _ in range(B)] if record_events else None

    window = 512
    u_block = np.empty((B, 0))
    u_base = 0
    for s in range(n_steps):
        if s - u_base >= u_block.shape[1]:
            u_block = draw_uniforms(min(window, n_steps - s))
            u_base = s
        u = u_block[:, s - u_base]
        t = times[s]
        p_scaled, exit_dt, ds_vec, omega_vec, drift = tables.at(t)

        if has_channels:
            # total jump probability per trajectory; the per-channel split is
            # only materialised for the (rare) rows that actually jump
            asq = psi.real ** 2 + psi.imag ** 2
            p_total = np.einsum("bj,j->b", asq, exit_dt)
            jumped = u < p_total
            rows = np.nonzero(jumped)[0]
        else:
            jumped = np.zeros(B, dtype=bool)
            rows = np.empty(0, dtype=int)

        out, nrm = _drift_and_norm(psi, drift)
        collapsed = (nrm < _NORM_COLLAPSE ** 2) & ~jumped
        if np.any(collapsed):
            r = int(np.nonzero(collapsed)[0][0])
            raise RuntimeError(
                f"state norm collapsed below {_NORM_COLLAPSE} in batch row {r} "
                f"at t={t:.6g}; dt too large")
        new_psi = out / np.sqrt(np.maximum(nrm, _NORM_COLLAPSE ** 4))[:, None]

        if rows.size:
            pc = asq[rows][:, tables.src] * p_scaled
            cum = np.cumsum(pc, axis=1)
            ch = np.sum(cum <= u[rows, None], axis=1)
            ch = np.minimum(ch, len(model.channels) - 1)
            # the scalar p_total and cum[-1] can disagree by one ulp; never
            # let that select a zero-probability channel
            ridx = np.arange(rows.size)
            for _ in range(pc.shape[1]):
                stuck = pc[ridx, ch] == 0.0
                if not np.any(stuck):
                    break
                ch = np.where(stuck, np.maximum(ch - 1, 0), ch)
            amp = psi[rows, tables.src[ch]]          # pre-jump source amplitude
            new_psi[rows] = 0.0
            new_psi[rows, tables.tgt[ch]] = amp / np.abs(amp)
            dsb[rows] += ds_vec[ch]
            if record_events:
                baths = tables.bath[ch]
                for i, r in enumerate(rows.tolist()):
                    c = int(ch[i])
                    events[r].append(JumpEvent(float(t), c, int(baths[i]),
                                               float(omega_vec[c]), float(ds_vec[c])))
        psi = new_psi

        if (s + 1) % out_stride == 0:
            idx = (s + 1) // out_stride
            kets_out[:, idx] = psi
            dsb_out[:, idx] = dsb

    return times[::out_stride], kets_out, dsb_out, events


def run_trajectory(model: LindbladModel, init: InitialCondition, t_f: float, dt: float,
                   rng: np.random.Generator, out_stride: int = 1,
                   seed: int = 0, index: int = 0) -> Trajectory:
    """One quantum-jump realisation from a pre-sampled initial condition.

    `rng` must be the same stream that produced `init` via sample_initial so
    that (seed, index) fully determine the trajectory.
    """
    psi0 = init.ket.vec[None, :]
    n_steps = len(time_grid(t_f, dt)) - 1
    pool = rng.random(n_steps)[None, :]
    cursor = [0]

    def draw(n: int) -> np.ndarray:
        block = pool[:, cursor[0]:cursor[0] + n]
        cursor[0] += n
        return block

    times, kets, dsb, events = _simulate(model, psi0, t_f, dt, draw, out_stride)
    return Trajectory(seed=seed, index=index, mode=init.mode, init_index=init.index,
                      init_prob=init.probability, times=times, kets=kets[0],
                      dsb=dsb[0], events=tuple(events[0]))


@dataclass(frozen=True)
class TrajectoryBatch:
    seed: int
    mode: str
    ids: np.ndarray
    init_indices: np.ndarray
    init_probs: np.ndarray
    times: np.ndarray
    kets: np.ndarray           # (B, n_out, d)
    dsb: np.ndarray            # (B, n_out)
    events: list

    def to_trajectories(self) -> list:
        return [
            Trajectory(seed=self.seed, index=int(self.ids[i]), mode=self.mode,
                       init_index=int(self.init_indices[i]),
                       init_prob=float(self.init_probs[i]), times=self.times,
                       kets=self.kets[i], dsb=self.dsb[i], events=tuple(self.events[i]))
            for i in range(len(self.ids))
        ]


def iter_trajectory_batches(model: LindbladModel, rho0, mode: str, n_traj: int,
                            t_f: float, dt: float, seed: int, out_stride: int = 1,
                            batch_size: int = 4096,
                            record_events: bool = True) -> Iterator[TrajectoryBatch]:
    """Stream the ensemble in batches; identical results for any batch_size."""
    if n_traj < 1:
        return
    weights, vecs, cum = _initial_table(rho0, mode)
    mode_id = MODE_IDS[mode]
    dmax = len(weights) - 1
    for start in range(0, n_traj, batch_size):
        ids = np.arange(start, min(start + batch_size, n_traj))
        rngs = [make_rng(seed, mode_id, int(i)) for i in ids]
        u0 = np.array([r.random() for r in rngs])
        ks = np.minimum(np.searchsorted(cum, u0, side="right"), dmax)
        psi0 = vecs[:, ks].T.copy()

        def draw(n: int, _rngs=rngs) -> np.ndarray:
            return np.stack([r.random(n) for r in _rngs], axis=0)

        times, kets, dsb, events = _simulate(model, psi0, t_f, dt, draw, out_stride,
                                             record_events=record_events)
        yield TrajectoryBatch(seed=seed, mode=mode, ids=ids, init_indices=ks,
                              init_probs=weights[ks], times=times, kets=kets,
                              dsb=dsb, events=events)


def iter_trajectories(model: LindbladModel, rho0, mode: str, n_traj: int, t_f: float,
                      dt: float, seed: int, out_stride: int = 1,
                      batch_size: int = 4096) -> Iterator[Trajectory]:
    for batch in iter_trajectory_batches(model, rho0, mode, n_traj, t_f, dt, seed,
                                         out_stride, batch_size):
        yield from batch.to_trajectories()


# ---------------------------------------------------------------------------
# trajectory-level entropies and ensemble estimators
# ---------------------------------------------------------------------------

def _log_matrix(rho: np.ndarray, floor: float = OVERLAP_FLOOR) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (vecs * np.log(np.maximum(vals, floor))) @ vecs.conj().T


def system_entropy(traj: Trajectory, rho0, rho_t, variant: str, t_index: int = -1) -> float:
    """System entropy change along one trajectory, by either definition.

    "ratio": -log(<psi_t|rho_t|psi_t> / <psi_0|rho_0|psi_0>), the definition
    consistent with the fluctuation theorem.  "logexp":
    -<psi_t|log rho_t|psi_t> + <psi_0|log rho_0|psi_0>, kept as the negative
    control; the two coincide in the classical (diagonal) case.
    """
    r0 = _rho_matrix(rho0)
    rt = _rho_matrix(rho_t)
    psi_t = traj.kets[t_index]
    psi_0 = traj.kets[0]
    if variant == "ratio":
        o_t = max(float(np.real(psi_t.conj() @ rt @ psi_t)), OVERLAP_FLOOR)
        o_0 = max(float(np.real(psi_0.conj() @ r0 @ psi_0)), OVERLAP_FLOOR)
        return -math.log(o_t / o_0)
    if variant == "logexp":
        l_t = float(np.real(psi_t.conj() @ _log_matrix(rt) @ psi_t))
        l_0 = float(np.real(psi_0.conj() @ _log_matrix(r0) @ psi_0))
        return -l_t + l_0
    raise ValueError(f"unknown entropy variant {variant!r}; pick from {ENTROPY_VARIANTS}")


class EnsembleAccumulator:
    """Streaming reducer for the trajectory estimators.

    Accepts batches (or single trajectories) in any order; merging is a sum
    of weighted sums and sums of squares, so partial results from parallel
    workers combine commutatively.
    """

    def __init__(self, times: np.ndarray, rho_grid: np.ndarray = None, rho0=None,
                 variants: Sequence[str] = ("ratio",),
                 want_psi_one: bool = False, want_rho_mean: bool = False):
        for v in variants:
            if v not in ENTROPY_VARIANTS:
                raise ValueError(f"unknown entropy variant {v!r}")
        self.variants = tuple(variants)
        if self.variants and (rho_grid is None or rho0 is None):
            raise ValueError("entropy estimators need the master-equation solution")
        self.times = times
        n = len(times)
        if rho_grid is not None:
            self.rho_grid = np.asarray(rho_grid, dtype=complex)
            if self.rho_grid.shape[0] != n:
                raise ValueError("rho_grid must be sampled on the output time grid")
            self.rho0 = _rho_matrix(rho0)
        else:
            self.rho_grid = None
            self.rho0 = None
        self.n = 0
        self.floored = 0
        self.sum_b = np.zeros(n)
        self.sum_b2 = np.zeros(n)
        self.sums_tot = {v: np.zeros(n) for v in self.variants}
        self.sums_tot2 = {v: np.zeros(n) for v in self.variants}
        if "logexp" in self.variants:
            self._log_grid = np.stack([_log_matrix(r) for r in self.rho_grid])
            self._log_rho0 = _log_matrix(self.rho0)
        self.want_psi_one = want_psi_one
        self.want_rho_mean = want_rho_mean
        self._op_sums_ready = False

    def _ensure_op_sums(self, d: int) -> None:
        if self._op_sums_ready:
            return
        n = len(self.times)
        if self.want_psi_one:
            self.psi_sum = np.zeros((n, d, d), dtype=complex)
            self.psi_sum_re2 = np.zeros((n, d, d))
            self.psi_sum_im2 = np.zeros((n, d, d))
        if self.want_rho_mean:
            self.rho_sum = np.zeros((n, d, d), dtype=complex)
            self.rho_sum_re2 = np.zeros((n, d, d))
            self.rho_sum_im2 = np.zeros((n, d, d))
        self._op_sums_ready = True

    def add(self, traj: Trajectory) -> None:
        batch = TrajectoryBatch(seed=traj.seed, mode=traj.mode,
                                ids=np.array([traj.index]),
                                init_indices=np.array([traj.init_index]),
                                init_probs=np.array([traj.init_prob]),
                                times=traj.times, kets=traj.kets[None],
                                dsb=traj.dsb[None], events=[list(traj.events)])
        self.add_batch(batch)

    def add_batch(self, batch: TrajectoryBatch) -> None:
        if len(batch.times) != len(self.times) or np.max(
                np.abs(batch.times - self.times)) > 1e-12:
            raise ValueError("batch grid does not match accumulator grid")
        kets = batch.kets
        B = kets.shape[0]
        self._ensure_op_sums(kets.shape[-1])
        w_b = np.exp(-batch.dsb)                                   # (B, n)
        self.n += B
        self.sum_b += w_b.sum(axis=0)
        self.sum_b2 += (w_b * w_b).sum(axis=0)
        if "ratio" in self.variants:
            o_t = np.einsum("bkd,kde,bke->bk", kets.conj(), self.rho_grid, kets).real
            o_0 = np.einsum("bd,de,be->b", kets[:, 0].conj(), self.rho0, kets[:, 0]).real
            self.floored += int(np.sum(o_t < OVERLAP_FLOOR) + np.sum(o_0 < OVERLAP_FLOOR))
            o_t = np.maximum(o_t, OVERLAP_FLOOR)
            o_0 = np.maximum(o_0, OVERLAP_FLOOR)
            w = w_b * (o_t / o_0[:, None])
            self.sums_tot["ratio"] += w.sum(axis=0)
            self.sums_tot2["ratio"] += (w * w).sum(axis=0)
        if "logexp" in self.variants:
            l_t = np.einsum("bkd,kde,bke->bk", kets.conj(), self._log_grid, kets).real
            l_0 = np.einsum("bd,de,be->b", kets[:, 0].conj(), self._log_rho0,
                            kets[:, 0]).real
            w = np.exp(-batch.dsb + l_t - l_0[:, None])
            self.sums_tot["logexp"] += w.sum(axis=0)
            self.sums_tot2["logexp"] += (w * w).sum(axis=0)
        if self.want_psi_one or self.want_rho_mean:
            for k in range(len(self.times)):
                outer = kets[:, k, :, None] * kets[:, k, None, :].conj()   # (B, d, d)
                if self.want_psi_one:
                    terms = w_b[:, k, None, None] * outer
                    self.psi_sum[k] += terms.sum(axis=0)
                    self.psi_sum_re2[k] += (terms.real ** 2).sum(axis=0)
                    self.psi_sum_im2[k] += (terms.imag ** 2).sum(axis=0)
                if self.want_rho_mean:
                    self.rho_sum[k] += outer.sum(axis=0)
                    self.rho_sum_re2[k] += (outer.real ** 2).sum(axis=0)
                    self.rho_sum_im2[k] += (outer.imag ** 2).sum(axis=0)

    @staticmethod
    def _mean_se(s: np.ndarray, s2: np.ndarray, n: int):
        mean = s / n
        if n < 2:
            return mean, np.full_like(mean, np.nan)
        var = np.maximum(s2 / n - mean ** 2, 0.0) * n / (n - 1)
        return mean, np.sqrt(var / n)

    def estimator_columns(self) -> dict:
        cols = {}
        mean_b, se_b = self._mean_se(self.sum_b, self.sum_b2, self.n)
        for v in self.variants:
            mean, se = self._mean_se(self.sums_tot[v], self.sums_tot2[v], self.n)
            suffix = "" if v == "ratio" else f"_{v}"
            cols[f"mean_exp_neg_stot{suffix}"] = mean
            cols[f"se_stot{suffix}"] = se
        cols["mean_exp_neg_sb"] = mean_b
        cols["se_sb"] = se_b
        cols["n_traj"] = np.full(len(self.times), self.n)
        return cols

    def psi_one_estimate(self):
        if not (self.want_psi_one and self._op_sums_ready):
            raise RuntimeError("accumulator holds no psi-one sums")
        return _operator_estimate(self.psi_sum, self.psi_sum_re2, self.psi_sum_im2, self.n)

    def rho_mean_estimate(self):
        if not (self.want_rho_mean and self._op_sums_ready):
            raise RuntimeError("accumulator holds no rho-mean sums")
        return _operator_estimate(self.rho_sum, self.rho_sum_re2, self.rho_sum_im2, self.n)

    def diagnostics(self) -> dict:
        total = self.n * len(self.times)
        frac = self.floored / total if total else 0.0
        return {
            "n_traj": self.n,
            "floored_overlaps": self.floored,
            "floored_fraction": frac,
            "floor_flag": frac > 1e-4,
        }


@dataclass(frozen=True)
class OperatorEstimate:
    times: np.ndarray
    mean: np.ndarray           # (n, d, d) complex
    se_re: np.ndarray
    se_im: np.ndarray
    n: int


def _operator_estimate(s, s_re2, s_im2, n) -> OperatorEstimate:
    mean = s / n
    if n < 2:
        se_re = np.full(s_re2.shape, np.nan)
        se_im = np.full(s_im2.shape, np.nan)
    else:
        var_re = np.maximum(s_re2 / n - mean.real ** 2, 0.0) * n / (n - 1)
        var_im = np.maximum(s_im2 / n - mean.imag ** 2, 0.0) * n / (n - 1)
        se_re = np.sqrt(var_re / n)
        se_im = np.sqrt(var_im / n)
    return OperatorEstimate(times=None, mean=mean, se_re=se_re, se_im=se_im, n=n)


def _feed(trajs: Iterable, acc: EnsembleAccumulator) -> EnsembleAccumulator:
    for item in trajs:
        if isinstance(item, TrajectoryBatch):
            acc.add_batch(item)
        else:
            acc.add(item)
    if acc.n == 0:
        raise ValueError("empty trajectory set")
    return acc


def ft_estimators(trajs: Iterable, state_series, variants: Sequence[str] = ("ratio",),
                  out_stride: int = 1) -> ResultSeries:
    """Sample means and standard errors of exp(-dS_B - dS_sys) and exp(-dS_B).

    `state_series` is the master-equation solution on the integration grid;
    it is subsampled by `out_stride` to the trajectories' output grid.
    """
    times = state_series.times[::out_stride]
    rho_grid = state_series.rho[::out_stride]
    acc = EnsembleAccumulator(times, rho_grid, state_series.rho[0], variants=variants)
    _feed(trajs, acc)
    if acc.n < 2:
        raise ValueError("need at least 2 trajectories for standard errors")
    return ResultSeries(times, acc.estimator_columns(), meta=acc.diagnostics())


def estimate_psi_one(trajs: Iterable, times: np.ndarray) -> OperatorEstimate:
    """Monte Carlo estimate of the xi=1 generating-function operator.

    All trajectories must share the same initial index; the estimate is the
    e^{-dS_B}-weighted average of the projectors |psi(t)><psi(t)|.
    """
    acc = EnsembleAccumulator(times, variants=(), want_psi_one=True)
    indices = set()
    for item in trajs:
        if isinstance(item, TrajectoryBatch):
            indices.update(np.unique(item.init_indices).tolist())
            acc.add_batch(item)
        else:
            indices.add(item.init_index)
            acc.add(item)
    if acc.n == 0:
        raise ValueError("empty trajectory set")
    if len(indices) > 1:
        raise ValueError(f"trajectories mix initial indices {sorted(indices)}")
    est = acc.psi_one_estimate()
    return OperatorEstimate(times=times, mean=est.mean, se_re=est.se_re,
                            se_im=est.se_im, n=est.n)


def entropy_histogram(trajs: Iterable, t: float, bins) -> list:
    """Empirical joint density of (final jump-basis index, accumulated dS_B).

    Each trajectory contributes weight |<j|psi(t)>|^2 to final index j at its
    dS_B(t); weights are normalised by the trajectory count so the total over
    all indices and bins is 1.
    """
    edges = np.asarray(bins, dtype=float)
    per_j = None
    n = 0
    t_idx = None
    for item in trajs:
        batch = item if isinstance(item, TrajectoryBatch) else None
        times = batch.times if batch is not None else item.times
        if t_idx is None:
            t_idx = int(np.argmin(np.abs(times - t)))
            if abs(times[t_idx] - t) > 1e-9:
                raise ValueError(f"t={t} is not on the trajectory output grid")
        kets = batch.kets[:, t_idx] if batch is not None else item.kets[None, t_idx]
        dsb = batch.dsb[:, t_idx] if batch is not None else item.dsb[None, t_idx]
        w = np.abs(kets) ** 2                      # (B, d)
        d = w.shape[1]
        if per_j is None:
            per_j = np.zeros((d, len(edges) - 1))
        lo, hi = edges[0], edges[-1]
        if np.any(dsb < lo) or np.any(dsb > hi):
            raise ValueError("bins do not cover the observed dS_B range")
        for j in range(d):
            per_j[j] += np.histogram(dsb, bins=edges, weights=w[:, j])[0]
        n += w.shape[0]
    if n == 0:
        raise ValueError("empty trajectory set")
    return [EntropyHistogram(final_index=j, bin_edges=edges, weights=per_j[j] / n)
            for j in range(per_j.shape[0])]


def jarzynski_estimator(trajs: Iterable, model: LindbladModel, beta: float):
    """Monte Carlo work-relation estimate from jump-basis-sampled trajectories.

    Per trajectory: sum_j |<j|psi(t_f)>|^2 e^{beta(Q_D - H_jj(t_f) + H_j0j0(0))}
    with Q_D = -dS_B/beta.  Returns (mean, standard error).
    """
    betas = {b.beta for b in model.baths}
    if len(betas) > 1:
        raise ValueError(f"work relation needs equal-temperature baths, got {sorted(betas)}")
    h0 = model.h_diag(0.0)
    s = s2 = 0.0
    n = 0
    hf = None
    for item in trajs:
        if isinstance(item, TrajectoryBatch):
            kets_f = item.kets[:, -1]
            dsb_f = item.dsb[:, -1]
            j0 = item.init_indices
            t_f = item.times[-1]
        else:
            kets_f = item.kets[None, -1]
            dsb_f = item.dsb[None, -1]
            j0 = np.array([item.init_index])
            t_f = item.times[-1]
        if hf is None:
            hf = model.h_diag(float(t_f))
        w = np.abs(kets_f) ** 2
        vals = np.sum(w * np.exp(-dsb_f[:, None] - beta * hf[None, :]), axis=1) \
            * np.exp(beta * h0[j0])
        s += vals.sum()
        s2 += (vals * vals).sum()
        n += len(vals)
    if n < 2:
        raise ValueError("need at least 2 trajectories")
    mean = s / n
    var = max(s2 / n - mean ** 2, 0.0) * n / (n - 1)
    return float(mean), float(math.sqrt(var / n))
