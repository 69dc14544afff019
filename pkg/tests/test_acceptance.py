"""Acceptance gate: every headline criterion at its stated tolerance.

Statistical criteria run at n = 10^5 trajectories with the fixed default
seed; exact identities run at dt = 10^-3 over t in [0, 15].  Each check
prints one pass/fail line (visible with pytest -s).
"""
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.linalg import expm

from lindblad_ft.harness import (DEFAULT_SEED, build_initial_state, build_model,
                                 panel_config, reproduce_panel)
from lindblad_ft.hilbert import DensityMatrix, Operator, eigh
from lindblad_ft.model import build_two_spin_model
from lindblad_ft.dynamics import (dual_dissipator, evolve_density,
                                  second_law_gap)
from lindblad_ft.tilted import (ft_functional, jarzynski_lhs, psi_bar_one,
                                psi_bar_operator, psi_one_series, tilted_generator)
from lindblad_ft.trajectories import (EnsembleAccumulator, estimate_psi_one,
                                      iter_trajectory_batches, iter_trajectories,
                                      jarzynski_estimator, system_entropy)

from conftest import DIAG_WEIGHTS, random_density, random_hermitian

N_TRAJ = 100_000
T_F = 15.0
DT_EXACT = 1e-3
DT_QMC = 0.005
STRIDE = 20
EPS = 1e-12                     # absolute slack so SE=0 points compare cleanly
COSH2_04 = 1.1687174731524223
ZRATIO_J02 = 1.1664802639053251

PANELS = ("a", "b", "c", "d")


def _report(name: str, ok: bool, detail: str = "") -> None:
    print(f"{'PASS' if ok else 'FAIL'} [{name}] {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="session")
def panels():
    """Exact solution plus a 10^5-trajectory ensemble for each benchmark panel."""
    out = {}
    for name in PANELS:
        cfg = panel_config(name)
        model = build_model(cfg)
        rho0 = build_initial_state(cfg, model)
        series = evolve_density(model, rho0, T_F, DT_QMC)
        times = series.times[::STRIDE]
        variants = ("ratio", "logexp") if name == "c" else ("ratio",)
        acc = EnsembleAccumulator(times, series.rho[::STRIDE], series.rho[0],
                                  variants=variants, want_rho_mean=True)
        for batch in iter_trajectory_batches(model, rho0.mat, "eigen", N_TRAJ,
                                             T_F, DT_QMC, DEFAULT_SEED,
                                             out_stride=STRIDE, record_events=False):
            acc.add_batch(batch)
        out[name] = SimpleNamespace(name=name, cfg=cfg, model=model, rho0=rho0,
                                    series=series, times=times, acc=acc,
                                    cols=acc.estimator_columns())
    return out


def test_psi_bar_stationarity():
    worst = 0.0
    for name in PANELS:
        model = build_model(panel_config(name))
        dev = float(psi_bar_one(model, T_F, DT_EXACT).max())
        worst = max(worst, dev)
    _report("psi-bar stationarity",
            worst < 1e-7, f"max |sum_j Psi(1,t|Pi_j) - 1| = {worst:.3e} < 1e-7")


def test_integral_ft_functional():
    rng = np.random.default_rng(424242)
    worst = 0.0
    n_pairs = 0
    for name in PANELS:
        cfg = panel_config(name)
        model = build_model(cfg)
        rho0 = build_initial_state(cfg, model)
        rho_t = evolve_density(model, rho0, T_F, DT_QMC).rho[-1]
        alt0 = random_density(rng, 4)
        pure = np.zeros((4, 4), dtype=complex)
        pure[1, 1] = 1.0
        pairs = [(rho0, np.eye(4, dtype=complex) / 4),
                 (rho0, rho_t),
                 (rho0, random_density(rng, 4).mat),
                 (alt0, pure),
                 (alt0, random_density(rng, 4).mat)]
        for r0, rf in pairs:
            val = ft_functional(model, r0, rf, T_F, DT_EXACT)
            worst = max(worst, abs(val - 1.0))
            n_pairs += 1
    _report("integral fluctuation theorem",
            worst < 1e-7, f"max |Tr[Psi-bar rho_f] - 1| = {worst:.3e} over {n_pairs} pairs")


def test_basis_sum_identity():
    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    worst = 0.0
    for name, basis in (("b", None), ("b", q), ("d", None), ("d", q)):
        model = build_model(panel_config(name))
        op = psi_bar_operator(model, T_F, DT_EXACT, basis=basis)
        worst = max(worst, float(np.max(np.abs(op.traces().real - 4.0))))
    _report("basis-sum identity",
            worst < 1e-7, f"max |sum_j Tr Psi(1,t|Pi_j) - 4| = {worst:.3e}, two bases")


def test_dual_generator_equivalence():
    model = build_model(panel_config("b"))
    h = model.h_matrix(0.0)
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(100):
        x = random_hermitian(rng, 4)
        tilted = tilted_generator(model, x, 1.0, 0.0).mat
        dual = -1j * (h @ x - x @ h) + dual_dissipator(model, x, 0.0)
        worst = max(worst, float(np.max(np.abs(tilted - dual))))
    _report("dual-generator equivalence",
            worst < 1e-12, f"max norm difference {worst:.3e} over 100 random inputs")


def test_qmc_fluctuation_theorem(panels):
    worst_z = 0.0
    for name in PANELS:
        p = panels[name]
        mean = p.cols["mean_exp_neg_stot"]
        se = p.cols["se_stot"]
        z = np.abs(mean - 1.0) / np.maximum(se, EPS)
        z[0] = 0.0 if abs(mean[0] - 1.0) <= EPS else z[0]
        worst_z = max(worst_z, float(z.max()))
        ok = bool(np.all(np.abs(mean - 1.0) <= 3.0 * se + EPS))
        _report(f"QMC fluctuation theorem panel {name}", ok,
                f"max |mean-1|/se = {z.max():.2f} over {len(mean)} times, n={N_TRAJ}")


def test_qmc_bath_entropy_excess(panels):
    from lindblad_ft.tilted import evolve_tilted

    for name in PANELS:
        p = panels[name]
        mean_b = p.cols["mean_exp_neg_sb"]
        se_b = p.cols["se_sb"]
        ok = bool(np.all(mean_b >= 1.0 - 3.0 * se_b - EPS))
        detail = f"min(mean + 3se - 1) = {float(np.min(mean_b + 3 * se_b - 1)):.2e}"
        if name in ("b", "c", "d"):
            # the excess above 1 is certified by the exact tilted trace and the
            # sampler must agree with it; panel (d)'s true excess (1.25e-3) sits
            # below 3 sigma resolution at n=10^5, so the direct z check applies
            # to (b) and (c) only
            exact_final = float(evolve_tilted(p.model, p.rho0.mat, 1.0, T_F,
                                              DT_QMC).traces()[-1].real)
            agree_z = abs(mean_b[-1] - exact_final) / max(se_b[-1], EPS)
            ok = ok and exact_final > 1.0 and agree_z < 3.0
            detail += f", exact excess {exact_final - 1:.2e}, QMC agreement z = {agree_z:.1f}"
            if name in ("b", "c"):
                excess_z = float((mean_b[-1] - 1.0) / max(se_b[-1], EPS))
                ok = ok and excess_z > 3.0
                detail += f", visible excess z = {excess_z:.1f}"
        _report(f"bath-entropy bound panel {name}", ok, detail)


def test_negative_control_variant_x(panels):
    p = panels["c"]
    mean_x = p.cols["mean_exp_neg_stot_logexp"]
    se_x = p.cols["se_stot_logexp"]
    z = abs(mean_x[-1] - 1.0) / max(se_x[-1], EPS)
    _report("negative control (log-expectation entropy)",
            z > 5.0, f"final deviation z = {z:.1f} > 5 for the coherent panel (c)")


def test_qmc_exact_cross_validation_psi_one(panels):
    model = panels["c"].model
    vals, vecs = eigh(Operator(panels["c"].rho0.mat))
    k0 = int(np.argmax(vals))
    proj = np.outer(vecs[:, k0], vecs[:, k0].conj())
    batches = []
    for batch in iter_trajectory_batches(model, proj, "eigen", N_TRAJ, T_F, DT_QMC,
                                         DEFAULT_SEED, out_stride=STRIDE,
                                         record_events=False):
        batches.append(batch)
    est = estimate_psi_one(batches, batches[0].times)
    exact = psi_one_series(model, proj, T_F, DT_QMC).ops[::STRIDE]
    se = np.sqrt(est.se_re ** 2 + est.se_im ** 2)
    z = np.abs(est.mean - exact) / np.maximum(se, EPS)
    worst = float(z[1:].max())
    _report("QMC vs tilted operator",
            worst < 5.0, f"max entrywise z = {worst:.2f} at n={N_TRAJ}")


def test_qmc_exact_cross_validation_density(panels):
    worst = 0.0
    for name in PANELS:
        p = panels[name]
        est = p.acc.rho_mean_estimate()
        expected = p.series.rho[::STRIDE]
        se = np.sqrt(est.se_re ** 2 + est.se_im ** 2)
        z = np.abs(est.mean - expected) / np.maximum(se, EPS)
        worst = max(worst, float(z[1:].max()))
    _report("QMC vs master equation",
            worst < 5.0, f"max entrywise z = {worst:.2f} across panels")


def test_jarzynski_exact():
    m0 = build_two_spin_model(J=0.0, h0=0.0, h1=0.4, t_f=T_F, T_a=1.0, T_b=1.0, g=0.1)
    lhs0, rhs0 = jarzynski_lhs(m0, 1.0, T_F, DT_EXACT)
    mj = build_two_spin_model(J=0.2, h0=0.0, h1=0.4, t_f=T_F, T_a=1.0, T_b=1.0, g=0.1)
    lhsj, rhsj = jarzynski_lhs(mj, 1.0, T_F, DT_EXACT)
    ok = (abs(rhs0 - COSH2_04) < 1e-12 and abs(lhs0 - rhs0) < 1e-6
          and abs(rhsj - ZRATIO_J02) < 1e-12 and abs(lhsj - rhsj) < 1e-6)
    _report("work relation (exact)", ok,
            f"J=0: lhs-rhs = {lhs0 - rhs0:.2e}; J=0.2: lhs-rhs = {lhsj - rhsj:.2e}")


def test_jarzynski_qmc():
    m = build_two_spin_model(J=0.2, h0=0.0, h1=0.4, t_f=T_F, T_a=1.0, T_b=1.0, g=0.1)
    lhs, _ = jarzynski_lhs(m, 1.0, T_F, DT_QMC)
    vals, vecs = eigh(Operator(m.h_matrix(0.0)))
    w = np.exp(-vals)
    gibbs0 = (vecs * (w / w.sum())) @ vecs.conj().T
    batches = iter_trajectory_batches(m, gibbs0, "jump", N_TRAJ, T_F, DT_QMC,
                                      DEFAULT_SEED, out_stride=3000,
                                      record_events=False)
    val, se = jarzynski_estimator(batches, m, 1.0)
    z = abs(val - lhs) / se
    _report("work relation (QMC)",
            z < 3.0, f"estimate {val:.5f} +- {se:.5f} vs exact {lhs:.5f} (z = {z:.2f})")


def test_second_law(panels):
    worst = 0.0
    for name in PANELS:
        gap = second_law_gap(panels[name].series)
        worst = min(worst, float(gap.min()))
    _report("second law", worst >= -1e-8,
            f"min entropy-balance gap = {worst:.3e} >= -1e-8 on all panels")


def test_classical_limit(panels):
    p = panels["a"]
    R = np.zeros((4, 4))
    for ch, g in zip(p.model.channels, p.model.rates(0.0)):
        R[ch.target, ch.source] += g
        R[ch.source, ch.source] -= g
    worst = 0.0
    for i in (600, 1500, 3000):
        expected = expm(R * p.series.times[i]) @ np.array(DIAG_WEIGHTS)
        pops = np.real(np.diag(p.series.rho[i]))
        worst = max(worst, float(np.max(np.abs(pops - expected))))
    ok_markov = worst < 1e-6

    worst_xy = 0.0
    for traj in iter_trajectories(p.model, p.rho0.mat, "jump", 200, T_F, DT_QMC,
                                  DEFAULT_SEED + 1, out_stride=STRIDE):
        for idx in (30, 75, 150):
            rho_t = p.series.rho[::STRIDE][idx]
            y = system_entropy(traj, p.rho0.mat, rho_t, "ratio", t_index=idx)
            x = system_entropy(traj, p.rho0.mat, rho_t, "logexp", t_index=idx)
            worst_xy = max(worst_xy, abs(x - y))
    ok_xy = worst_xy < 1e-10
    _report("classical limit", ok_markov and ok_xy,
            f"populations vs matrix exponential {worst:.2e} < 1e-6; "
            f"entropy variants differ by {worst_xy:.2e} < 1e-10")


def test_determinism_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    reproduce_panel("b", out_dir=a, n_traj=400, seed=DEFAULT_SEED)
    reproduce_panel("b", out_dir=b, n_traj=400, seed=DEFAULT_SEED)
    same = all((a / f).read_bytes() == (b / f).read_bytes()
               for f in ("summary.csv", "events.csv", "exact.csv",
                         "state_series.csv", "meta.json"))
    _report("determinism", same, "repeated equal-seed runs are byte-identical")


def test_dt_halving_unbiasedness(panels):
    # halving dt moves the estimator by less than one standard error at 10^5
    p = panels["b"]
    m1 = p.cols["mean_exp_neg_stot"][-1]
    se1 = p.cols["se_stot"][-1]
    dt2 = DT_QMC / 2
    series2 = evolve_density(p.model, p.rho0, T_F, dt2)
    times2 = series2.times[::2 * STRIDE]
    acc2 = EnsembleAccumulator(times2, series2.rho[::2 * STRIDE], series2.rho[0])
    for batch in iter_trajectory_batches(p.model, p.rho0.mat, "eigen", N_TRAJ,
                                         T_F, dt2, DEFAULT_SEED,
                                         out_stride=2 * STRIDE, record_events=False):
        acc2.add_batch(batch)
    cols2 = acc2.estimator_columns()
    m2 = cols2["mean_exp_neg_stot"][-1]
    se2 = cols2["se_stot"][-1]
    delta = abs(m1 - m2)
    _report("dt-halving unbiasedness", delta < max(se1, se2),
            f"|mean(dt) - mean(dt/2)| = {delta:.2e} < se = {max(se1, se2):.2e}")
