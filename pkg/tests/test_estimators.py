import cmath
import math

import numpy as np
import pytest

from irsense import signal_model as sm
from irsense.errors import DegenerateInputError, ParameterError
from irsense.estimators import (
    GridSpec,
    angle_search,
    angle_search_from_signature,
    baseline_estimate,
    baseline_scores,
    delay_peak_search,
    derive_g_from_beta,
    doppler_peak_search,
    hosvd_estimate,
)
from irsense.experiments import draw_truth, normalized_rmse

from conftest import crandn

CFG = sm.SystemConfig()
PROFILE = sm.irs_dft_profile(CFG.n, CFG.l, CFG.q)
GRIDS = GridSpec.for_config(CFG)
SMALL = GridSpec.for_config(CFG, r_tau=25, r_nu=20, r_az=12, r_el=9)


# -- brute-force oracles, written from the cost definitions --------------------

def oracle_delay(c_hat, grids, cfg):
    best, arg = -1.0, None
    energy = sum(abs(x) ** 2 for x in c_hat)
    for r, tau in enumerate(grids.tau_grid):
        acc = sum(cmath.exp(-2j * math.pi * n * cfg.delta_f * tau).conjugate() * c_hat[n] for n in range(cfg.n_c))
        score = abs(acc) ** 2 / energy
        if score > best:
            best, arg = score, r
    return arg


def oracle_doppler(d_hat, grids, cfg):
    best, arg = -1.0, None
    energy = sum(abs(x) ** 2 for x in d_hat)
    for r, nu in enumerate(grids.nu_grid):
        acc = sum(cmath.exp(2j * math.pi * nu * k * cfg.t_sym).conjugate() * d_hat[k] for k in range(cfg.q))
        score = abs(acc) ** 2 / energy
        if score > best:
            best, arg = score, r
    return arg


def oracle_angle(y, tau, nu, profile, phi, grids, cfg):
    c = [cmath.exp(-2j * math.pi * n * cfg.delta_f * tau) for n in range(cfg.n_c)]
    best, arg = -1.0, None
    for i_el, el in enumerate(grids.el_grid):
        for i_az, az in enumerate(grids.az_grid):
            g = sm.g_l_signature(az, el, phi[0], phi[1], profile, cfg)
            acc = 0j
            for l in range(cfg.l):
                for q in range(cfg.q):
                    m = l * cfg.q + q
                    ref = g[l] * cmath.exp(2j * math.pi * nu * m * cfg.t_sym)
                    acc += sum(c[n].conjugate() * y[n, q, l] for n in range(cfg.n_c)) * ref.conjugate()
            score = abs(acc) ** 2 / sum(abs(x) ** 2 for x in g)
            if score > best:
                best, arg = score, i_el * grids.r_az + i_az
    return arg


def oracle_baseline(y, grids, cfg):
    best, arg = -1.0, None
    for i, tau in enumerate(grids.tau_grid):
        c = np.array([cmath.exp(-2j * math.pi * n * cfg.delta_f * tau) for n in range(cfg.n_c)])
        for j, nu in enumerate(grids.nu_grid):
            d = np.array([cmath.exp(2j * math.pi * nu * k * cfg.t_sym) for k in range(cfg.q)])
            score = sum(abs(c.conj() @ y[:, :, l] @ d.conj()) ** 2 for l in range(cfg.l))
            if score > best:
                best, arg = score, (i, j)
    return arg


def echo(truth, snr_db=math.inf, seed=0, cfg=CFG, profile=PROFILE):
    y = sm.synthesize_echo(cfg, truth, profile)
    return sm.add_awgn(y, snr_db, seed)[0]


def on_grid_truth(seed, grids=GRIDS, cfg=CFG):
    return draw_truth(cfg, grids, seed, on_grid=True)


# -- GridSpec -----------------------------------------------------------------

def test_grid_defaults():
    assert GRIDS.r_tau == GRIDS.r_nu == 100 and GRIDS.r_theta == 10_000
    assert GRIDS.tau_max == pytest.approx(0.8 / CFG.delta_f)
    assert GRIDS.nu_max == pytest.approx(1 / (2 * CFG.q * CFG.t_sym))
    for g in (GRIDS.tau_grid, GRIDS.nu_grid, GRIDS.az_grid, GRIDS.el_grid):
        assert np.all(np.diff(g) > 0)
    az, el = GRIDS.angle_grid
    assert az[GRIDS.angle_index(3, 7)] == GRIDS.az_grid[3]
    assert el[GRIDS.angle_index(3, 7)] == GRIDS.el_grid[7]


def test_grid_invariants():
    with pytest.raises(ParameterError, match="r_tau"):
        GridSpec(1e-6, 1e3, r_tau=0)
    with pytest.raises(ParameterError, match="nu_max"):
        GridSpec(1e-6, 0.0)
    assert GridSpec.from_dict(GRIDS.to_dict()) == GRIDS


# -- delay / Doppler searches --------------------------------------------------

def test_delay_search_on_grid():
    for r in (0, 17, 99):
        tau, peak, idx = delay_peak_search(sm.delay_steering(GRIDS.tau_grid[r], CFG.n_c, CFG.delta_f), GRIDS, CFG)
        assert idx == r and tau == GRIDS.tau_grid[r]
        assert peak == pytest.approx(CFG.n_c, rel=1e-12)


def test_delay_search_scale_invariant(rng):
    c = sm.delay_steering(GRIDS.tau_grid[40], CFG.n_c, CFG.delta_f) + 0.3 * crandn(rng, CFG.n_c)
    ref = delay_peak_search(c, GRIDS, CFG)[2]
    for gamma in (1e-9, -3.0, 2j, cmath.exp(1j)):
        assert delay_peak_search(gamma * c, GRIDS, CFG)[2] == ref


def test_delay_search_noise_regression():
    c = crandn(np.random.default_rng(7), CFG.n_c)
    idx = delay_peak_search(c, GRIDS, CFG)[2]
    assert idx == oracle_delay(c, GRIDS, CFG)
    assert idx == 0  # frozen from the oracle


def test_delay_search_length_check():
    with pytest.raises(ParameterError):
        delay_peak_search(np.ones(3), GRIDS, CFG)


def test_doppler_search_on_grid():
    for r in (0, 33, 99):
        nu, _, idx = doppler_peak_search(sm.doppler_q(GRIDS.nu_grid[r], CFG), GRIDS, CFG)
        assert idx == r and nu == GRIDS.nu_grid[r]
    assert doppler_peak_search(np.ones(CFG.q), GRIDS, CFG)[2] == 0


def test_doppler_search_stability_at_30db():
    # 10-point grid: step ~ 12x the estimator std at 30 dB over 8 samples
    grids = GridSpec.for_config(CFG, r_nu=10)
    r = 6
    d = sm.doppler_q(grids.nu_grid[r], CFG)
    same = 0
    for seed in range(1000):
        noisy = sm.add_awgn(d.reshape(-1, 1, 1), 30.0, seed)[0].ravel()
        same += doppler_peak_search(noisy, grids, CFG)[2] == r
    assert same >= 990


@pytest.mark.parametrize("seed", range(5))
def test_searches_match_oracles(seed):
    rng = np.random.default_rng(seed)
    c, d = crandn(rng, CFG.n_c), crandn(rng, CFG.q)
    assert delay_peak_search(c, SMALL, CFG)[2] == oracle_delay(c, SMALL, CFG)
    assert doppler_peak_search(d, SMALL, CFG)[2] == oracle_doppler(d, SMALL, CFG)


# -- g_L recovery ----------------------------------------------------------------

def test_derive_g(rng):
    beta = crandn(rng, CFG.l)
    np.testing.assert_array_equal(derive_g_from_beta(beta, 0.0, CFG), beta)
    g = crandn(rng, CFG.l)
    nu, alpha = 3100.0, 0.3 - 0.7j
    beta = alpha * g * sm.doppler_l(nu, CFG)
    np.testing.assert_allclose(derive_g_from_beta(beta, nu, CFG), alpha * g, rtol=1e-12)
    delta = 250.0
    rot = np.exp(-2j * np.pi * delta * CFG.q * CFG.t_sym * np.arange(CFG.l))
    np.testing.assert_allclose(derive_g_from_beta(beta, nu + delta, CFG), alpha * g * rot, rtol=1e-12)


# -- angle search --------------------------------------------------------------

def test_angle_search_noiseless_full_grid():
    truth = on_grid_truth(3)
    y = echo(truth)
    res = angle_search(y, truth.tau, truth.nu, PROFILE, (truth.phi_az, truth.phi_el), GRIDS, CFG)
    assert (res.theta_az, res.theta_el) == (truth.theta_az, truth.theta_el)
    assert res.identifiable and res.skipped == 0


@pytest.mark.parametrize("seed", range(3))
def test_angle_search_matches_oracle(seed):
    truth = on_grid_truth(seed, SMALL)
    y = echo(truth, 5.0, seed)
    phi = (truth.phi_az, truth.phi_el)
    tau, nu = SMALL.tau_grid[4], SMALL.nu_grid[6]
    assert angle_search(y, tau, nu, PROFILE, phi, SMALL, CFG).index == oracle_angle(y, tau, nu, PROFILE, phi, SMALL, CFG)


def test_angle_search_scale_invariant():
    truth = on_grid_truth(5)
    y = echo(truth, 0.0, 1)
    phi = (truth.phi_az, truth.phi_el)
    ref = angle_search(y, truth.tau, truth.nu, PROFILE, phi, GRIDS, CFG).index
    assert angle_search(-4e7j * y, truth.tau, truth.nu, PROFILE, phi, GRIDS, CFG).index == ref


def test_angle_search_single_element_not_identifiable():
    cfg = sm.SystemConfig(n_x=1, n_y=1, q=8, l=1)
    profile = sm.irs_dft_profile(1, 1, 8)
    grids = GridSpec.for_config(cfg, r_az=10, r_el=10)
    truth = sm.TargetTruth(grids.tau_grid[3], grids.nu_grid[2], 0.5, 0.6, 0.1, 0.2, 1.0)
    y = echo(truth, cfg=cfg, profile=profile)
    res = angle_search(y, truth.tau, truth.nu, profile, (0.1, 0.2), grids, cfg)
    assert res.index == 0
    assert not res.identifiable


def test_angle_search_skips_null_signatures():
    # 2x1 array with a single all-ones profile column: candidates with u_theta = 1 - u_phi cancel
    cfg = sm.SystemConfig(n_x=2, n_y=1, n_c=4, q=2, l=1)
    profile = sm.IrsProfile(np.ones((2, 1)), 2)
    grids = GridSpec.for_config(cfg, r_az=3, r_el=3)
    truth = sm.TargetTruth(0.0, 0.0, math.pi / 4, math.pi / 4, math.pi / 2, math.pi / 2, 1.0)
    y = echo(truth, cfg=cfg, profile=profile)
    res = angle_search(y, 0.0, 0.0, profile, (math.pi / 2, math.pi / 2), grids, cfg)
    # (az, el) = (0, pi/2) gives sin(el) cos(az) = 1
    assert res.skipped == 1


# -- end-to-end ----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_noiseless_on_grid_exact(seed):
    truth = on_grid_truth(100 + seed)
    y = echo(truth)
    phi = (truth.phi_az, truth.phi_el)
    want = (truth.tau, truth.nu, truth.theta_az, truth.theta_el)
    h = hosvd_estimate(y, CFG, PROFILE, phi, GRIDS)
    b = baseline_estimate(y, CFG, PROFILE, phi, GRIDS)
    assert (h.tau_hat, h.nu_hat, h.theta_az_hat, h.theta_el_hat) == want
    assert (b.tau_hat, b.nu_hat, b.theta_az_hat, b.theta_el_hat) == want
    assert h.grid_indices == b.grid_indices


@pytest.mark.parametrize("seed", range(4))
def test_noiseless_off_grid_nearest(seed):
    truth = draw_truth(CFG, GRIDS, 200 + seed)
    y = echo(truth)
    est = hosvd_estimate(y, CFG, PROFILE, (truth.phi_az, truth.phi_el), GRIDS)
    assert est.grid_indices["delay"] == int(np.argmin(np.abs(GRIDS.tau_grid - truth.tau)))
    assert est.grid_indices["doppler"] == int(np.argmin(np.abs(GRIDS.nu_grid - truth.nu)))


def test_factor_angle_source_noiseless():
    truth = on_grid_truth(9)
    y = echo(truth)
    est = hosvd_estimate(y, CFG, PROFILE, (truth.phi_az, truth.phi_el), GRIDS, angle_source="factor")
    assert (est.theta_az_hat, est.theta_el_hat) == (truth.theta_az, truth.theta_el)
    g_true = sm.g_l_signature(truth.theta_az, truth.theta_el, truth.phi_az, truth.phi_el, PROFILE, CFG)
    corr = abs(np.vdot(est.g_hat, g_true)) / (np.linalg.norm(est.g_hat) * np.linalg.norm(g_true))
    assert corr == pytest.approx(1.0, abs=1e-9)
    res = angle_search_from_signature(est.g_hat, PROFILE, (truth.phi_az, truth.phi_el), GRIDS, CFG)
    assert res.index == est.grid_indices["angle"]
    with pytest.raises(ParameterError):
        hosvd_estimate(y, CFG, PROFILE, (0, 0), GRIDS, angle_source="bogus")


def test_hosvd_decoupling():
    truth = draw_truth(CFG, GRIDS, 17)
    y = echo(truth, 5.0, 2)
    phi = (truth.phi_az, truth.phi_el)
    ref = hosvd_estimate(y, CFG, PROFILE, phi, GRIDS)
    other_nu = GridSpec.for_config(CFG, nu_max=GRIDS.nu_max * 0.63, r_nu=37)
    other_tau = GridSpec.for_config(CFG, tau_max=GRIDS.tau_max * 0.9, r_tau=51)
    assert hosvd_estimate(y, CFG, PROFILE, phi, other_nu).grid_indices["delay"] == ref.grid_indices["delay"]
    assert hosvd_estimate(y, CFG, PROFILE, phi, other_tau).grid_indices["doppler"] == ref.grid_indices["doppler"]


def test_estimators_scale_invariant():
    truth = draw_truth(CFG, GRIDS, 23)
    y = echo(truth, 0.0, 4)
    phi = (truth.phi_az, truth.phi_el)
    for fn in (hosvd_estimate, baseline_estimate):
        assert fn(3e5 * 1j * y, CFG, PROFILE, phi, GRIDS).grid_indices == fn(y, CFG, PROFILE, phi, GRIDS).grid_indices


@pytest.mark.parametrize("seed", range(3))
def test_baseline_matches_oracle(seed):
    truth = draw_truth(CFG, SMALL, seed)
    y = echo(truth, 0.0, seed)
    score = baseline_scores(y, SMALL, CFG)
    assert np.unravel_index(np.argmax(score), score.shape) == oracle_baseline(y, SMALL, CFG)
    est = baseline_estimate(y, CFG, PROFILE, (truth.phi_az, truth.phi_el), SMALL)
    assert (est.grid_indices["delay"], est.grid_indices["doppler"]) == oracle_baseline(y, SMALL, CFG)


def test_degenerate_inputs():
    zero = np.zeros((CFG.n_c, CFG.q, CFG.l))
    for fn in (hosvd_estimate, baseline_estimate):
        with pytest.raises(DegenerateInputError):
            fn(zero, CFG, PROFILE, (0.1, 0.1), GRIDS)
        with pytest.raises(ParameterError):
            fn(np.ones((2, 2, 2)), CFG, PROFILE, (0.1, 0.1), GRIDS)


def _delay_rmse(fn, snr_db, trials=200):
    est, tru = [], []
    for i in range(trials):
        truth = draw_truth(CFG, GRIDS, 1000 + i)
        y = echo(truth, snr_db, 5000 + i)
        est.append(fn(y, CFG, PROFILE, (truth.phi_az, truth.phi_el), GRIDS).tau_hat)
        tru.append(truth.tau)
    return normalized_rmse(est, tru)


def test_hosvd_delay_rmse_at_20db():
    assert _delay_rmse(hosvd_estimate, 20.0) < 0.1


def test_baseline_delay_rmse_parity_at_minus_5db():
    h = _delay_rmse(hosvd_estimate, -5.0)
    b = _delay_rmse(baseline_estimate, -5.0)
    assert 0.5 <= b / h <= 2.0
