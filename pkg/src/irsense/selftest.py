"""Quick invariant checks runnable from the command line (``irsense selftest``)."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import signal_model as sm
from .estimators import GridSpec, baseline_estimate, hosvd_estimate
from .experiments import draw_truth
from .tensor import fold, kron_vec, outer3, unfold

TOL = 1e-12


def _cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def check_unfold_bijective(rng, n):
    for _ in range(n):
        shape = tuple(int(s) for s in rng.integers(1, 6, size=3))
        t = _cvec(rng, np.prod(shape)).reshape(shape)
        for mode in (1, 2, 3):
            if not np.array_equal(fold(unfold(t, mode), mode, shape), t):
                return False
    return True


def check_norm_preserved(rng, n):
    for _ in range(n):
        shape = tuple(int(s) for s in rng.integers(1, 6, size=3))
        t = _cvec(rng, np.prod(shape)).reshape(shape)
        ref = np.linalg.norm(t.ravel())
        if any(abs(np.linalg.norm(unfold(t, m)) - ref) > TOL * ref for m in (1, 2, 3)):
            return False
    return True


def check_rank_one_unfoldings(rng, n):
    for _ in range(n):
        a, b, c = (_cvec(rng, int(k)) for k in rng.integers(1, 6, size=3))
        t = outer3(a, b, c)
        pairs = [
            (unfold(t, 1), np.outer(a, np.kron(c, b))),
            (unfold(t, 2), np.outer(b, np.kron(c, a))),
            (unfold(t, 3), np.outer(c, np.kron(b, a))),
        ]
        if any(_rel(x, y) > TOL for x, y in pairs):
            return False
    return True


def check_mixed_product(rng, n):
    for _ in range(n):
        na, nc = (int(k) for k in rng.integers(1, 6, size=2))
        a, b = _cvec(rng, na), _cvec(rng, na)
        c, d = _cvec(rng, nc), _cvec(rng, nc)
        if _rel(kron_vec(a, c) * kron_vec(b, d), kron_vec(a * b, c * d)) > TOL:
            return False
    return True


def check_doppler_factorization(rng, n):
    for _ in range(n):
        q, l = (int(k) for k in rng.integers(1, 9, size=2))
        ts = 1 / 120e3
        nu = rng.uniform(-1 / (2 * ts), 1 / (2 * ts))
        full = sm.doppler_steering(nu, q * l, ts)
        split = kron_vec(sm.doppler_steering(nu, l, q * ts), sm.doppler_steering(nu, q, ts))
        if _rel(split, full) > TOL:
            return False
    return True


def check_repetition_identity(rng, n):
    for _ in range(n):
        n_x, n_y, q = (int(k) for k in rng.integers(1, 5, size=3))
        cfg = sm.SystemConfig(n_x=n_x, n_y=n_y, q=q, l=int(rng.integers(1, n_x * n_y + 1)))
        profile = sm.IrsProfile(np.exp(1j * rng.uniform(0, 2 * np.pi, (cfg.n, cfg.l))), q)
        ang = rng.uniform(0, np.pi / 2, 4)
        b = sm.irs_response(*ang, cfg)
        bw = b @ profile.expanded
        g_l = sm.g_l_signature(*ang, profile, cfg)
        if _rel(bw * bw, kron_vec(g_l, np.ones(q))) > TOL:
            return False
    return True


def check_echo_model(rng, n):
    for _ in range(n):
        cfg = sm.SystemConfig(n_x=2, n_y=3, n_c=5, q=3, l=4)
        profile = sm.irs_dft_profile(cfg.n, cfg.l, cfg.q)
        truth = sm.TargetTruth(
            tau=rng.uniform(0, 1 / cfg.delta_f), nu=rng.uniform(0, 2e3),
            theta_az=rng.uniform(0, np.pi / 2), theta_el=rng.uniform(0, np.pi / 2),
            phi_az=rng.uniform(0, np.pi / 2), phi_el=rng.uniform(0, np.pi / 2),
            alpha=complex(*rng.standard_normal(2)),
        )
        y = unfold(sm.synthesize_echo(cfg, truth, profile), 1)
        b = sm.irs_response(truth.theta_az, truth.theta_el, truth.phi_az, truth.phi_el, cfg)
        w = profile.expanded
        ref = np.empty_like(y)
        for nc in range(cfg.n_c):
            for m in range(cfg.m):
                ref[nc, m] = (
                    truth.alpha * (b @ w[:, m]) ** 2
                    * np.exp(-2j * np.pi * nc * cfg.delta_f * truth.tau)
                    * np.exp(2j * np.pi * truth.nu * m * cfg.t_sym)
                )
        if _rel(y, ref) > TOL:
            return False
    return True


def check_noiseless_recovery(rng, n):
    cfg = sm.SystemConfig()
    grids = GridSpec.for_config(cfg, r_tau=40, r_nu=40, r_az=30, r_el=30)
    profile = sm.irs_dft_profile(cfg.n, cfg.l, cfg.q)
    for _ in range(n):
        truth = draw_truth(cfg, grids, rng, on_grid=True)
        y = sm.synthesize_echo(cfg, truth, profile)
        phi = (truth.phi_az, truth.phi_el)
        for est in (hosvd_estimate(y, cfg, profile, phi, grids), baseline_estimate(y, cfg, profile, phi, grids)):
            got = (est.tau_hat, est.nu_hat, est.theta_az_hat, est.theta_el_hat)
            want = (truth.tau, truth.nu, truth.theta_az, truth.theta_el)
            if got != want:
                return False
    return True


CHECKS: dict[str, tuple[Callable, int]] = {
    "unfold/fold bijectivity": (check_unfold_bijective, 200),
    "Frobenius norm preservation": (check_norm_preserved, 200),
    "rank-one unfolding identities": (check_rank_one_unfoldings, 200),
    "mixed Kronecker/Hadamard product": (check_mixed_product, 200),
    "d = d_L kron d_Q": (check_doppler_factorization, 200),
    "block repetition identity": (check_repetition_identity, 200),
    "tensor echo vs per-sample model": (check_echo_model, 10),
    "noiseless on-grid recovery": (check_noiseless_recovery, 5),
}


def run_all(seed: int = 0, echo=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, (fn, n) in CHECKS.items():
        ok = bool(fn(rng, n))
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name} ({n} instances)")
    return ok_all


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(0 if run_all() else 1)
