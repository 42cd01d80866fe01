"""Monte-Carlo RMSE sweeps and the analytic flop model.

Each trial is keyed by a deterministic seed so trials can run in any order
(or in parallel) and still aggregate to identical reports. The target
draw depends only on ``(base_seed, trial_index)``, so different SNR and
block-size cells see the same targets and differ only in their noise.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IrsenseError, ParameterError
from .estimators import ESTIMATORS, Estimate, GridSpec
from .signal_model import (
    IrsProfile,
    SystemConfig,
    TargetTruth,
    add_awgn,
    gain_alpha,
    irs_dft_profile,
    synthesize_echo,
)

log = logging.getLogger(__name__)

PARAMETERS = ("tau", "nu", "theta_az", "theta_el")
_TRUTH_STREAM = 0
_NOISE_STREAM = 1


def normalized_rmse(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """``sqrt(mean(|x - x_hat|^2 / |x|^2))`` over trials."""
    estimates = [float(v) for v in estimates]
    truths = [float(v) for v in truths]
    if len(estimates) != len(truths) or not truths:
        raise ParameterError("estimates and truths must have equal nonzero length")
    if any(x == 0 for x in truths):
        raise ParameterError("normalized RMSE is undefined for a zero truth")
    return math.sqrt(math.fsum((x - xh) ** 2 / x**2 for xh, x in zip(estimates, truths)) / len(truths))


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sweep definition. ``system.q * system.l`` fixes the symbol budget M.

    ``grids=None`` selects :meth:`GridSpec.for_config` with the largest
    block size, which also bounds the drawn Doppler. Delay and Doppler are
    drawn from ``[truth_floor * max, max]`` of their grid spans; a floor of
    zero lets truths approach 0, where the normalized RMSE is dominated by
    single trials.
    """

    system: SystemConfig = field(default_factory=SystemConfig)
    trials: int = 200
    snr_grid_db: tuple[float, ...] = (0.0, 10.0, 20.0)
    q_values: tuple[int, ...] = (4, 8)
    base_seed: int = 0
    grids: GridSpec | None = None
    estimators: tuple[str, ...] = ("hosvd", "baseline")
    on_grid: bool = False
    truth_floor: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.truth_floor < 1.0:
            raise ParameterError(f"truth_floor must lie in [0, 1), got {self.truth_floor!r}")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "q_values", tuple(int(q) for q in self.q_values))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be a positive integer, got {self.trials!r}")
        if not self.snr_grid_db:
            raise ParameterError("snr_grid_db must not be empty")
        if not self.q_values:
            raise ParameterError("q_values must not be empty")
        m = self.system.m
        for q in self.q_values:
            if q < 1 or m % q:
                raise ParameterError(f"q_values entry {q} does not divide M = {m}")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ParameterError(f"unknown estimator {name!r}")
        if not self.estimators:
            raise ParameterError("estimators must not be empty")
        if self.base_seed < 0:
            raise ParameterError("base_seed must be nonnegative")

    @property
    def resolved_grids(self) -> GridSpec:
        if self.grids is not None:
            return self.grids
        return GridSpec.for_config(self.system, q_max=max(self.q_values))

    def system_for(self, q: int) -> SystemConfig:
        return self.system.replace(q=q, l=self.system.m // q)

    def profile_for(self, q: int) -> IrsProfile:
        cfg = self.system_for(q)
        return irs_dft_profile(cfg.n, cfg.l, cfg.q)

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "grids": self.resolved_grids.to_dict(),
            "trials": self.trials,
            "snr_grid_db": list(self.snr_grid_db),
            "q_values": list(self.q_values),
            "base_seed": self.base_seed,
            "estimators": list(self.estimators),
            "on_grid": self.on_grid,
            "truth_floor": self.truth_floor,
        }

    def config_hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _float_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def truth_seed(base_seed: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, trial_index, _TRUTH_STREAM])


def noise_seed(base_seed: int, snr_db: float, q: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, trial_index, q, _float_key(snr_db), _NOISE_STREAM])


def _nonzero_uniform(rng, low, high, name):
    x = rng.uniform(low, high)
    while x == 0:
        log.info("redrawing zero-valued %s", name)
        x = rng.uniform(low, high)
    return x


def draw_truth(
    cfg: SystemConfig, grids: GridSpec, rng_seed, on_grid: bool = False, floor: float = 0.0
) -> TargetTruth:
    """Random target: uniform angles in [0, pi/2], delay and Doppler within the grid span.

    Delay and Doppler are uniform on ``[floor * max, max]`` of the grid span.

    With ``on_grid`` the delay, Doppler and target angles are drawn among
    grid points, excluding the zero index (zero truth, and elevation 0
    where azimuth is unobservable).
    """
    rng = np.random.default_rng(rng_seed)
    half_pi = math.pi / 2
    phi_az = rng.uniform(0, half_pi)
    phi_el = rng.uniform(0, half_pi)
    if on_grid:
        tau = grids.tau_grid[rng.integers(1, grids.r_tau)] if grids.r_tau > 1 else grids.tau_grid[0]
        nu = grids.nu_grid[rng.integers(1, grids.r_nu)] if grids.r_nu > 1 else grids.nu_grid[0]
        theta_az = grids.az_grid[rng.integers(1, grids.r_az)] if grids.r_az > 1 else grids.az_grid[0]
        theta_el = grids.el_grid[rng.integers(1, grids.r_el)] if grids.r_el > 1 else grids.el_grid[0]
    else:
        tau = _nonzero_uniform(rng, floor * grids.tau_max, grids.tau_max, "tau")
        nu = _nonzero_uniform(rng, floor * grids.nu_max, grids.nu_max, "nu")
        theta_az = _nonzero_uniform(rng, 0, half_pi, "theta_az")
        theta_el = _nonzero_uniform(rng, 0, half_pi, "theta_el")
    alpha = gain_alpha(cfg, phi_el, theta_el, rng)
    return TargetTruth(
        tau=float(tau), nu=float(nu), theta_az=float(theta_az), theta_el=float(theta_el),
        phi_az=float(phi_az), phi_el=float(phi_el), alpha=alpha,
    )


@dataclass
class TrialResult:
    snr_db: float
    q: int
    trial_index: int
    truth: TargetTruth
    estimates: dict[str, Estimate]


def run_trial(mc: MonteCarloConfig, snr_db: float, q: int, trial_index: int) -> TrialResult:
    if q not in mc.q_values:
        raise ParameterError(f"q={q} is not one of {mc.q_values}")
    cfg = mc.system_for(q)
    grids = mc.resolved_grids
    profile = mc.profile_for(q)
    truth = draw_truth(cfg, grids, truth_seed(mc.base_seed, trial_index), on_grid=mc.on_grid, floor=mc.truth_floor)
    y = synthesize_echo(cfg, truth, profile)
    y, _ = add_awgn(y, snr_db, noise_seed(mc.base_seed, snr_db, q, trial_index))
    phi = (truth.phi_az, truth.phi_el)
    estimates = {name: ESTIMATORS[name](y, cfg, profile, phi, grids) for name in mc.estimators}
    return TrialResult(snr_db, q, trial_index, truth, estimates)


@dataclass(frozen=True)
class RmseCell:
    estimator: str
    parameter: str
    snr_db: float
    q: int
    trials: int
    rmse: float


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class RmseReport:
    """Normalized RMSE per (estimator, parameter, SNR, Q) plus provenance."""

    cells: list[RmseCell]
    config_hash: str
    seed: int
    config: dict = field(default_factory=dict, repr=False)

    def get(self, estimator: str, parameter: str, snr_db: float, q: int) -> float:
        for c in self.cells:
            if (c.estimator, c.parameter, c.snr_db, c.q) == (estimator, parameter, float(snr_db), q):
                return c.rmse
        raise KeyError((estimator, parameter, snr_db, q))

    def angle_rss(self, estimator: str, snr_db: float, q: int) -> float:
        """Root-sum-square of the azimuth and elevation RMSE."""
        return math.hypot(
            self.get(estimator, "theta_az", snr_db, q), self.get(estimator, "theta_el", snr_db, q)
        )

    def rows(self) -> list[dict]:
        """CSV rows: every cell, then a ``theta_rss`` row per (estimator, SNR, Q)."""
        out = [dataclasses.asdict(c) for c in self.cells]
        seen = []
        for c in self.cells:
            key = (c.estimator, c.snr_db, c.q)
            if c.parameter == "theta_az" and key not in seen:
                seen.append(key)
                out.append({
                    "estimator": c.estimator, "parameter": "theta_rss", "snr_db": c.snr_db,
                    "q": c.q, "trials": c.trials, "rmse": self.angle_rss(*key),
                })
        return out

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config_hash: {self.config_hash}\n# seed: {self.seed}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["estimator", "parameter", "snr_db", "q", "trials", "rmse"])
        for r in self.rows():
            writer.writerow([r["estimator"], r["parameter"], _fmt(r["snr_db"]), r["q"], r["trials"], _fmt(r["rmse"])])
        return buf.getvalue()

    def json_text(self) -> str:
        doc = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": self.config,
            "cells": [
                {**r, "snr_db": _fmt(r["snr_db"]) if math.isinf(r["snr_db"]) else r["snr_db"]}
                for r in self.rows()
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, output_dir, stem: str = "rmse") -> tuple[Path, Path]:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        csv_path = output_dir / f"{stem}.csv"
        json_path = output_dir / f"{stem}.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(self.json_text())
        return csv_path, json_path


class SweepError(IrsenseError):
    """A sweep aborted; ``partial`` holds the cells completed so far."""

    def __init__(self, message: str, partial: RmseReport):
        super().__init__(message)
        self.partial = partial


def _trial_errors(mc: MonteCarloConfig, snr_db: float, q: int, trial_index: int):
    res = run_trial(mc, snr_db, q, trial_index)
    t = res.truth
    truth = (t.tau, t.nu, t.theta_az, t.theta_el)
    est = {
        name: (e.tau_hat, e.nu_hat, e.theta_az_hat, e.theta_el_hat) for name, e in res.estimates.items()
    }
    return truth, est


def _run_cell(mc: MonteCarloConfig, snr_db: float, q: int, pool) -> list[RmseCell]:
    indices = range(mc.trials)
    if pool is None:
        results = [_trial_errors(mc, snr_db, q, i) for i in indices]
    else:
        n = mc.trials
        results = list(pool.map(_trial_errors, [mc] * n, [snr_db] * n, [q] * n, indices))
    truths = np.array([r[0] for r in results])
    cells = []
    for name in mc.estimators:
        est = np.array([r[1][name] for r in results])
        for p, param in enumerate(PARAMETERS):
            cells.append(RmseCell(name, param, snr_db, q, mc.trials, normalized_rmse(est[:, p], truths[:, p])))
    return cells


def run_sweep(mc: MonteCarloConfig, output_dir=None, workers: int = 1) -> RmseReport:
    """Evaluate every (estimator, parameter, SNR, Q) cell.

    Results are identical for any ``workers`` count. When ``output_dir`` is
    given the report is written there as ``rmse.csv`` and ``rmse.json``.
    """
    report = RmseReport([], mc.config_hash(), mc.base_seed, mc.to_dict())
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for q in mc.q_values:
            for snr_db in mc.snr_grid_db:
                try:
                    report.cells.extend(_run_cell(mc, snr_db, q, pool))
                except Exception as exc:
                    raise SweepError(f"sweep failed at snr={snr_db} dB, q={q}: {exc}", report) from exc
                log.info("finished snr=%s q=%s", snr_db, q)
    finally:
        if pool is not None:
            pool.shutdown()
    if output_dir is not None:
        report.write(output_dir)
    return report


# ---------------------------------------------------------------------------
# flop model


@dataclass(frozen=True)
class FlopReport:
    n_c: int
    q: int
    l: int  # noqa: E741
    r_tau: int
    r_nu: int
    r_theta: int
    baseline_breakdown: dict[str, int]
    proposed_breakdown: dict[str, int]

    @property
    def baseline_flops(self) -> int:
        return sum(self.baseline_breakdown.values())

    @property
    def proposed_flops(self) -> int:
        return sum(self.proposed_breakdown.values())

    @property
    def ratio(self) -> float:
        return self.baseline_flops / self.proposed_flops

    def to_dict(self) -> dict:
        return {
            "params": {"n_c": self.n_c, "q": self.q, "l": self.l,
                       "r_tau": self.r_tau, "r_nu": self.r_nu, "r_theta": self.r_theta},
            "baseline_flops": self.baseline_flops,
            "proposed_flops": self.proposed_flops,
            "ratio": self.ratio,
            "breakdown": {"baseline": dict(self.baseline_breakdown), "proposed": dict(self.proposed_breakdown)},
        }


def complexity_model(n_c: int, q: int, l: int, r_tau: int, r_nu: int, r_theta: int) -> FlopReport:  # noqa: E741
    """Flop counts of the coupled baseline and the HOSVD pipeline.

    Per candidate, a correlation against an ``n_c x q`` block costs
    ``2 n_c q + n_c - 1`` flops; an inner product of length ``n`` costs
    ``2 n - 1``; a rank-one SVD of an ``a x b`` unfolding costs ``a b``.
    """
    for name, v in {"n_c": n_c, "q": q, "l": l, "r_tau": r_tau, "r_nu": r_nu, "r_theta": r_theta}.items():
        if int(v) != v or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v!r}")
    block = 2 * n_c * q + n_c - 1
    baseline = {
        "delay_doppler_search": r_tau * r_nu * l * block,
        "angle_search": r_theta * block,
    }
    proposed = {
        "hosvd": 3 * n_c * q * l,
        "delay_search": r_tau * (2 * n_c - 1),
        "doppler_search": r_nu * (2 * q * l - 1),
        "angle_search": r_theta * block,
    }
    return FlopReport(n_c, q, l, r_tau, r_nu, r_theta, baseline, proposed)


_DEFAULT_COMPLEXITY = {"n_c": 16, "q": 8, "l": 8, "r_tau": 100, "r_nu": 100, "r_theta": 10_000}


def complexity_sweep(variable: str, values: Iterable[int], fixed: dict | None = None) -> list[FlopReport]:
    """Flop reports across ``n_c`` or ``grid_points`` (``r_tau = r_nu = r``, ``r_theta = r^2``)."""
    values = list(values)
    if not values:
        raise ParameterError("sweep range must not be empty")
    params = dict(_DEFAULT_COMPLEXITY)
    params.update(fixed or {})
    out = []
    for v in values:
        p = dict(params)
        if variable == "n_c":
            p["n_c"] = v
        elif variable == "grid_points":
            p.update(r_tau=v, r_nu=v, r_theta=v * v)
        else:
            raise ParameterError(f"unknown sweep variable {variable!r}; use 'n_c' or 'grid_points'")
        out.append(complexity_model(**p))
    return out


def complexity_csv(variable: str, reports: Sequence[FlopReport], header: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([variable, "baseline_flops", "proposed_flops", "ratio"])
    for r in reports:
        x = r.n_c if variable == "n_c" else r.r_tau
        writer.writerow([x, r.baseline_flops, r.proposed_flops, _fmt(r.ratio)])
    return buf.getvalue()
