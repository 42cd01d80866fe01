"""Target parameter estimators.

Two pipelines share the same grids and angle search:

* :func:`hosvd_estimate` fits a rank-one model to the echo tensor and runs
  independent 1-D searches on the delay and Doppler factors, followed by a
  2-D angle search.
* :func:`baseline_estimate` runs a coupled delay-Doppler grid search on the
  raw tensor (block-wise matched filter, noncoherently summed over blocks),
  followed by the same angle search.

All argmax reductions break ties toward the lowest flat index.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .signal_model import (
    IrsProfile,
    SystemConfig,
    delay_steering,
    doppler_l,
    doppler_q,
    ura_steering,
    ura_steering_table,
)
from .tensor import hosvd_rank1, unfold

# candidates whose signature energy is below this fraction of the largest are skipped
_NULL_SIGNATURE_RTOL = 1e-12
# scores within this relative spread count as a flat (non-identifiable) surface
_FLAT_SCORE_RTOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Uniform search grids.

    Delay covers ``[0, tau_max]`` with ``r_tau`` points, Doppler ``[0, nu_max]``
    with ``r_nu`` points, and the angle grid is the product of ``r_az``
    azimuth and ``r_el`` elevation points over ``[0, angle_max]``. Flat angle
    indices are elevation-major: ``index = i_el * r_az + i_az``.
    """

    tau_max: float
    nu_max: float
    r_tau: int = 100
    r_nu: int = 100
    r_az: int = 100
    r_el: int = 100
    angle_max: float = math.pi / 2

    def __post_init__(self):
        for name in ("r_tau", "r_nu", "r_az", "r_el"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("tau_max", "nu_max", "angle_max"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")

    @classmethod
    def for_config(cls, cfg: SystemConfig, q_max: int | None = None, **kw) -> "GridSpec":
        """Default grids: ``tau_max = 0.8/delta_f``, ``nu_max = 1/(2 q_max t_sym)``."""
        q_max = cfg.q if q_max is None else q_max
        kw.setdefault("tau_max", 0.8 / cfg.delta_f)
        kw.setdefault("nu_max", 1.0 / (2 * q_max * cfg.t_sym))
        return cls(**kw)

    @property
    def r_theta(self) -> int:
        return self.r_az * self.r_el

    @functools.cached_property
    def tau_grid(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.tau_max, self.r_tau))

    @functools.cached_property
    def nu_grid(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.nu_max, self.r_nu))

    @functools.cached_property
    def az_grid(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.angle_max, self.r_az))

    @functools.cached_property
    def el_grid(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.angle_max, self.r_el))

    @functools.cached_property
    def angle_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(az, el)`` candidate arrays of length ``r_theta``."""
        el, az = np.meshgrid(self.el_grid, self.az_grid, indexing="ij")
        return _frozen(az.ravel()), _frozen(el.ravel())

    def angle_index(self, i_az: int, i_el: int) -> int:
        return i_el * self.r_az + i_az

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ParameterError(f"unknown grid config key {key!r}")
        return cls(**data)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass
class Estimate:
    """Estimator output; angles in radians.

    ``g_hat`` is the data-derived block signature (HOSVD pipeline only),
    ``skipped_candidates`` counts angle candidates with a null signature and
    ``identifiable`` is False when the angle score surface is flat.
    """

    tau_hat: float
    nu_hat: float
    theta_az_hat: float
    theta_el_hat: float
    peak_values: dict[str, float]
    grid_indices: dict[str, int]
    skipped_candidates: int = 0
    identifiable: bool = True
    g_hat: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "tau_hat": self.tau_hat,
            "nu_hat": self.nu_hat,
            "theta_az_hat": self.theta_az_hat,
            "theta_el_hat": self.theta_el_hat,
            "peak_values": dict(self.peak_values),
            "grid_indices": dict(self.grid_indices),
            "skipped_candidates": self.skipped_candidates,
            "identifiable": self.identifiable,
        }
        if self.g_hat is not None:
            out["g_hat"] = [[float(v.real), float(v.imag)] for v in self.g_hat]
        return out


@dataclass(frozen=True)
class AngleResult:
    theta_az: float
    theta_el: float
    peak: float
    index: int
    skipped: int
    identifiable: bool


@functools.lru_cache(maxsize=32)
def _delay_table(grids: GridSpec, n_c: int, delta_f: float) -> np.ndarray:
    n = np.arange(n_c)
    return _frozen(np.exp(-2j * np.pi * delta_f * np.outer(grids.tau_grid, n)))


@functools.lru_cache(maxsize=32)
def _doppler_table(grids: GridSpec, q: int, t_sym: float) -> np.ndarray:
    k = np.arange(q)
    return _frozen(np.exp(2j * np.pi * t_sym * np.outer(grids.nu_grid, k)))


@functools.lru_cache(maxsize=8)
def _target_steering_table(grids: GridSpec, n_x, n_y, d_x, d_y, wavelength) -> np.ndarray:
    az, el = grids.angle_grid
    return _frozen(ura_steering_table(az, el, n_x, n_y, d_x, d_y, wavelength))


def model_signatures(grids: GridSpec, profile: IrsProfile, phi, cfg: SystemConfig) -> np.ndarray:
    """Block signatures ``g_L(theta)`` for every angle candidate, shape ``(R_theta, L)``."""
    if profile.n != cfg.n:
        raise ParameterError(f"profile has {profile.n} elements, config has {cfg.n}")
    geom = (cfg.n_x, cfg.n_y, cfg.d_x, cfg.d_y, cfg.wavelength)
    a_phi = ura_steering(phi[0], phi[1], *geom)
    b = _target_steering_table(grids, *geom) * a_phi
    return (b @ profile.w_l) ** 2


def delay_peak_search(c_hat, grids: GridSpec, cfg: SystemConfig) -> tuple[float, float, int]:
    """Matched-filter delay search on a frequency-domain factor."""
    c_hat = np.asarray(c_hat)
    if c_hat.shape != (cfg.n_c,):
        raise ParameterError(f"c_hat must have length n_c={cfg.n_c}, got shape {c_hat.shape}")
    table = _delay_table(grids, cfg.n_c, cfg.delta_f)
    score = np.abs(table.conj() @ c_hat) ** 2 / np.vdot(c_hat, c_hat).real
    i = int(np.argmax(score))
    return float(grids.tau_grid[i]), float(score[i]), i


def doppler_peak_search(d_hat, grids: GridSpec, cfg: SystemConfig) -> tuple[float, float, int]:
    """Matched-filter Doppler search on a within-block slow-time factor."""
    d_hat = np.asarray(d_hat)
    if d_hat.shape != (cfg.q,):
        raise ParameterError(f"d_hat must have length q={cfg.q}, got shape {d_hat.shape}")
    table = _doppler_table(grids, cfg.q, cfg.t_sym)
    score = np.abs(table.conj() @ d_hat) ** 2 / np.vdot(d_hat, d_hat).real
    i = int(np.argmax(score))
    return float(grids.nu_grid[i]), float(score[i]), i


def derive_g_from_beta(beta_hat, nu_hat: float, cfg: SystemConfig) -> np.ndarray:
    """Strip the block-rate Doppler from the third factor."""
    beta_hat = np.asarray(beta_hat)
    if beta_hat.shape != (cfg.l,):
        raise ParameterError(f"beta_hat must have length l={cfg.l}, got shape {beta_hat.shape}")
    return beta_hat * np.conj(doppler_l(nu_hat, cfg))


def _argmax_signature(numer: np.ndarray, g: np.ndarray, grids: GridSpec) -> AngleResult:
    energy = np.sum(np.abs(g) ** 2, axis=1)
    valid = energy > _NULL_SIGNATURE_RTOL * energy.max() if energy.max() > 0 else np.zeros_like(energy, bool)
    skipped = int(np.count_nonzero(~valid))
    score = np.full(energy.shape, -np.inf)
    score[valid] = numer[valid] / energy[valid]
    if skipped == score.size:
        raise DegenerateInputError("every angle candidate has a null signature")
    i = int(np.argmax(score))
    finite = score[valid]
    top = finite.max()
    identifiable = bool(top - finite.min() > _FLAT_SCORE_RTOL * abs(top))
    az, el = grids.angle_grid
    return AngleResult(float(az[i]), float(el[i]), float(score[i]), i, skipped, identifiable)


def angle_search(y, tau_hat, nu_hat, profile: IrsProfile, phi, grids: GridSpec, cfg: SystemConfig) -> AngleResult:
    """Angle search given delay and Doppler estimates.

    For each candidate the model signature ``g_L(theta)`` (built from the IRS
    profile and the known BS-IRS angles ``phi``) is correlated with the echo
    after delay and Doppler matching, normalized by ``||g_L(theta)||^2``.
    """
    y = np.asarray(y)
    if y.shape != (cfg.n_c, cfg.q, cfg.l):
        raise ParameterError(f"echo shape {y.shape} does not match (n_c, q, l)")
    c = delay_steering(tau_hat, cfg.n_c, cfg.delta_f)
    r = (c.conj() @ unfold(y, 1)).reshape(cfg.l, cfg.q)
    z = (r @ doppler_q(nu_hat, cfg).conj()) * doppler_l(nu_hat, cfg).conj()
    g = model_signatures(grids, profile, phi, cfg)
    return _argmax_signature(np.abs(g.conj() @ z) ** 2, g, grids)


def angle_search_from_signature(g_hat, profile: IrsProfile, phi, grids: GridSpec, cfg: SystemConfig) -> AngleResult:
    """Angle search that matches a data-derived block signature against the model."""
    g_hat = np.asarray(g_hat)
    g = model_signatures(grids, profile, phi, cfg)
    return _argmax_signature(np.abs(g.conj() @ g_hat) ** 2, g, grids)


def _check_echo(y, cfg: SystemConfig) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    if y.shape != (cfg.n_c, cfg.q, cfg.l):
        raise ParameterError(f"echo shape {y.shape} does not match (n_c, q, l) = {(cfg.n_c, cfg.q, cfg.l)}")
    if not np.any(y):
        raise DegenerateInputError("echo tensor is identically zero")
    return y


def _build_estimate(tau, nu, angle: AngleResult, peaks, indices, g_hat=None) -> Estimate:
    peaks = dict(peaks, angle=angle.peak)
    indices = dict(indices, angle=angle.index)
    return Estimate(
        tau_hat=tau,
        nu_hat=nu,
        theta_az_hat=angle.theta_az,
        theta_el_hat=angle.theta_el,
        peak_values=peaks,
        grid_indices=indices,
        skipped_candidates=angle.skipped,
        identifiable=angle.identifiable,
        g_hat=g_hat,
    )


def hosvd_estimate(
    y,
    cfg: SystemConfig,
    profile: IrsProfile,
    phi,
    grids: GridSpec,
    angle_source: Literal["model", "factor"] = "model",
) -> Estimate:
    """Decoupled estimator: rank-one HOSVD, then three independent peak searches.

    ``angle_source="factor"`` matches the data-derived signature (third
    factor with Doppler removed) instead of correlating the full echo.
    """
    y = _check_echo(y, cfg)
    profile.check_matches(cfg)
    c_hat, d_hat, beta_hat = hosvd_rank1(y)
    tau, p_tau, i_tau = delay_peak_search(c_hat, grids, cfg)
    nu, p_nu, i_nu = doppler_peak_search(d_hat, grids, cfg)
    g_hat = derive_g_from_beta(beta_hat, nu, cfg)
    if angle_source == "model":
        angle = angle_search(y, tau, nu, profile, phi, grids, cfg)
    elif angle_source == "factor":
        angle = angle_search_from_signature(g_hat, profile, phi, grids, cfg)
    else:
        raise ParameterError(f"angle_source must be 'model' or 'factor', got {angle_source!r}")
    return _build_estimate(
        tau, nu, angle, {"delay": p_tau, "doppler": p_nu}, {"delay": i_tau, "doppler": i_nu}, g_hat
    )


def baseline_scores(y, grids: GridSpec, cfg: SystemConfig) -> np.ndarray:
    """Coupled delay-Doppler statistic ``sum_l |c(tau)^H Y_l d_Q(nu)^*|^2``, shape ``(R_tau, R_nu)``."""
    ct = _delay_table(grids, cfg.n_c, cfg.delta_f)
    dq = _doppler_table(grids, cfg.q, cfg.t_sym)
    # contract subcarriers first, then within-block symbols, per block
    per_tau = np.einsum("rn,nql->rql", ct.conj(), y)
    per_cell = np.einsum("rql,vq->rvl", per_tau, dq.conj())
    return np.sum(np.abs(per_cell) ** 2, axis=2)


def baseline_estimate(y, cfg: SystemConfig, profile: IrsProfile, phi, grids: GridSpec) -> Estimate:
    """Coupled estimator: joint delay-Doppler grid search, then the angle search."""
    y = _check_echo(y, cfg)
    profile.check_matches(cfg)
    score = baseline_scores(y, grids, cfg)
    flat = int(np.argmax(score))
    i_tau, i_nu = divmod(flat, grids.r_nu)
    tau = float(grids.tau_grid[i_tau])
    nu = float(grids.nu_grid[i_nu])
    angle = angle_search(y, tau, nu, profile, phi, grids, cfg)
    return _build_estimate(
        tau, nu, angle, {"delay_doppler": float(score[i_tau, i_nu])}, {"delay": i_tau, "doppler": i_nu}
    )


ESTIMATORS = {"hosvd": hosvd_estimate, "baseline": baseline_estimate}
