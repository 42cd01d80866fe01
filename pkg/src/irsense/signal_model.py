"""Echo synthesis for IRS-assisted monostatic OFDM sensing.

The BS transmits through an IRS of ``n_x * n_y`` elements to a single target
and receives the echo over the same path. With a block-repetition IRS
profile (each of ``l`` phase patterns held for ``q`` symbols) the noiseless
echo is the rank-one tensor ``c(tau) o d_Q(nu) o beta`` of shape
``(n_c, q, l)``, with ``beta = alpha * (g_L(theta) * d_L(nu))``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .tensor import outer3

SPEED_OF_LIGHT = 299_792_458.0
_UNIT_MODULUS_TOL = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Physical and waveform constants (SI units).

    ``wavelength``, ``t_sym``, ``d_x`` and ``d_y`` are derived when left as
    ``None``: ``c / carrier_freq``, ``1 / delta_f`` and half a wavelength.
    """

    n_x: int = 4
    n_y: int = 4
    d_x: float | None = None
    d_y: float | None = None
    carrier_freq: float = 28e9
    wavelength: float | None = None
    delta_f: float = 120e3
    t_sym: float | None = None
    n_c: int = 16
    q: int = 8
    l: int = 8  # noqa: E741
    p_t: float = 1.0
    g1: float = 1.0
    g2: float = 1.0
    d1: float = 10.0
    d2: float = 5.0
    sigma_rcs: float = 2.0
    radiation_exponent: float = 0.0

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_c", "q", "l"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("carrier_freq", "delta_f", "p_t", "g1", "g2", "d1", "d2", "sigma_rcs"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.radiation_exponent < 0:
            raise ParameterError("radiation_exponent must be nonnegative")

        lam = SPEED_OF_LIGHT / self.carrier_freq
        if self.wavelength is None:
            object.__setattr__(self, "wavelength", lam)
        elif abs(self.wavelength - lam) > 1e-9 * lam:
            raise ParameterError(
                f"wavelength {self.wavelength!r} inconsistent with carrier_freq (expected {lam!r})"
            )
        t_sym = 1.0 / self.delta_f
        if self.t_sym is None:
            object.__setattr__(self, "t_sym", t_sym)
        elif abs(self.t_sym - t_sym) > 1e-9 * t_sym:
            raise ParameterError(f"t_sym must equal 1/delta_f = {t_sym!r}, got {self.t_sym!r}")
        for name in ("d_x", "d_y"):
            value = getattr(self, name)
            if value is None:
                object.__setattr__(self, name, self.wavelength / 2)
            elif not value > 0:
                raise ParameterError(f"{name} must be positive, got {value!r}")

    @property
    def n(self) -> int:
        """Number of IRS elements."""
        return self.n_x * self.n_y

    @property
    def m(self) -> int:
        """Total number of OFDM symbols, ``q * l``."""
        return self.q * self.l

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ParameterError(f"unknown system config key {key!r}")
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TargetTruth:
    """Ground-truth target parameters; angles in radians."""

    tau: float
    nu: float
    theta_az: float
    theta_el: float
    phi_az: float
    phi_el: float
    alpha: complex = 1.0

    def __post_init__(self):
        if self.alpha == 0:
            raise ParameterError("alpha must be nonzero")
        for name in ("theta_az", "theta_el", "phi_az", "phi_el"):
            value = getattr(self, name)
            if not 0.0 <= value <= math.pi / 2:
                raise ParameterError(f"{name} must lie in [0, pi/2], got {value!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        alpha = complex(self.alpha)
        d["alpha"] = [alpha.real, alpha.imag]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TargetTruth":
        data = dict(data)
        alpha = data.pop("alpha", 1.0)
        if isinstance(alpha, (list, tuple)):
            alpha = complex(alpha[0], alpha[1])
        return cls(alpha=complex(alpha), **data)


@dataclass(frozen=True)
class IrsProfile:
    """One phase-shift column per block; each column is held for ``q`` symbols."""

    w_l: np.ndarray
    q: int

    def __post_init__(self):
        w = np.array(self.w_l, dtype=complex)
        if w.ndim != 2 or 0 in w.shape:
            raise ParameterError(f"w_l must be a nonempty N x L matrix, got shape {w.shape}")
        if np.max(np.abs(np.abs(w) - 1.0)) > _UNIT_MODULUS_TOL:
            raise ParameterError("IRS phase shifts must have unit modulus")
        if int(self.q) != self.q or self.q < 1:
            raise ParameterError(f"q must be a positive integer, got {self.q!r}")
        w.flags.writeable = False
        object.__setattr__(self, "w_l", w)
        object.__setattr__(self, "q", int(self.q))

    @property
    def n(self) -> int:
        return self.w_l.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.w_l.shape[1]

    @property
    def expanded(self) -> np.ndarray:
        """Per-symbol phase matrix ``W = w_l kron 1_q^T`` of shape ``N x q*l``."""
        return np.kron(self.w_l, np.ones((1, self.q)))

    def check_matches(self, cfg: SystemConfig) -> None:
        if (self.n, self.l, self.q) != (cfg.n, cfg.l, cfg.q):
            raise ParameterError(
                f"IRS profile (N={self.n}, L={self.l}, Q={self.q}) does not match "
                f"config (N={cfg.n}, L={cfg.l}, Q={cfg.q})"
            )


def ura_steering(az, el, n_x, n_y, d_x, d_y, wavelength) -> np.ndarray:
    """URA response ``h kron v`` (horizontal factor first)."""
    if n_x < 1 or n_y < 1:
        raise ParameterError("array dimensions must be positive")
    mx = np.arange(n_x)
    ny = np.arange(n_y)
    h = np.exp(2j * np.pi * (d_x / wavelength) * mx * math.sin(el) * math.cos(az))
    v = np.exp(2j * np.pi * (d_y / wavelength) * ny * math.cos(el))
    return np.kron(h, v)


def ura_steering_table(az, el, n_x, n_y, d_x, d_y, wavelength) -> np.ndarray:
    """Vectorized :func:`ura_steering` for paired angle arrays, shape ``(R, n_x*n_y)``."""
    az = np.asarray(az, dtype=float).ravel()
    el = np.asarray(el, dtype=float).ravel()
    mx = np.arange(n_x)
    ny = np.arange(n_y)
    h = np.exp(2j * np.pi * (d_x / wavelength) * np.outer(np.sin(el) * np.cos(az), mx))
    v = np.exp(2j * np.pi * (d_y / wavelength) * np.outer(np.cos(el), ny))
    return (h[:, :, None] * v[:, None, :]).reshape(az.size, n_x * n_y)


def delay_steering(tau, n_c, delta_f) -> np.ndarray:
    """Frequency-domain signature ``exp(-j 2 pi n delta_f tau)``, n = 0..n_c-1."""
    if n_c < 1:
        raise ParameterError("n_c must be positive")
    return np.exp(-2j * np.pi * np.arange(n_c) * delta_f * tau)


def doppler_steering(nu, length, step) -> np.ndarray:
    """Slow-time signature ``exp(j 2 pi nu k step)``, k = 0..length-1."""
    if length < 1:
        raise ParameterError("length must be positive")
    if not step > 0:
        raise ParameterError("step must be positive")
    return np.exp(2j * np.pi * nu * np.arange(length) * step)


def doppler_q(nu, cfg: SystemConfig) -> np.ndarray:
    """Within-block Doppler vector (length ``q``, step ``t_sym``)."""
    return doppler_steering(nu, cfg.q, cfg.t_sym)


def doppler_l(nu, cfg: SystemConfig) -> np.ndarray:
    """Block-rate Doppler vector (length ``l``, step ``q * t_sym``)."""
    return doppler_steering(nu, cfg.l, cfg.q * cfg.t_sym)


def irs_dft_profile(n: int, l: int, q: int = 1) -> IrsProfile:  # noqa: E741
    """First ``l`` columns of the size-``n`` DFT matrix."""
    if l > n:
        raise ParameterError(f"cannot truncate a size-{n} DFT to {l} columns")
    if l < 1:
        raise ParameterError("l must be positive")
    p = np.arange(n)[:, None]
    k = np.arange(l)[None, :]
    return IrsProfile(np.exp(-2j * np.pi * p * k / n), q)


def gain_magnitude(cfg: SystemConfig, phi_el: float, theta_el: float) -> float:
    """Radar-equation magnitude of the round-trip complex gain."""
    f1 = math.cos(phi_el) ** cfg.radiation_exponent
    f2 = math.cos(theta_el) ** cfg.radiation_exponent
    num = (
        cfg.p_t * cfg.g1**2 * cfg.g2**2 * f1 * f2
        * cfg.d_x**2 * cfg.d_y**2 * cfg.wavelength**2 * cfg.sigma_rcs
    )
    den = (4 * math.pi) ** 5 * cfg.d1**4 * cfg.d2**4
    return math.sqrt(num / den)


def gain_alpha(cfg: SystemConfig, phi_el: float, theta_el: float, rng_seed=None) -> complex:
    """Complex gain with radar-equation magnitude and a uniformly drawn phase."""
    rng = np.random.default_rng(rng_seed)
    phase = rng.uniform(0.0, 2 * math.pi)
    return gain_magnitude(cfg, phi_el, theta_el) * complex(math.cos(phase), math.sin(phase))


def irs_response(theta_az, theta_el, phi_az, phi_el, cfg: SystemConfig) -> np.ndarray:
    """Combined BS-IRS-target response ``b = a(phi) * p(theta)``."""
    geom = (cfg.n_x, cfg.n_y, cfg.d_x, cfg.d_y, cfg.wavelength)
    return ura_steering(phi_az, phi_el, *geom) * ura_steering(theta_az, theta_el, *geom)


def g_l_signature(theta_az, theta_el, phi_az, phi_el, profile: IrsProfile, cfg: SystemConfig) -> np.ndarray:
    """Per-block angular signature ``(b^T w_l)^2``, length ``L``."""
    if profile.n != cfg.n:
        raise ParameterError(f"profile has {profile.n} elements, config has {cfg.n}")
    b = irs_response(theta_az, theta_el, phi_az, phi_el, cfg)
    return (b @ profile.w_l) ** 2


def synthesize_echo(cfg: SystemConfig, truth: TargetTruth, profile: IrsProfile) -> np.ndarray:
    """Noiseless echo tensor of shape ``(n_c, q, l)``."""
    profile.check_matches(cfg)
    c = delay_steering(truth.tau, cfg.n_c, cfg.delta_f)
    d_q = doppler_q(truth.nu, cfg)
    g_l = g_l_signature(truth.theta_az, truth.theta_el, truth.phi_az, truth.phi_el, profile, cfg)
    beta = complex(truth.alpha) * g_l * doppler_l(truth.nu, cfg)
    return outer3(c, d_q, beta)


def add_awgn(t, snr_db: float, rng_seed=None) -> tuple[np.ndarray, float]:
    """Add circular complex Gaussian noise at the requested SNR.

    SNR is the tensor energy over the expected noise energy, so the
    per-entry variance is ``||t||_F^2 / (10^(snr_db/10) * t.size)``.
    Returns the noisy tensor and that variance; ``snr_db = inf`` is a no-op.
    """
    t = np.asarray(t, dtype=complex)
    if math.isinf(snr_db) and snr_db > 0:
        return t.copy(), 0.0
    energy = float(np.vdot(t, t).real)
    if energy == 0:
        raise DegenerateInputError("cannot calibrate noise for an all-zero signal")
    sigma2 = energy / (10 ** (snr_db / 10) * t.size)
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(t.shape + (2,)) @ np.array([1, 1j])
    return t + math.sqrt(sigma2 / 2) * noise, sigma2
