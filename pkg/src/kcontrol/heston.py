"""European call pricing under the Heston model.

The production pricer is a damped-Fourier-transform (Carr-Madan style) engine
driven by the Heston characteristic function; a full-truncation Euler Monte
Carlo simulator and the constant-volatility closed form serve as independent
checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline


class PricingConfigError(ValueError):
    """FFT grid settings cannot cover the requested strike."""


@dataclass(frozen=True)
class HestonParams:
    strike: float
    maturity: float          # years
    rate: float              # per-year, continuous compounding
    kappa: float             # variance mean-reversion speed
    theta: float             # variance mean-reversion level
    rho: float               # Brownian correlation
    sigma_v: float           # vol-of-vol
    v0: float                # initial variance
    spot: float = 100.0

    def __post_init__(self):
        for name in ("strike", "maturity", "sigma_v", "v0", "spot"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if abs(self.rho) > 1:
            raise ValueError("correlation must lie in [-1, 1]")
        if self.feller_violated:
            warnings.warn("Feller condition 2*kappa*theta >= sigma_v^2 violated",
                          RuntimeWarning, stacklevel=2)

    @property
    def feller_violated(self) -> bool:
        return 2.0 * self.kappa * self.theta < self.sigma_v**2


@dataclass(frozen=True)
class FftGrid:
    damping: float = 1.5
    nodes: int = 4096
    spacing: float = 0.25    # frequency step eta

    def __post_init__(self):
        if self.damping <= 0 or self.nodes < 8 or self.spacing <= 0:
            raise ValueError("damping, nodes and spacing must be positive")


def heston_char_function(u, p: HestonParams) -> np.ndarray:
    """Characteristic function of log S_T (risk-neutral, 'trap-free' form)."""
    u = np.asarray(u, dtype=complex)
    xi = p.kappa - 1j * p.rho * p.sigma_v * u
    s2 = p.sigma_v**2
    d = np.sqrt(xi**2 + s2 * (1j * u + u**2))
    # xi - d computed via the conjugate identity to avoid cancellation as
    # sigma_v -> 0, where xi and d agree to O(sigma_v^2)
    xmd = -s2 * (1j * u + u**2) / (xi + d)
    g = xmd / (xi + d)
    edt = np.exp(-d * p.maturity)
    log_term = np.log((1.0 - g * edt) / (1.0 - g))
    A = (1j * u * (math.log(p.spot) + p.rate * p.maturity)
         + p.kappa * p.theta / s2 * (xmd * p.maturity - 2.0 * log_term))
    B = xmd / s2 * (1.0 - edt) / (1.0 - g * edt)
    return np.exp(A + B * p.v0)


def black_scholes_call(spot, strike, maturity, rate, variance) -> float:
    """Constant-volatility closed form; the sigma_v -> 0 benchmark."""
    if variance <= 0:
        return max(spot - strike * math.exp(-rate * maturity), 0.0)
    sd = math.sqrt(variance * maturity)
    d1 = (math.log(spot / strike) + (rate + variance / 2.0) * maturity) / sd
    d2 = d1 - sd
    N = lambda x: 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
    return spot * N(d1) - strike * math.exp(-rate * maturity) * N(d2)


def heston_fft_price(p: HestonParams, grid: FftGrid = FftGrid()) -> float:
    """Damped-transform call price, cubic-spline interpolated in log strike."""
    alpha = grid.damping
    N = grid.nodes
    eta = grid.spacing
    lam = 2.0 * math.pi / (N * eta)   # log-strike spacing
    b = N * lam / 2.0                 # log-strike grid covers [-b, b)
    log_k = math.log(p.strike)
    if not (-b + lam <= log_k <= b - 2 * lam):
        raise PricingConfigError(
            f"log strike {log_k:.3f} outside FFT grid [-{b:.3f}, {b:.3f})")
    v = eta * np.arange(N)
    psi = (np.exp(-p.rate * p.maturity)
           * heston_char_function(v - (alpha + 1.0) * 1j, p)
           / (alpha**2 + alpha - v**2 + 1j * (2.0 * alpha + 1.0) * v))
    # Simpson weights tame the discretization error of the frequency integral
    simpson = (3.0 + (-1.0) ** (np.arange(N) + 1)) / 3.0
    simpson[0] = 1.0 / 3.0
    x = np.exp(1j * v * b) * psi * eta * simpson
    strikes_log = -b + lam * np.arange(N)
    calls = np.exp(-alpha * strikes_log) / math.pi * np.real(np.fft.fft(x))
    # interpolate on a local window around the requested strike
    j = int((log_k + b) / lam)
    lo, hi = max(j - 3, 0), min(j + 5, N)
    spline = CubicSpline(strikes_log[lo:hi], calls[lo:hi])
    return float(spline(log_k))


def heston_mc_price(p: HestonParams, paths: int, steps: int, seed: int,
                    chunk: int = 50_000):
    """Full-truncation Euler Monte Carlo: (price, standard error)."""
    if paths < 1 or steps < 1:
        raise ValueError("paths and steps must be >= 1")
    rng = np.random.default_rng(seed)
    dt = p.maturity / steps
    sqdt = math.sqrt(dt)
    disc = math.exp(-p.rate * p.maturity)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < paths:
        npath = min(chunk, paths - done)
        logs = np.full(npath, math.log(p.spot))
        v = np.full(npath, p.v0)
        for _ in range(steps):
            z1 = rng.standard_normal(npath)
            z2 = p.rho * z1 + math.sqrt(1.0 - p.rho**2) * rng.standard_normal(npath)
            vp = np.maximum(v, 0.0)
            logs += (p.rate - 0.5 * vp) * dt + np.sqrt(vp) * sqdt * z1
            v += p.kappa * (p.theta - vp) * dt + p.sigma_v * np.sqrt(vp) * sqdt * z2
        payoff = disc * np.maximum(np.exp(logs) - p.strike, 0.0)
        total += payoff.sum()
        total_sq += (payoff**2).sum()
        done += npath
    mean = total / paths
    var = max(total_sq / paths - mean**2, 0.0)
    return float(mean), float(math.sqrt(var / paths))
