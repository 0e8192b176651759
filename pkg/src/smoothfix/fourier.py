"""Fourier diagnostics of a sample pool.

The frequency pairing is <xi, z> = Re(xi) Re(z) + Im(xi) Im(z), and the
empirical characteristic function is phi_hat(xi) = (1/n) sum_k
exp(-i <xi, z_k>).  Wirtinger derivatives of phi at xi are estimated by
the sample means of -(i/2) conj(Z) e^{-i<xi,Z>} (d/d xi) and
-(i/2) Z e^{-i<xi,Z>} (d/d conj(xi)); the second conj-derivative uses the
squared prefactor (-(i/2) Z)^2.

Everything user-facing runs in float64.  The one exception is the inner
product-of-ECF loop of fixed_point_residual, which evaluates millions of
frequencies: its phases are computed in float32 (absolute phase error
around 1e-5, far below the 1/sqrt(n) noise of the pools it is used on)
and accumulated in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import DOMAIN_FOURIER, philox


class InsufficientSignalError(RuntimeError):
    """Too few scan radii rise above the noise floor to fit a decay slope."""


@dataclass(frozen=True)
class EcfValue:
    xi: complex
    value: complex
    stderr: float


@dataclass(frozen=True)
class RadialScan:
    radii: np.ndarray
    values: np.ndarray  # per-radius max of |phi_hat| over the angle grid
    n_angles: int


@dataclass(frozen=True)
class PolarGrid:
    """Statistic values on the full (radius x angle) grid."""

    radii: np.ndarray
    angles: np.ndarray
    values: np.ndarray  # complex, shape (n_radii, n_angles)
    stderrs: np.ndarray  # shape (n_radii, n_angles)
    order: int


@dataclass(frozen=True)
class DecayScan:
    radii: np.ndarray
    values: np.ndarray  # per-radius max modulus
    stderrs: np.ndarray  # stderr at the maximizing angle
    floors: np.ndarray  # 3x the per-point Monte Carlo stderr
    kept: np.ndarray  # radii entering the slope fit
    slope: float
    n_angles: int
    order: int


def _samples(pool_or_samples) -> np.ndarray:
    z = getattr(pool_or_samples, "samples", pool_or_samples)
    z = np.asarray(z, dtype=np.complex128)
    if z.ndim != 1 or z.shape[0] < 1:
        raise ValueError("need a one-dimensional, nonempty sample array")
    return z


def _prefactor(z: np.ndarray, order: int, which: str = "d_xibar") -> np.ndarray | None:
    if order == 0:
        return None
    if order == 1:
        return -0.5j * (np.conj(z) if which == "d_xi" else z)
    if order == 2:
        return -0.25 * z * z
    raise ValueError(f"order must be 0, 1, or 2, got {order}")


def _statistic_many(z: np.ndarray, xis: np.ndarray, prefac: np.ndarray | None,
                    chunk: int = 1 << 14) -> tuple[np.ndarray, np.ndarray]:
    """Mean and stderr of prefac * e^{-i<xi,z>} over z, per frequency (float64)."""
    n = z.shape[0]
    xr = xis.real.copy()
    xy = xis.imag.copy()
    zx = z.real
    zy = z.imag
    p = xis.shape[0]
    s_sum = np.zeros(p, dtype=np.complex128)
    r2 = np.zeros(p)
    i2 = np.zeros(p)
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        ph = np.multiply.outer(xr, zx[a:b])
        ph += np.multiply.outer(xy, zy[a:b])
        e = np.cos(ph) - 1j * np.sin(ph)
        if prefac is not None:
            e *= prefac[a:b]
        s_sum += e.sum(axis=1)
        r2 += np.square(e.real).sum(axis=1)
        i2 += np.square(e.imag).sum(axis=1)
    means = s_sum / n
    if n > 1:
        var_re = np.maximum(r2 - n * means.real**2, 0.0) / (n - 1)
        var_im = np.maximum(i2 - n * means.imag**2, 0.0) / (n - 1)
        stderrs = np.sqrt((var_re + var_im) / n)
    else:
        stderrs = np.zeros(p)
    return means, stderrs


def ecf(pool, xi: complex) -> EcfValue:
    """Empirical characteristic function at one frequency."""
    z = _samples(pool)
    values, stderrs = _statistic_many(z, np.array([complex(xi)]), None)
    return EcfValue(complex(xi), complex(values[0]), float(stderrs[0]))


def wirtinger_derivative(pool, xi: complex, which: str = "d_xibar") -> EcfValue:
    """Estimate a first Wirtinger derivative of phi at xi ("d_xi" or "d_xibar")."""
    if which not in ("d_xi", "d_xibar"):
        raise ValueError(f'which must be "d_xi" or "d_xibar", got {which!r}')
    z = _samples(pool)
    values, stderrs = _statistic_many(z, np.array([complex(xi)]), _prefactor(z, 1, which))
    return EcfValue(complex(xi), complex(values[0]), float(stderrs[0]))


def _ecf_batch_f32(z: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """ECF at many frequencies: float32 phases, float64 accumulation."""
    zx = z.real.astype(np.float32)
    zy = z.imag.astype(np.float32)
    fr = freqs.real.astype(np.float32)
    fi = freqs.imag.astype(np.float32)
    n = z.shape[0]
    out = np.empty(freqs.shape[0], dtype=np.complex128)
    fchunk, schunk = 1024, 1 << 14
    for a in range(0, freqs.shape[0], fchunk):
        b = min(a + fchunk, freqs.shape[0])
        cs = np.zeros(b - a)
        ss = np.zeros(b - a)
        for s0 in range(0, n, schunk):
            s1 = min(s0 + schunk, n)
            ph = np.multiply.outer(fr[a:b], zx[s0:s1])
            ph += np.multiply.outer(fi[a:b], zy[s0:s1])
            cs += np.cos(ph).sum(axis=1, dtype=np.float64)
            ss += np.sin(ph).sum(axis=1, dtype=np.float64)
        out[a:b] = (cs - 1j * ss) / n
    return out


def fixed_point_residual(pool, model, xi: complex, M: int = 1000, rng=None) -> float:
    """|phi_hat(xi) - E_hat prod_j phi_hat(conj(T_j) xi)| over M fresh weight draws."""
    if M < 100:
        raise ValueError(f"at least 100 weight draws required, got {M}")
    if isinstance(rng, (int, np.integer)):
        rng = philox(int(rng), DOMAIN_FOURIER, 0)
    if not isinstance(rng, np.random.Generator):
        raise ValueError("fixed_point_residual needs an rng or integer seed")
    z = _samples(pool)
    xi = complex(xi)
    values, counts = model.draw_batch(rng, M)
    inner = _ecf_batch_f32(z, np.conj(values) * xi)
    c0 = int(counts[0])
    if (counts == c0).all():
        products = inner.reshape(M, c0).prod(axis=1)
    else:
        offsets = np.concatenate(([0], np.cumsum(counts[:-1])))
        products = np.multiply.reduceat(inner, offsets)
    lhs = ecf(z, xi).value
    return float(abs(lhs - complex(products.mean())))


def _check_radii(radii) -> np.ndarray:
    r = np.asarray(radii, dtype=np.float64)
    if r.ndim != 1 or r.shape[0] < 1:
        raise ValueError("radii must be a nonempty 1-d sequence")
    if not (r > 0).all():
        raise ValueError("radii must be positive")
    if not (np.diff(r) > 0).all():
        raise ValueError("radii must be strictly increasing")
    return r


def polar_grid(pool, radii, n_angles: int = 16, order: int = 0,
               which: str = "d_xibar") -> PolarGrid:
    """Evaluate phi_hat (order 0) or a conj-derivative statistic on a polar grid."""
    r = _check_radii(radii)
    if n_angles < 8:
        raise ValueError(f"at least 8 angles required, got {n_angles}")
    z = _samples(pool)
    angles = 2.0 * math.pi * np.arange(n_angles) / n_angles
    xis = (r[:, None] * np.exp(1j * angles)[None, :]).reshape(-1)
    values, stderrs = _statistic_many(z, xis, _prefactor(z, order, which))
    shape = (r.shape[0], n_angles)
    return PolarGrid(r, angles, values.reshape(shape), stderrs.reshape(shape), order)


def radial_scan(pool, radii, n_angles: int = 64) -> RadialScan:
    """Max of |phi_hat| over an angle grid, per radius."""
    grid = polar_grid(pool, radii, n_angles, order=0)
    return RadialScan(grid.radii, np.abs(grid.values).max(axis=1), n_angles)


def decay_from_grid(grid: PolarGrid) -> DecayScan:
    """Fit the log-log decay rate of the per-radius maxima of a polar grid.

    Radii whose maximum sits at or below 3x its own Monte Carlo stderr are
    excluded from the fit; fewer than 3 usable radii raises
    InsufficientSignalError.
    """
    r = grid.radii
    mods = np.abs(grid.values)
    best = mods.argmax(axis=1)
    rows = np.arange(r.shape[0])
    vmax = mods[rows, best]
    errs = grid.stderrs[rows, best]
    floors = 3.0 * errs
    kept = vmax > floors
    if int(kept.sum()) < 3:
        raise InsufficientSignalError(
            f"insufficient signal: only {int(kept.sum())} of {r.shape[0]} radii "
            "exceed 3x their Monte Carlo noise floor (need at least 3)"
        )
    slope = float(np.polyfit(np.log(r[kept]), np.log(vmax[kept]), 1)[0])
    return DecayScan(r, vmax, errs, floors, kept, slope, grid.angles.shape[0], grid.order)


def derivative_decay_scan(pool, radii, n_angles: int = 16, order: int = 1) -> DecayScan:
    """Scan a derivative statistic over a polar grid and fit its decay rate."""
    r = _check_radii(radii)
    if r.shape[0] < 2 or r[-1] < 10.0 * r[0] * (1.0 - 1e-12):
        raise ValueError("decay radii must span at least one decade")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    return decay_from_grid(polar_grid(pool, r, n_angles, order=order))
