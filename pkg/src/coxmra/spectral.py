"""Spatial frequency-domain machinery for coefficient fields.

Frequencies live on the Fourier grid of the observation lattice, reported
in the symmetric fundamental domain (-pi, pi]^2 so that the weight
|w1|^2 |w2|^2 is an even function.  All frequency integrals are Riemann
sums over the N Fourier frequencies with cell measure (2 pi)^2 / N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sarh import stationarity_check

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FrequencyGrid:
    """Fourier frequencies of an s1 x s2 lattice, mapped into (-pi, pi]^2."""

    s1: int
    s2: int

    @property
    def n(self) -> int:
        return self.s1 * self.s2

    @property
    def w1(self) -> np.ndarray:
        return _fundamental(TWO_PI * np.arange(self.s1) / self.s1)

    @property
    def w2(self) -> np.ndarray:
        return _fundamental(TWO_PI * np.arange(self.s2) / self.s2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.w1, self.w2, indexing="ij")

    @property
    def cell_measure(self) -> float:
        """Riemann cell size (2 pi)^2 / N for frequency-domain sums."""
        return TWO_PI**2 / self.n


def _fundamental(w: np.ndarray) -> np.ndarray:
    """Map angles from [0, 2 pi) into (-pi, pi]."""
    out = np.where(w > np.pi, w - TWO_PI, w)
    return np.where(np.isclose(out, -np.pi), np.pi, out)


def fdft(coeff_field: np.ndarray, w: tuple[float, float]) -> complex:
    """Spatial discrete Fourier transform of one scalar coefficient field.

    Sites are indexed from 1 in the phase, matching the lattice origin of
    the state equation; the prefactor is 1 / (2 pi sqrt(N)).
    """
    x = np.asarray(coeff_field, dtype=float)
    s1, s2 = x.shape
    p = np.arange(1, s1 + 1)
    q = np.arange(1, s2 + 1)
    phase = np.exp(-1j * (p[:, None] * w[0] + q[None, :] * w[1]))
    return complex(np.sum(x * phase) / (TWO_PI * np.sqrt(s1 * s2)))


def _fdft_table(x: np.ndarray) -> np.ndarray:
    """fDFT at all Fourier frequencies via the FFT, 1-based site phase."""
    s1, s2 = x.shape
    f = np.fft.fft2(x)
    # shift from 0-based to 1-based site indexing
    w1 = TWO_PI * np.arange(s1) / s1
    w2 = TWO_PI * np.arange(s2) / s2
    f *= np.exp(-1j * w1)[:, None] * np.exp(-1j * w2)[None, :]
    return f / (TWO_PI * np.sqrt(s1 * s2))


@dataclass(frozen=True)
class PeriodogramTable:
    """Periodogram values of one basis pair at all Fourier frequencies."""

    freq: FrequencyGrid
    values: np.ndarray = field(repr=False)
    diagonal: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.freq.s1, self.freq.s2):
            raise ValueError(f"table shape {v.shape} != ({self.freq.s1}, {self.freq.s2})")
        object.__setattr__(self, "values", v)

    @property
    def real_values(self) -> np.ndarray:
        return self.values.real


def periodogram(coeff_a: np.ndarray, coeff_b: np.ndarray | None = None) -> PeriodogramTable:
    """Cross-periodogram of two coefficient fields (diagonal if b is None).

    Computed as fdft(a) * conj(fdft(b)) at every Fourier frequency via
    fast transforms.
    """
    a = np.asarray(coeff_a, dtype=float)
    diagonal = coeff_b is None or coeff_b is coeff_a
    b = a if diagonal else np.asarray(coeff_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    fa = _fdft_table(a)
    fb = fa if diagonal else _fdft_table(b)
    values = fa * np.conj(fb)
    if diagonal:
        values = values.real.astype(complex)
    return PeriodogramTable(FrequencyGrid(*a.shape), values, diagonal=diagonal)


def periodogram_direct(coeff_a: np.ndarray, coeff_b: np.ndarray | None = None) -> PeriodogramTable:
    """Quadruple-sum periodogram, kept as an FFT-free reference path."""
    a = np.asarray(coeff_a, dtype=float)
    b = a if coeff_b is None else np.asarray(coeff_b, dtype=float)
    s1, s2 = a.shape
    freq = FrequencyGrid(s1, s2)
    values = np.empty((s1, s2), dtype=complex)
    for i, w1 in enumerate(freq.w1):
        for j, w2 in enumerate(freq.w2):
            fa = fdft(a, (w1, w2))
            fb = fa if coeff_b is None else fdft(b, (w1, w2))
            values[i, j] = fa * np.conj(fb)
    return PeriodogramTable(freq, values, diagonal=coeff_b is None)


def all_periodograms(coeffs: np.ndarray) -> np.ndarray:
    """fDFT tables for every coefficient simultaneously.

    `coeffs` has shape (s1, s2, n); the result has the same shape and
    holds the complex fDFT per coefficient, from which any diagonal or
    cross table is a single product.
    """
    x = np.asarray(coeffs, dtype=float)
    s1, s2, _ = x.shape
    f = np.fft.fft2(x, axes=(0, 1))
    w1 = TWO_PI * np.arange(s1) / s1
    w2 = TWO_PI * np.arange(s2) / s2
    f *= (np.exp(-1j * w1)[:, None] * np.exp(-1j * w2)[None, :])[:, :, None]
    return f / (TWO_PI * np.sqrt(s1 * s2))


def ar_symbol_sq(theta, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """|1 - th1 e^{i w1} - th2 e^{i w2} - th3 e^{i(w1+w2)}|^2."""
    th1, th2, th3 = (float(v) for v in theta)
    sym = (
        1.0
        - th1 * np.exp(1j * w1)
        - th2 * np.exp(1j * w2)
        - th3 * np.exp(1j * (w1 + w2))
    )
    return np.abs(sym) ** 2


def model_density(theta, sigma2: float, w: tuple) -> np.ndarray | float:
    """Parametric spatial spectral density sigma2 / (2 pi^2) / |symbol|^2."""
    if not stationarity_check(theta):
        raise ValueError(f"non-stationary theta {tuple(theta)}")
    val = sigma2 / (2.0 * np.pi**2) / ar_symbol_sq(theta, np.asarray(w[0]), np.asarray(w[1]))
    return float(val) if np.ndim(val) == 0 else val


def eta_weight(w1, w2) -> np.ndarray | float:
    """Contrast weight |w1|^2 |w2|^2 on the fundamental domain.

    Vanishes on the axes, removing the zero frequency (and with it any
    imperfect-detrending DC bias) from every contrast integral.
    """
    val = np.abs(np.asarray(w1)) ** 2 * np.abs(np.asarray(w2)) ** 2
    return float(val) if np.ndim(val) == 0 else val


def eta_table(freq: FrequencyGrid) -> np.ndarray:
    w1, w2 = freq.mesh()
    return eta_weight(w1, w2)


def normalised_density(theta, freq: FrequencyGrid) -> tuple[np.ndarray, float]:
    """Scale-free density table Psi over the grid, plus the removed scale.

    Psi = f / sigma2(theta) with sigma2(theta) the eta-weighted Riemann
    integral of f, so (2 pi)^2 / N * sum(Psi * eta) == 1 by construction.
    The innovation variance cancels; f is evaluated at unit variance.
    """
    w1, w2 = freq.mesh()
    f = model_density(theta, 1.0, (w1, w2))
    scale = float(np.sum(f * eta_table(freq)) * freq.cell_measure)
    if scale <= 0:
        raise ValueError("degenerate weight: eta-weighted density integrates to zero")
    return f / scale, scale


def empirical_contrast(table: PeriodogramTable, theta) -> float:
    """Empirical contrast: minus the eta-weighted log-density sum.

    Uses the real part of the periodogram, so diagonal and cross tables
    share one code path.
    """
    psi, _ = normalised_density(theta, table.freq)
    integrand = table.real_values * eta_table(table.freq) * np.log(psi)
    return float(-np.sum(integrand) * table.freq.cell_measure)


def contrast_functional(theta0, theta, freq: FrequencyGrid) -> float:
    """Population analogue of the empirical contrast under theta0."""
    w1, w2 = freq.mesh()
    f0 = model_density(theta0, 1.0, (w1, w2))
    psi, _ = normalised_density(theta, freq)
    return float(-np.sum(f0 * eta_table(freq) * np.log(psi)) * freq.cell_measure)


def divergence(theta0, theta, freq: FrequencyGrid) -> float:
    """Relative-entropy loss between the models at theta0 and theta.

    Nonnegative on the discrete grid (both normalised densities sum to
    the same eta-weighted mass) and exactly zero at theta = theta0.
    """
    w1, w2 = freq.mesh()
    f0 = model_density(theta0, 1.0, (w1, w2))
    psi0, _ = normalised_density(theta0, freq)
    psi, _ = normalised_density(theta, freq)
    integrand = f0 * eta_table(freq) * (np.log(psi0) - np.log(psi))
    return float(np.sum(integrand) * freq.cell_measure)
