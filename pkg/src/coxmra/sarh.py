"""Simulation of the SARH(1) spatial curve process in a finite sine basis.

Each retained component p carries a scalar unilateral AR field

    x[r, c] = th1 * x[r-1, c] + th2 * x[r, c-1] + th3 * x[r-1, c-1] + e[r, c]

with iid Gaussian innovations.  The curve at a site is the component sum
against the (discretely normalized) sine eigenfunctions.  Simulation runs
on a zero-initialized enlarged lattice and crops the trailing block, so
the initialization error decays geometrically with the burn-in margin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .grids import FunctionalField, SpatialGrid, TimeGrid
from .wavelet import normalized_eigenfunctions

DEFAULT_BURN_IN = 64


def stationarity_check(theta) -> bool:
    """Sufficient stationarity condition for one AR triple.

    Accepts either |th1| + |th2| + |th3| < 1 (keeps the AR symbol away
    from zero) or the factorized form th3 = -th1*th2 with |th1|, |th2| < 1.
    """
    th1, th2, th3 = (float(v) for v in theta)
    if abs(th1) + abs(th2) + abs(th3) < 1.0:
        return True
    if abs(th1) < 1.0 and abs(th2) < 1.0 and np.isclose(th3, -th1 * th2, atol=1e-12):
        return True
    return False


@dataclass(frozen=True)
class NodeParams:
    """AR triple plus innovation variance for one basis pair."""

    theta: tuple[float, float, float]
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if not stationarity_check(self.theta):
            raise ValueError(f"non-stationary theta {self.theta}")


def default_variance_profile(eigenvalues1, eigenvalues2) -> np.ndarray:
    """Summable innovation variances sigma2_p ~ p^-2, scaled so the
    stationary variances of the factorized components sum to one."""
    lam1 = np.asarray(eigenvalues1, dtype=float)
    lam2 = np.asarray(eigenvalues2, dtype=float)
    p = np.arange(1, lam1.size + 1)
    raw = p**-2.0
    trace = np.sum(raw / ((1.0 - lam1**2) * (1.0 - lam2**2)))
    return raw / trace


@dataclass(frozen=True)
class SarhSpec:
    """Model specification for the diagonal (common-eigenbasis) case."""

    eigenvalues1: np.ndarray
    eigenvalues2: np.ndarray
    innovation_variances: np.ndarray
    time: TimeGrid
    couple_l3: bool = True
    eigenvalues3: np.ndarray | None = None

    def __post_init__(self):
        lam1 = np.asarray(self.eigenvalues1, dtype=float)
        lam2 = np.asarray(self.eigenvalues2, dtype=float)
        sig2 = np.asarray(self.innovation_variances, dtype=float)
        if not (lam1.size == lam2.size == sig2.size):
            raise ValueError("eigenvalue and variance vectors must share length")
        if lam1.size < 1:
            raise ValueError("need at least one component")
        if np.any(np.abs(lam1) >= 1) or np.any(np.abs(lam2) >= 1):
            raise ValueError("require |lambda_p1| < 1 and |lambda_p2| < 1")
        if np.any(sig2 <= 0):
            raise ValueError("innovation variances must be positive")
        object.__setattr__(self, "eigenvalues1", lam1)
        object.__setattr__(self, "eigenvalues2", lam2)
        object.__setattr__(self, "innovation_variances", sig2)
        if self.couple_l3:
            object.__setattr__(self, "eigenvalues3", -lam1 * lam2)
        else:
            if self.eigenvalues3 is None:
                raise ValueError("eigenvalues3 required when couple_l3 is unset")
            lam3 = np.asarray(self.eigenvalues3, dtype=float)
            if lam3.size != lam1.size:
                raise ValueError("eigenvalues3 length mismatch")
            if np.any(np.abs(lam1) + np.abs(lam2) + np.abs(lam3) >= 1):
                raise ValueError(
                    "require |lambda_p1| + |lambda_p2| + |lambda_p3| < 1 "
                    "for uncoupled L3"
                )
            object.__setattr__(self, "eigenvalues3", lam3)

    @property
    def truncation(self) -> int:
        return self.eigenvalues1.size

    def node_params(self, p: int) -> NodeParams:
        """Parameters of component p (1-based)."""
        i = p - 1
        return NodeParams(
            (
                float(self.eigenvalues1[i]),
                float(self.eigenvalues2[i]),
                float(self.eigenvalues3[i]),
            ),
            float(self.innovation_variances[i]),
        )

    def stationary_variances(self) -> np.ndarray:
        """Marginal variance of each component field.

        Closed form for the factorized model; spectral Riemann sum
        otherwise.
        """
        if self.couple_l3:
            return self.innovation_variances / (
                (1.0 - self.eigenvalues1**2) * (1.0 - self.eigenvalues2**2)
            )
        return np.array(
            [
                _spectral_variance(
                    (
                        self.eigenvalues1[i],
                        self.eigenvalues2[i],
                        self.eigenvalues3[i],
                    ),
                    self.innovation_variances[i],
                )
                for i in range(self.truncation)
            ]
        )


def _spectral_variance(theta, sigma2: float, n: int = 256) -> float:
    """Variance of a stationary AR field via its spectral representation."""
    w = 2.0 * np.pi * np.arange(n) / n
    w1, w2 = np.meshgrid(w, w, indexing="ij")
    sym = 1.0 - theta[0] * np.exp(1j * w1) - theta[1] * np.exp(1j * w2) - theta[
        2
    ] * np.exp(1j * (w1 + w2))
    return float(sigma2 * np.mean(1.0 / np.abs(sym) ** 2))


def simulate_component(
    theta,
    sigma2: float,
    grid: SpatialGrid,
    burn_in: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One scalar AR component field, cropped to (s1, s2)."""
    th1, th2, th3 = (float(v) for v in theta)
    r1, r2 = grid.s1 + burn_in, grid.s2 + burn_in
    e = rng.normal(0.0, np.sqrt(sigma2), size=(r1, r2))
    x = np.zeros((r1, r2))
    prev = np.zeros(r2)
    for r in range(r1):
        drive = e[r].copy()
        drive[1:] += th1 * prev[1:] + th3 * prev[:-1]
        drive[0] += th1 * prev[0]
        # within-row recursion x[c] = th2 * x[c-1] + drive[c]
        x[r] = lfilter([1.0], [1.0, -th2], drive)
        prev = x[r]
    return x[burn_in:, burn_in:]


def simulate(
    spec: SarhSpec,
    grid: SpatialGrid,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
) -> FunctionalField:
    """Simulate the curve field; deterministic given the seed.

    Component seeds are split from the root seed, so per-component work
    can be distributed without changing the result.
    """
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    max_rho = max(
        np.max(np.abs(spec.eigenvalues1)), np.max(np.abs(spec.eigenvalues2))
    )
    if max_rho > 0 and max_rho ** max(burn_in, 1) > 1e-6:
        warnings.warn(
            f"burn_in={burn_in} may be too small for spectral radius {max_rho:.3f}",
            stacklevel=2,
        )
    phi = normalized_eigenfunctions(spec.time, spec.truncation)
    seeds = np.random.SeedSequence(seed).spawn(spec.truncation)
    values = np.zeros((grid.s1, grid.s2, spec.time.n))
    for p in range(1, spec.truncation + 1):
        params = spec.node_params(p)
        rng = np.random.default_rng(seeds[p - 1])
        comp = simulate_component(params.theta, params.sigma2, grid, burn_in, rng)
        values += comp[:, :, None] * phi[p - 1][None, None, :]
    return FunctionalField(grid, spec.time, values)


def component_scores(fld: FunctionalField, truncation: int) -> np.ndarray:
    """Project curves onto the normalized eigenfunctions, shape (s1, s2, k)."""
    phi = normalized_eigenfunctions(fld.time, truncation)
    return np.tensordot(fld.values, phi.T, axes=1) * fld.time.weight
