"""Numerical checks of the measurement-prediction error bound.

A test case is a discrete belief (weighted atoms) plus a scalar measurement
function and Gaussian noise. Its predicted measurement density is the
Gaussian mixture of the noisy measurement at each atom, tabulated on a
grid. Against that density we compare the mean squared error of the
point-estimate prediction (PIM) with the expected error of the sample-mean
prediction (MexGen).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BoundUndefinedError, GridCoverageError
from .models import RssiModel, power_at

FUNCTIONS = ("linear", "rssi", "absolute-value")
GRID_POINTS = 4096
GRID_SIGMAS = 8.0
MIN_GRID_SIGMAS = 6.0


@dataclass
class DiscreteTestCase:
    positions: np.ndarray
    weights: np.ndarray
    function: str = "linear"
    noise_var: float = 1.0
    m_values: tuple = (8, 64, 512)
    grid: np.ndarray | None = None
    slope: tuple = (1.0, 0.5)
    intercept: float = 0.0
    agent: tuple = (0.0, 0.0, 50.0)
    rssi: RssiModel = field(default_factory=lambda: RssiModel(antenna="isotropic"))

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[1] == 1:
            self.positions = np.hstack([self.positions, np.zeros_like(self.positions)])
        self.weights = np.asarray(self.weights, dtype=float)
        if self.function not in FUNCTIONS:
            raise ValueError(f"unknown measurement function {self.function!r}")
        if self.weights.shape != (self.positions.shape[0],) or np.any(self.weights < 0):
            raise ValueError("need one non-negative weight per atom")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")

    def h(self, positions) -> np.ndarray:
        """Noiseless measurement function."""
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        if self.function == "linear":
            return self.intercept + pos @ np.asarray(self.slope, dtype=float)
        if self.function == "absolute-value":
            return np.hypot(pos[:, 0], pos[:, 1])
        return power_at(pos, np.asarray(self.agent, dtype=float), self.rssi)

    @property
    def atom_values(self) -> np.ndarray:
        return self.h(self.positions)

    @property
    def mean_position(self) -> np.ndarray:
        return self.weights @ self.positions

    def to_dict(self) -> dict:
        d = asdict(self)
        d["positions"] = self.positions.tolist()
        d["weights"] = self.weights.tolist()
        d["grid"] = None if self.grid is None else [float(self.grid[0]), float(self.grid[-1]), len(self.grid)]
        d["rssi"] = asdict(self.rssi)
        return d


@dataclass
class MeasurementDensity:
    """Probability mass per node; for noisy cases ``mass = p(z) * dz`` on a grid."""

    z: np.ndarray
    mass: np.ndarray
    dz: float = 0.0

    @property
    def mean(self) -> float:
        return float(self.mass @ self.z / self.mass.sum())

    @property
    def variance(self) -> float:
        c = self.mean
        return float(self.mass @ (self.z - c) ** 2 / self.mass.sum())

    def pdf(self) -> np.ndarray:
        if self.dz <= 0:
            raise ValueError("point-mass density has no pdf")
        return self.mass / self.dz


def default_grid(values: np.ndarray, noise_var: float) -> np.ndarray:
    sigma = math.sqrt(noise_var)
    lo = values.min() - GRID_SIGMAS * sigma
    hi = values.max() + GRID_SIGMAS * sigma
    n = max(GRID_POINTS, int(math.ceil((hi - lo) / (0.5 * sigma))) + 1)
    return np.linspace(lo, hi, n)


def brute_force_measurement_density(case: DiscreteTestCase) -> MeasurementDensity:
    values = case.atom_values
    if case.noise_var == 0:
        z, inverse = np.unique(values, return_inverse=True)
        return MeasurementDensity(z=z, mass=np.bincount(inverse, weights=case.weights))
    sigma = math.sqrt(case.noise_var)
    grid = default_grid(values, case.noise_var) if case.grid is None else np.asarray(case.grid, dtype=float)
    if grid[0] > values.min() - MIN_GRID_SIGMAS * sigma or grid[-1] < values.max() + MIN_GRID_SIGMAS * sigma:
        raise GridCoverageError("grid must extend 6 sigma beyond every atom's measurement")
    dz = float(grid[1] - grid[0])
    r = (grid[None, :] - values[:, None]) / sigma
    pdf = case.weights @ np.exp(-0.5 * r * r) / (sigma * math.sqrt(2 * math.pi))
    mass = pdf * dz
    if mass.sum() < 1.0 - 1e-6:
        raise GridCoverageError(f"grid captures only {mass.sum():.9f} of the density")
    return MeasurementDensity(z=grid, mass=mass, dz=dz)


def mse_of_prediction(z_hat, density: MeasurementDensity):
    """``sum p(z) (z_hat - z)^2`` over the tabulated density; vectorised over ``z_hat``.

    The square is expanded about the density mean so an array of predictions
    costs three reductions instead of one grid pass per prediction.
    """
    c = density.mean
    d = density.z - c
    s0 = density.mass.sum()
    s1 = density.mass @ d
    s2 = density.mass @ (d * d)
    off = np.asarray(z_hat, dtype=float) - c
    out = s0 * off * off - 2.0 * off * s1 + s2
    return float(out) if np.ndim(out) == 0 else out


def mean_error(z_hat: float, density: MeasurementDensity) -> float:
    return float(density.mass @ (z_hat - density.z))


def mexgen_draws(
    values: np.ndarray,
    weights: np.ndarray,
    noise_var: float,
    m: int,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """``trials`` sample-mean predictions, each over ``m`` noisy atom draws.

    Atom draws enter only through their counts, which are multinomial, and
    the mean of ``m`` iid noise terms is N(0, noise_var / m); both are sampled
    directly.
    """
    counts = rng.multinomial(m, weights, size=trials)
    z = counts @ values / m
    if noise_var > 0:
        z = z + math.sqrt(noise_var / m) * rng.standard_normal(trials)
    return z


@dataclass
class BoundReport:
    m: int
    trials: int
    mse_pim: float
    sigma2: float
    mse_mean: float
    gap2: float
    mexgen_mse: float
    mexgen_se: float
    bound_holds: bool
    expectation_matches: bool
    case: dict | None = None

    @property
    def ok(self) -> bool:
        return self.bound_holds and self.expectation_matches


def verify_error_bound(
    case: DiscreteTestCase,
    m: int,
    trials: int,
    rng: np.random.Generator,
    density: MeasurementDensity | None = None,
) -> BoundReport:
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    density = brute_force_measurement_density(case) if density is None else density
    sigma2 = density.variance
    z_bar = density.mean
    pim = float(case.h(case.mean_position[None, :])[0])
    mse_pim = mse_of_prediction(pim, density)
    draws = mexgen_draws(case.atom_values, case.weights, case.noise_var, m, trials, rng)
    mses = mse_of_prediction(draws, density)
    e_hat = float(mses.mean())
    se = float(mses.std(ddof=1) / math.sqrt(trials))
    eps = sigma2 / m
    bound = mse_pim + eps >= e_hat - 3 * se
    match = abs(e_hat - (sigma2 + eps)) <= 3 * se + 1e-12 * max(1.0, sigma2)
    report = BoundReport(
        m=m,
        trials=trials,
        mse_pim=mse_pim,
        sigma2=sigma2,
        mse_mean=mse_of_prediction(z_bar, density),
        gap2=(pim - z_bar) ** 2,
        mexgen_mse=e_hat,
        mexgen_se=se,
        bound_holds=bool(bound),
        expectation_matches=bool(match),
    )
    if not report.ok:
        report.case = case.to_dict()
    return report


def mexgen_sample_bound(case: DiscreteTestCase, density: MeasurementDensity | None = None) -> int:
    """Smallest sample count whose expected MexGen error beats PIM strictly.

    Needs ``m > sigma^2 / gap^2`` where gap is the PIM prediction's offset
    from the density mean.
    """
    density = brute_force_measurement_density(case) if density is None else density
    sigma2 = density.variance
    pim = float(case.h(case.mean_position[None, :])[0])
    gap2 = (pim - density.mean) ** 2
    if gap2 <= 1e-12 * max(sigma2, 1.0):
        raise BoundUndefinedError("PIM is unbiased here (linear case); no finite bound applies")
    return int(math.floor(sigma2 / gap2)) + 1


def random_case(rng: np.random.Generator, function: str | None = None) -> DiscreteTestCase:
    function = function or FUNCTIONS[rng.integers(len(FUNCTIONS))]
    n = int(rng.integers(2, 17))
    weights = rng.dirichlet(np.ones(n))
    noise_var = float(rng.uniform(0.25, 9.0))
    if function == "rssi":
        positions = rng.uniform(-300.0, 300.0, size=(n, 2))
        return DiscreteTestCase(positions, weights, "rssi", noise_var)
    if function == "absolute-value":
        positions = rng.uniform(-10.0, 10.0, size=(n, 2))
        return DiscreteTestCase(positions, weights, "absolute-value", noise_var)
    positions = rng.uniform(-100.0, 100.0, size=(n, 2))
    slope = tuple(rng.uniform(-1.0, 1.0, size=2))
    return DiscreteTestCase(positions, weights, "linear", noise_var, slope=slope, intercept=float(rng.uniform(-50, 50)))


def optimal_prediction_check(density: MeasurementDensity) -> tuple[float, float, float]:
    """Brute-force sweep of the MSE over candidate predictions.

    Candidates are the density's own grid nodes (a 2001-point sweep for point
    masses); every candidate is scored by the direct weighted sum. Returns
    ``(argmin, density mean, sweep spacing)``.
    """
    if density.dz > 0:
        sweep, cell = density.z, density.dz
    else:
        sweep = np.linspace(density.z[0], density.z[-1], 2001)
        cell = float(sweep[1] - sweep[0]) if len(density.z) > 1 else 0.0
    best, best_mse = float(sweep[0]), math.inf
    for chunk in np.array_split(sweep, max(1, len(sweep) // 512)):
        mse = ((chunk[:, None] - density.z[None, :]) ** 2) @ density.mass
        i = int(np.argmin(mse))
        if mse[i] < best_mse:
            best, best_mse = float(chunk[i]), float(mse[i])
    return best, density.mean, cell
