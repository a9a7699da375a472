"""Stock and extraction shocks.

Panels hold paired draws of the stock shock ``theta`` and the extraction
shock ``omega``. Each variable has its own PCG64 stream spawned from the
panel seed (child 0 for theta, child 1 for omega), so changing one sigma
never moves the other variable's draws. That is what makes insured and
uninsured solves comparable under common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

INDEPENDENT = "independent"
PERFECTLY_CORRELATED = "perfectly_correlated"
DEPENDENCE = (INDEPENDENT, PERFECTLY_CORRELATED)
FAMILIES = ("normal",)
VARIABLES = ("theta", "omega")

# J(trigger) closer than this to 0 or 1 is treated as a degenerate tail.
_TAIL_EPS = 1e-15


@dataclass(frozen=True)
class ShockSpec:
    """Zero-mean shock distributions and their dependence structure."""

    sigma_theta: float
    sigma_omega: float
    dependence: str = INDEPENDENT
    family: str = "normal"

    def __post_init__(self):
        if not (self.sigma_theta >= 0 and self.sigma_omega >= 0):
            raise ValueError(
                f"shock sigmas must be nonnegative, got "
                f"sigma_theta={self.sigma_theta}, sigma_omega={self.sigma_omega}"
            )
        if self.dependence not in DEPENDENCE:
            raise ValueError(f"unknown dependence {self.dependence!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown shock family {self.family!r}")

    def sigma(self, variable: str) -> float:
        if variable == "theta":
            return self.sigma_theta
        if variable == "omega":
            return self.sigma_omega
        raise ValueError(f"variable must be 'theta' or 'omega', got {variable!r}")


@dataclass(frozen=True, eq=False)
class ShockPanel:
    """An immutable panel of ``n`` (theta, omega) draws.

    ``theta`` and ``omega`` are read-only float arrays of length ``n``.
    """

    spec: ShockSpec
    theta: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    seed: int
    antithetic: bool = False

    @property
    def n(self) -> int:
        return int(self.theta.shape[0])

    @property
    def draws(self) -> np.ndarray:
        """The panel as an ``(n, 2)`` array of (theta, omega) rows."""
        return np.column_stack([self.theta, self.omega])

    def values(self, variable: str) -> np.ndarray:
        if variable == "theta":
            return self.theta
        if variable == "omega":
            return self.omega
        raise ValueError(f"variable must be 'theta' or 'omega', got {variable!r}")


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    theta_ss, omega_ss = np.random.SeedSequence(seed).spawn(2)
    return (
        np.random.Generator(np.random.PCG64(theta_ss)),
        np.random.Generator(np.random.PCG64(omega_ss)),
    )


def sample_shocks(spec: ShockSpec, n: int, seed: int, antithetic: bool = False) -> ShockPanel:
    """Draw a reproducible panel of ``n`` shock pairs.

    Parameters
    ----------
    spec : ShockSpec
        Shock distributions.
    n : int
        Number of draws, at least 1.
    seed : int
        Nonnegative integer seed; the panel is a pure function of
        ``(spec, n, seed, antithetic)``.
    antithetic : bool
        If True, ``n // 4`` base pairs are expanded to the four sign
        combinations (+theta, +omega), (-theta, +omega), (+theta, -omega),
        (-theta, -omega). Sample means, the sample cross-moment and the
        conditional means of one shock given the sign of the other are then
        exactly zero, as they are in the population. Requires ``n % 4 == 0``.

    Returns
    -------
    ShockPanel
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if antithetic and n % 4:
        raise ValueError(f"antithetic panels need n divisible by 4, got {n}")
    correlated = spec.dependence == PERFECTLY_CORRELATED
    if correlated and spec.sigma_omega == 0 and spec.sigma_theta > 0:
        raise ValueError(
            "perfect correlation with sigma_omega=0 and sigma_theta>0 has no defined scaling"
        )

    m = n // 4 if antithetic else n
    theta_rng, omega_rng = _streams(seed)
    z_theta = theta_rng.standard_normal(m)
    z_omega = omega_rng.standard_normal(m)
    if antithetic:
        z_theta = np.concatenate([z_theta, -z_theta, z_theta, -z_theta])
        z_omega = np.concatenate([z_omega, z_omega, -z_omega, -z_omega])

    omega = spec.sigma_omega * z_omega
    if correlated:
        # one underlying draw; theta is an exact rescaling of omega
        theta = spec.sigma_theta * z_omega
    else:
        theta = spec.sigma_theta * z_theta

    theta.setflags(write=False)
    omega.setflags(write=False)
    return ShockPanel(spec=spec, theta=theta, omega=omega, seed=int(seed), antithetic=antithetic)


def cdf_at(spec: ShockSpec, variable: str, value: float) -> float:
    """Exact normal CDF ``J(value)`` of the selected shock."""
    sigma = spec.sigma(variable)
    if sigma <= 0:
        raise ValueError(f"{variable} is degenerate (sigma=0); its CDF cannot price a contract")
    return float(ndtr(value / sigma))


def conditional_mean(spec: ShockSpec, variable: str, side: str, trigger: float) -> float:
    """Truncated-normal mean ``E[v | v < trigger]`` or ``E[v | v > trigger]``."""
    sigma = spec.sigma(variable)
    if sigma <= 0:
        raise ValueError(f"{variable} is degenerate (sigma=0)")
    z = trigger / sigma
    p = float(ndtr(z))
    if p < _TAIL_EPS or p > 1 - _TAIL_EPS:
        raise ValueError(f"trigger {trigger} sits in a degenerate tail (J={p!r})")
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    if side == "below":
        return -sigma * pdf / p
    if side == "above":
        return sigma * pdf / float(ndtr(-z))
    raise ValueError(f"side must be 'below' or 'above', got {side!r}")
