"""Step-size parameters, their admissible ranges, and derived constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import ParameterError, UsageError
from .core import VIProblem

ETA_FLOOR = (math.sqrt(5.0) - 1.0) / 2.0

Auto = Union[float, str]


@dataclass(frozen=True)
class SolverParams:
    """Extrapolation weight, dual step and primal step; ``"auto"`` defers to
    :func:`resolve_params`."""

    eta: Auto = "auto"
    gamma: Auto = "auto"
    alpha: Auto = "auto"

    def resolved(self) -> bool:
        return not any(v == "auto" for v in (self.eta, self.gamma, self.alpha))


@dataclass(frozen=True)
class DerivedConstants:
    """Constants tied to a resolved parameter triple.

    ``beta1/beta2/beta3`` weight the descent potential, ``rho`` is its
    guaranteed per-step decrease coefficient, and ``sigma`` converts step
    norms into a stationarity bound via ``sigma^2 = max(c1, c2/(1-eta)^2, c3)``.
    """

    beta1: float
    beta2: float
    beta3: float
    rho: float
    c1: float
    c2: float
    c3: float
    sigma: float

    def as_dict(self) -> dict:
        return {
            "beta1": self.beta1, "beta2": self.beta2, "beta3": self.beta3,
            "rho": self.rho, "c1": self.c1, "c2": self.c2, "c3": self.c3,
            "sigma": self.sigma,
        }

    @staticmethod
    def from_dict(d: dict) -> "DerivedConstants":
        return DerivedConstants(**{k: float(d[k]) for k in
                                   ("beta1", "beta2", "beta3", "rho", "c1", "c2", "c3", "sigma")})


def derive_constants(eta: float, gamma: float, alpha: float, lipschitz: float, tau: float) -> DerivedConstants:
    beta1 = 1.0 / (2.0 * alpha * (1.0 - eta))
    beta2 = (gamma * tau**2 + lipschitz + tau) / 2.0
    beta3 = 1.0 / (2.0 * gamma)
    rho = min(
        eta / (2.0 * alpha * (1.0 - eta) ** 2),
        tau / 2.0,
        (1.0 - tau * gamma) / (2.0 * gamma),
        1.0 / gamma,
    )
    c1 = 3.0 * (lipschitz + gamma * tau**2) ** 2
    c2 = 3.0 / alpha**2
    c3 = 3.0 / gamma**2
    sigma = math.sqrt(max(c1, c2 / (1.0 - eta) ** 2, c3))
    return DerivedConstants(beta1, beta2, beta3, rho, c1, c2, c3, sigma)


def resolve_params(problem: VIProblem, requested: SolverParams = SolverParams()) -> tuple[SolverParams, DerivedConstants]:
    """Fill in ``"auto"`` entries and validate the admissible ranges.

    Auto values: ``eta`` is the lower endpoint of its range, ``gamma`` is
    ``0.9/tau``, ``alpha`` is the largest admissible value
    ``1/(2*(gamma*tau^2 + L + tau)*eta)``.  Explicit values must satisfy
    ``eta in [(sqrt(5)-1)/2, 1)``, ``gamma in (0, 1/tau)`` and
    ``alpha in (0, 1/(2*(gamma*tau^2+L+tau)*eta)]``; violations raise
    :class:`~alavi.errors.ParameterError` naming the bound.

    Deterministic and idempotent: resolving an already-resolved triple
    returns it unchanged.
    """
    lipschitz = problem.G.lipschitz
    if lipschitz is None:
        raise ParameterError("mapping has unknown Lipschitz constant; estimate it first")
    tau = problem.theta.tau

    eta = ETA_FLOOR if requested.eta == "auto" else float(requested.eta)
    if not (ETA_FLOOR <= eta < 1.0):
        raise ParameterError(
            f"eta={eta} violates [{ETA_FLOOR:.10f}, 1): extrapolation weight out of range"
        )

    if requested.gamma == "auto":
        gamma = 0.9 / tau
    else:
        gamma = float(requested.gamma)
    if not (0.0 < gamma < 1.0 / tau):
        raise ParameterError(f"gamma={gamma} violates (0, 1/tau)=(0, {1.0 / tau})")

    alpha_cap_denom = 2.0 * (gamma * tau**2 + lipschitz + tau) * eta
    alpha_cap = math.inf if alpha_cap_denom == 0 else 1.0 / alpha_cap_denom
    if requested.alpha == "auto":
        alpha = 1.0 if math.isinf(alpha_cap) else alpha_cap
    else:
        alpha = float(requested.alpha)
    if not (0.0 < alpha <= alpha_cap):
        raise ParameterError(f"alpha={alpha} violates (0, {alpha_cap}]")

    resolved = SolverParams(eta=eta, gamma=gamma, alpha=alpha)
    return resolved, derive_constants(eta, gamma, alpha, lipschitz, tau)


@dataclass(frozen=True)
class StopRule:
    """Termination: iteration budget, target residual, or stalled steps."""

    max_iters: int
    kkt_tol: float = 0.0
    step_tol: float = 0.0

    def __post_init__(self):
        if self.max_iters < 0:
            raise UsageError("max_iters must be nonnegative")
        if self.kkt_tol < 0 or self.step_tol < 0:
            raise UsageError("tolerances must be nonnegative")
