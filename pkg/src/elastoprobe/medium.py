"""Background elastic medium and wave-part labels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class WavePart(Enum):
    """Longitudinal (pressure) or transversal (shear) wave part."""

    P = "p"
    S = "s"


class ContractViolation(ValueError):
    """An argument violates a documented precondition."""


@dataclass(frozen=True)
class ElasticMedium:
    """Homogeneous isotropic background with Lame constants and frequency.

    All quantities are dimensionless; the density is implicitly one, so the
    frequency ``kappa`` enters the Navier operator as ``kappa**2``.  The
    derived wavenumbers are

        kappa_p = kappa / sqrt(2*mu0 + lambda0)
        kappa_s = kappa / sqrt(mu0)

    and ``kappa_p < kappa_s`` whenever ``lambda0 + mu0 > 0``.
    """

    lambda0: float
    mu0: float
    kappa: float

    def __post_init__(self) -> None:
        if not self.mu0 > 0:
            raise ContractViolation(f"mu0 must be positive, got {self.mu0}")
        if not 2 * self.mu0 + 3 * self.lambda0 > 0:
            raise ContractViolation(
                f"2*mu0 + 3*lambda0 must be positive, got {2 * self.mu0 + 3 * self.lambda0}"
            )
        if not self.kappa > 0:
            raise ContractViolation(f"kappa must be positive, got {self.kappa}")

    @property
    def kappa_p(self) -> float:
        return self.kappa / math.sqrt(2 * self.mu0 + self.lambda0)

    @property
    def kappa_s(self) -> float:
        return self.kappa / math.sqrt(self.mu0)

    def wavenumber(self, part: WavePart) -> float:
        return self.kappa_p if part is WavePart.P else self.kappa_s
