"""
Elastomer material model
- Lamé parameters from Young's modulus / Poisson ratio
- Fixed-corotated stress with SVD polar decomposition
"""

from dataclasses import asdict, dataclass

import numpy as np

from core.errors import DegenerateF


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic elastic material"""

    youngs_modulus: float = 1.45e5
    poisson_ratio: float = 0.45
    density: float = 1000.0

    @property
    def mu(self):
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))

    @property
    def lam(self):
        nu = self.poisson_ratio
        return self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def wave_speed(self):
        """P-wave speed sqrt((λ + 2μ) / ρ), m/s"""
        return float(np.sqrt((self.lam + 2.0 * self.mu) / self.density))

    def validate(self):
        errors = []
        if not self.youngs_modulus > 0:
            errors.append(f"youngs_modulus must be > 0 (got {self.youngs_modulus})")
        if not 0.0 <= self.poisson_ratio < 0.5:
            errors.append(f"poisson_ratio must be in [0, 0.5) (got {self.poisson_ratio})")
        if not self.density > 0:
            errors.append(f"density must be > 0 (got {self.density})")
        return errors

    @classmethod
    def from_dict(cls, data):
        return cls(
            youngs_modulus=float(data.get("youngs_modulus", cls.youngs_modulus)),
            poisson_ratio=float(data.get("poisson_ratio", cls.poisson_ratio)),
            density=float(data.get("density", cls.density)),
        )

    def to_dict(self):
        return asdict(self)


def polar_rotation(F):
    """Rotation factor R of F = R S, via SVD with reflection correction"""
    F = np.asarray(F, dtype=np.float64)
    try:
        U, sigma, Vt = np.linalg.svd(F)
    except np.linalg.LinAlgError as e:
        raise DegenerateF(f"SVD did not converge: {e}") from e

    if np.linalg.det(U) < 0:
        U[:, 2] = -U[:, 2]
    if np.linalg.det(Vt) < 0:
        Vt[2, :] = -Vt[2, :]
    return U @ Vt


def compute_stress(F, material):
    """
    Fixed-corotated stress term S = P(F) F^T

    P(F) = 2μ(F - R) + λ(J - 1) J F^-T, so S = 2μ(F - R)F^T + λ(J - 1)J I.
    The rest volume enters only in the grid scatter (-dt 4/dX^2 w V0 S dx).

    Args:
        F: 3x3 deformation gradient with det(F) > 0
        material: MaterialParams

    Returns:
        3x3 numpy array
    """
    F = np.asarray(F, dtype=np.float64)
    J = float(np.linalg.det(F))
    if not J > 0.0:
        raise DegenerateF(f"det(F) = {J:.3e} is not positive")

    R = polar_rotation(F)
    return (
        2.0 * material.mu * (F - R) @ F.T
        + material.lam * (J - 1.0) * J * np.eye(3)
    )
