"""Standing-wave dipole trap geometry: potentials, well registry, stiffness.

Lengths are in micrometers and trap depths in millikelvin throughout; no
unit conversions happen implicitly.  A trap is an ideal Gaussian standing
wave with constant waist: the Rayleigh range of both beams is far larger
than the working region, so beam divergence is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Boltzmann constant, J/K, for callers that need absolute energies.
BOLTZMANN_J_PER_K = 1.380649e-23


@dataclass(frozen=True)
class TrapConfig:
    """Geometry and optics of one standing-wave dipole trap.

    ``axis`` is the lab axis the standing wave runs along ('y' for the
    horizontal trap, 'z' for the vertical one).  ``transverse_center`` is
    the beam-line location in the plane normal to ``axis``: (x, z) for a
    y-axis trap, (x, y) for a z-axis trap.  ``axial_phase_offset`` places
    well 0 along the axis; wells repeat every half wavelength.
    """

    name: str
    wavelength: float          # um
    waist: float               # um, 1/e^2 intensity radius
    depth: float               # mK equivalent
    axis: str = "y"
    axial_phase_offset: float = 0.0
    transverse_center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError(f"trap {self.name!r}: wavelength must be > 0")
        if self.waist <= 0:
            raise ValueError(f"trap {self.name!r}: waist must be > 0")
        if self.depth < 0:
            raise ValueError(f"trap {self.name!r}: depth must be >= 0")
        if self.axis not in ("y", "z"):
            raise ValueError(f"trap {self.name!r}: axis must be 'y' or 'z'")

    @property
    def well_spacing(self) -> float:
        """Distance between adjacent potential wells (half wavelength)."""
        return self.wavelength / 2.0

    @property
    def depth_joules(self) -> float:
        return self.depth * 1e-3 * BOLTZMANN_J_PER_K

    def split_point(self, point) -> tuple[float, float]:
        """Decompose a 3-vector into (axial coordinate, transverse distance)."""
        x, y, z = point
        if self.axis == "y":
            tx, tz = self.transverse_center
            return y, math.hypot(x - tx, z - tz)
        tx, ty = self.transverse_center
        return z, math.hypot(x - tx, y - ty)


@dataclass(frozen=True)
class WellIndex:
    """A discrete potential well of one trap, counted from well 0."""

    trap_id: str
    index: int


def well_center(cfg: TrapConfig, index: int, axial_shift: float = 0.0) -> float:
    """Axial position of a well center; ``axial_shift`` is the dynamic
    conveyor displacement of the whole pattern."""
    return cfg.axial_phase_offset + axial_shift + index * cfg.well_spacing


def potential_at(cfg: TrapConfig, point, axial_shift: float = 0.0) -> float:
    """Trap potential at a lab-frame point, in mK (non-positive).

    The axial coordinate is reduced modulo the well spacing before the
    cosine so the half-wavelength periodicity is exact in floating point.
    """
    axial, rho = cfg.split_point(point)
    u = math.fmod(axial - cfg.axial_phase_offset - axial_shift, cfg.well_spacing)
    c = math.cos(2.0 * math.pi * u / cfg.wavelength)
    radial = math.exp(-2.0 * rho * rho / (cfg.waist * cfg.waist))
    return -cfg.depth * radial * c * c


def total_potential(traps, point) -> float:
    """Sum of scaled trap potentials.

    ``traps`` is an iterable of (TrapConfig, scale) or
    (TrapConfig, scale, axial_shift) entries with scale in [0, 1].
    """
    total = 0.0
    for entry in traps:
        cfg, scale = entry[0], entry[1]
        shift = entry[2] if len(entry) > 2 else 0.0
        if not 0.0 <= scale <= 1.0:
            raise ValueError(f"trap {cfg.name!r}: scale {scale} outside [0, 1]")
        total += scale * potential_at(cfg, point, shift)
    return total


def nearest_well(cfg: TrapConfig, axial_coord: float, axial_shift: float = 0.0) -> WellIndex:
    """Index of the well whose center is closest to ``axial_coord``.

    Exact half-spacing ties resolve toward the lower index.
    """
    t = (axial_coord - cfg.axial_phase_offset - axial_shift) / cfg.well_spacing
    return WellIndex(cfg.name, int(math.ceil(t - 0.5)))


def default_hdt() -> TrapConfig:
    """Horizontal trap with the measured parameters of the apparatus."""
    return TrapConfig(name="hdt", wavelength=1.064, waist=19.0, depth=0.8,
                      axis="y")


def default_vdt() -> TrapConfig:
    """Vertical trap (the optical tweezers) with measured parameters."""
    return TrapConfig(name="vdt", wavelength=1.030, waist=10.0, depth=1.5,
                      axis="z")


def stiffness_ratio(cfg: TrapConfig) -> float:
    """Axial/radial curvature ratio of the potential at a well center.

    For the standing-wave form this is (2*pi*waist/wavelength)^2 / 2; both
    traps used here exceed 50, which is what lets an atom follow the axial
    motion of a trap regardless of the other trap's radial pull.
    """
    k = 2.0 * math.pi * cfg.waist / cfg.wavelength
    return k * k / 2.0
