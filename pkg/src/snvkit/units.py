"""Physical constants, unit conversions and the shared data types.

Lightweight base layer: every other module imports from here, so keep it
free of heavy dependencies (numpy only) and of any package-internal imports.

Energy-like quantities are handled in five interchangeable units:
``nm`` (optical wavelength), ``eV``, ``meV``, ``GHz`` (E = h nu) and
``K`` (thermal equivalent, E = k_B T). All conversions go through eV as
the canonical unit so there is a single conversion path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

# CODATA 2018. h and k_B are exact in the SI; values in eV follow from the
# exact elementary charge.
PLANCK_EV_S = 4.135667696e-15          # h in eV*s
BOLTZMANN_EV_PER_K = 8.617333262e-5    # k_B in eV/K
SPEED_OF_LIGHT_M_S = 299792458.0       # c, exact
SPEED_OF_LIGHT_NM_GHZ = 2.99792458e8   # c in nm*GHz (wavelength x frequency)

# Pinned reference for wavelength <-> energy, hc in eV*nm. Kept as an explicit
# constant (rather than PLANCK_EV_S * c) so tests have a fixed anchor.
HC_EV_NM = 1239.841984

ENERGY_UNITS = ("nm", "eV", "meV", "GHz", "K")


def to_ev(value: float, unit: str) -> float:
    """Convert a value in any supported unit to eV."""
    if unit == "eV":
        return value
    if unit == "meV":
        return value * 1e-3
    if unit == "nm":
        if value <= 0:
            raise ValueError(f"wavelength must be positive, got {value} nm")
        return HC_EV_NM / value
    if unit == "GHz":
        return value * 1e9 * PLANCK_EV_S
    if unit == "K":
        return value * BOLTZMANN_EV_PER_K
    raise ValueError(f"unknown unit {unit!r}, expected one of {ENERGY_UNITS}")


def from_ev(energy_ev: float, unit: str) -> float:
    """Convert an energy in eV to any supported unit."""
    if unit == "eV":
        return energy_ev
    if unit == "meV":
        return energy_ev * 1e3
    if unit == "nm":
        if energy_ev <= 0:
            raise ValueError(f"cannot express non-positive energy {energy_ev} eV as a wavelength")
        return HC_EV_NM / energy_ev
    if unit == "GHz":
        return energy_ev / (1e9 * PLANCK_EV_S)
    if unit == "K":
        return energy_ev / BOLTZMANN_EV_PER_K
    raise ValueError(f"unknown unit {unit!r}, expected one of {ENERGY_UNITS}")


def ghz_to_mev(value_ghz: float) -> float:
    """Frequency in GHz to energy in meV (h nu)."""
    return value_ghz * 1e9 * PLANCK_EV_S * 1e3


def mev_to_ghz(value_mev: float) -> float:
    """Energy in meV to frequency in GHz."""
    return value_mev * 1e-3 / (1e9 * PLANCK_EV_S)


@dataclass(frozen=True)
class EnergyQuantity:
    """A scalar energy-like quantity tagged with its unit.

    The value must be finite; wavelengths must be positive.
    """

    value: float
    unit: str

    def __post_init__(self):
        if self.unit not in ENERGY_UNITS:
            raise ValueError(f"unknown unit {self.unit!r}, expected one of {ENERGY_UNITS}")
        if not np.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value}")
        if self.unit == "nm" and self.value <= 0:
            raise ValueError(f"wavelength must be positive, got {self.value} nm")

    def to(self, unit: str) -> "EnergyQuantity":
        return convert(self, unit)

    def in_unit(self, unit: str) -> float:
        """Numeric value of this quantity expressed in ``unit``."""
        return from_ev(to_ev(self.value, self.unit), unit)


def convert(q: EnergyQuantity, target_unit: str) -> EnergyQuantity:
    """Convert an :class:`EnergyQuantity` to another unit.

    Round-trips are exact to  better than 1e-9 relative: every conversion is a
    single multiply/divide through the canonical eV representation.
    """
    if target_unit == q.unit:
        return q
    return EnergyQuantity(from_ev(to_ev(q.value, q.unit), target_unit), target_unit)


@dataclass(frozen=True)
class Spectrum:
    """Sampled intensity versus wavelength with an instrument response width.

    wavelength_nm
        wavelength samples in nm, strictly increasing
    counts
        non-negative intensities (counts or counts/s), same length as the grid
    instrument_fwhm_ghz
        FWHM of the Gaussian spectrometer response
    """

    wavelength_nm: np.ndarray
    counts: np.ndarray
    instrument_fwhm_ghz: float

    def __post_init__(self):
        grid = np.asarray(self.wavelength_nm, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "wavelength_nm", grid)
        object.__setattr__(self, "counts", counts)
        if grid.ndim != 1 or counts.ndim != 1:
            raise ValueError("wavelength_nm and counts must be 1-d arrays")
        if len(grid) != len(counts):
            raise ValueError(f"wavelength_nm ({len(grid)}) and counts ({len(counts)}) length mismatch")
        if len(grid) >= 2 and not np.all(np.diff(grid) > 0):
            raise ValueError("wavelength grid must be strictly increasing")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.instrument_fwhm_ghz > 0:
            raise ValueError(f"instrument_fwhm_ghz must be > 0, got {self.instrument_fwhm_ghz}")

    @property
    def energy_ev(self) -> np.ndarray:
        """Sample energies in eV (descending order along the grid)."""
        return HC_EV_NM / self.wavelength_nm

    def __len__(self) -> int:
        return len(self.wavelength_nm)


@dataclass(frozen=True)
class PhotonRecord:
    """One detector click: timestamp in integer picoseconds plus channel index."""

    timestamp_ps: int
    channel: int


@dataclass(frozen=True)
class PhotonStream:
    """A time-ordered two-channel click record, the raw material of all
    photon-statistics analysis.

    Timestamps are integer picoseconds since acquisition start (64-bit; 1 ps
    resolution leaves no float drift over hours-long acquisitions).
    """

    timestamps_ps: np.ndarray
    channels: np.ndarray
    duration_s: float | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps_ps, dtype=np.int64)
        ch = np.asarray(self.channels, dtype=np.uint8)
        object.__setattr__(self, "timestamps_ps", ts)
        object.__setattr__(self, "channels", ch)
        if ts.shape != ch.shape:
            raise ValueError("timestamps and channels must have equal length")
        if len(ts) >= 2 and np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.timestamps_ps)

    def __iter__(self) -> Iterator[PhotonRecord]:
        for t, c in zip(self.timestamps_ps, self.channels):
            yield PhotonRecord(int(t), int(c))

    @property
    def span_s(self) -> float:
        """Acquisition span: declared duration, or first-to-last click time."""
        if self.duration_s is not None:
            return self.duration_s
        if len(self) < 2:
            return 0.0
        return float(self.timestamps_ps[-1] - self.timestamps_ps[0]) * 1e-12

    def channel_times_ps(self, channel: int) -> np.ndarray:
        return self.timestamps_ps[self.channels == channel]

    def channel_counts(self) -> tuple[int, int]:
        n1 = int(np.count_nonzero(self.channels))
        return len(self) - n1, n1
