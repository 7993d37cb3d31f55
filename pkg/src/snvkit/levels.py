"""Electronic level structure of the emitter and closed-form photophysics.

Covers the four-line fine structure (spin-orbit split ground and excited
doublets), thermal population of the upper excited branch, the lifetime
(Fourier) limit of the linewidth, the Debye-Waller temperature law and the
polynomial line-broadening / line-shift laws.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .units import BOLTZMANN_EV_PER_K, PLANCK_EV_S, SPEED_OF_LIGHT_NM_GHZ


@dataclass(frozen=True)
class LevelStructure:
    """Optical level parameters of a single emitter.

    zpl_wavelength_nm anchors the C transition (lower excited state to lower
    ground state); splittings are the spin-orbit doublet separations.
    """

    zpl_wavelength_nm: float
    ground_splitting_ghz: float
    excited_splitting_ghz: float
    excited_lifetime_ns: float

    def __post_init__(self):
        for name in ("zpl_wavelength_nm", "ground_splitting_ghz",
                     "excited_splitting_ghz", "excited_lifetime_ns"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def zpl_frequency_ghz(self) -> float:
        return SPEED_OF_LIGHT_NM_GHZ / self.zpl_wavelength_nm


# Nominal single-emitter profile: 619.7 nm ZPL, 830 GHz ground and 3030 GHz
# excited splitting, 5 ns lifetime (deep, unperturbed emitters). Individual
# emitters scatter around these values; treat them as a starting point.
DEFAULT_LEVEL_STRUCTURE = LevelStructure(
    zpl_wavelength_nm=619.7,
    ground_splitting_ghz=830.0,
    excited_splitting_ghz=3030.0,
    excited_lifetime_ns=5.0,
)

# Sanity of the shipped default only; arbitrary user profiles may order the
# splittings either way.
assert DEFAULT_LEVEL_STRUCTURE.ground_splitting_ghz < DEFAULT_LEVEL_STRUCTURE.excited_splitting_ghz


def load_level_structure(source: str | Path | dict) -> LevelStructure:
    """Build a level structure from a JSON document, overriding the defaults.

    ``source`` may be a mapping, a path, or a bare profile name looked up as
    ``<name>.json`` in the directory given by the SNVKIT_CONFIG_DIR
    environment variable. Missing keys fall back to the default profile.
    """
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists() and path.suffix == "":
            config_dir = os.environ.get("SNVKIT_CONFIG_DIR")
            if config_dir:
                candidate = Path(config_dir) / f"{path.name}.json"
                if candidate.exists():
                    path = candidate
        doc = json.loads(Path(path).read_text())
    merged = {**asdict(DEFAULT_LEVEL_STRUCTURE), **doc}
    return LevelStructure(**merged)


def dump_level_structure(ls: LevelStructure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(asdict(ls), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class DWParams:
    """Debye-Waller law parameters: Huang-Rhys factor and phonon cutoff."""

    huang_rhys_s: float
    t_cutoff_k: float

    def __post_init__(self):
        if self.huang_rhys_s < 0:
            raise ValueError(f"huang_rhys_s must be >= 0, got {self.huang_rhys_s}")
        if not self.t_cutoff_k > 0:
            raise ValueError(f"t_cutoff_k must be > 0, got {self.t_cutoff_k}")

    @property
    def dw0(self) -> float:
        """Zero-temperature Debye-Waller factor, exp(-S)."""
        return math.exp(-self.huang_rhys_s)

    @property
    def phonon_energy_mev(self) -> float:
        """Effective phonon energy k_B * T_cutoff in meV."""
        return BOLTZMANN_EV_PER_K * self.t_cutoff_k * 1e3


@dataclass(frozen=True)
class LinewidthLaw:
    """Polynomial broadening law Gamma(T) = gamma0 + c1 T + c3 T^3 (GHz).

    The linear term is kept for completeness but defaults to zero: it only
    matters for high-resolution measurements at very low temperature.
    """

    gamma0_ghz: float
    c_linear_ghz_per_k: float = 0.0
    c_cubic_ghz_per_k3: float = 0.0

    def __post_init__(self):
        for name in ("gamma0_ghz", "c_linear_ghz_per_k", "c_cubic_ghz_per_k3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class ShiftLaw:
    """Line-shift law Delta(T) = alpha T^2 + beta T^4 (GHz).

    Coefficient signs are fit outputs (red shifts are negative); only
    finiteness is required.
    """

    alpha_quadratic_ghz_per_k2: float = 0.0
    beta_quartic_ghz_per_k4: float = 0.0

    def __post_init__(self):
        for name in ("alpha_quadratic_ghz_per_k2", "beta_quartic_ghz_per_k4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def boltzmann_upper_fraction(ls: LevelStructure, temperature_k: float) -> float:
    """Thermal population ratio of the upper to the lower excited state.

    Returns exp(-h * excited_splitting / (k_B T)); in (0, 1], monotone
    increasing in T. The upper doublet branch only lights up once this
    ratio becomes appreciable.
    """
    if not temperature_k > 0:
        raise ValueError(f"temperature must be > 0 K, got {temperature_k}")
    de_ev = PLANCK_EV_S * ls.excited_splitting_ghz * 1e9
    return math.exp(-de_ev / (BOLTZMANN_EV_PER_K * temperature_k))


def transition_table(ls: LevelStructure) -> dict[str, float]:
    """Absolute optical frequencies (GHz) of the four fine-structure lines.

    Labels follow the usual convention: C and D from the lower excited state
    into the two ground states, A and B from the upper excited state. C is
    anchored at the ZPL wavelength; C - D equals the ground splitting, and
    A (B) sits one excited splitting above C (D). D is always the lowest line.
    """
    nu_c = ls.zpl_frequency_ghz
    nu_d = nu_c - ls.ground_splitting_ghz
    return {
        "A": nu_c + ls.excited_splitting_ghz,
        "B": nu_d + ls.excited_splitting_ghz,
        "C": nu_c,
        "D": nu_d,
    }


def fourier_limit(lifetime_ns: float) -> float:
    """Lifetime-limited linewidth FWHM in MHz, 1 / (2 pi tau)."""
    if not lifetime_ns > 0:
        raise ValueError(f"lifetime must be > 0 ns, got {lifetime_ns}")
    return 1e3 / (2.0 * math.pi * lifetime_ns)


def _temperature_array(temperature_k):
    t = np.asarray(temperature_k, dtype=float)
    if np.any(t < 0):
        raise ValueError(f"temperature must be >= 0 K, got {temperature_k}")
    return t


def dw_factor(p: DWParams, temperature_k) -> float | np.ndarray:
    """Debye-Waller factor DW(T) = exp(-S (1 + (2 pi^2 / 3) T^2 / T_cutoff^2)).

    DW(0) = exp(-S); strictly decreasing in T for S > 0. Accepts a scalar
    temperature or an array.
    """
    t = _temperature_array(temperature_k)
    ratio = t / p.t_cutoff_k
    out = np.exp(-p.huang_rhys_s * (1.0 + (2.0 * math.pi ** 2 / 3.0) * ratio ** 2))
    return out.item() if out.ndim == 0 else out


def linewidth_at(law: LinewidthLaw, temperature_k) -> float | np.ndarray:
    """Evaluate the broadening law at T (GHz)."""
    t = _temperature_array(temperature_k)
    out = law.gamma0_ghz + law.c_linear_ghz_per_k * t + law.c_cubic_ghz_per_k3 * t ** 3
    return out.item() if out.ndim == 0 else out


def lineshift_at(law: ShiftLaw, temperature_k) -> float | np.ndarray:
    """Evaluate the shift law at T (GHz); exactly zero at T = 0."""
    t = _temperature_array(temperature_k)
    out = law.alpha_quadratic_ghz_per_k2 * t ** 2 + law.beta_quartic_ghz_per_k4 * t ** 4
    return out.item() if out.ndim == 0 else out


def cutoff_phonon_energy_mev(t_cutoff_k: float) -> float:
    """Effective phonon energy of a cutoff temperature, k_B * T in meV."""
    return BOLTZMANN_EV_PER_K * t_cutoff_k * 1e3


__all__ = [
    "LevelStructure",
    "DEFAULT_LEVEL_STRUCTURE",
    "load_level_structure",
    "dump_level_structure",
    "DWParams",
    "LinewidthLaw",
    "ShiftLaw",
    "boltzmann_upper_fraction",
    "transition_table",
    "fourier_limit",
    "dw_factor",
    "linewidth_at",
    "lineshift_at",
    "cutoff_phonon_energy_mev",
]
