"""Material constants, temperature models, diffusivity and driving force.

Stress diffusion is governed by the diffusivity kappa = D_a * B * Omega / (k*T)
with the Arrhenius atomic diffusion coefficient D_a = D0 * exp(-E_a / (k*T)).
Three temperature scenarios are supported:

  I    constant temperature,
  II   time-varying underlying-layer temperature T0(t),
  III  T0(t) plus a cosh-shaped Joule-heating profile per segment whose
       ends are pinned to T0(t) by the via heat-dissipation paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Segment

EV = 1.6e-19  # J per eV, consistent with the elementary charge used below


@dataclass(frozen=True)
class MaterialParams:
    """Copper material/EM constants.  Defaults are the typical values used
    throughout the experiments."""

    boltzmann: float = 1.38e-23        # J/K
    charge: float = 1.6e-19            # C
    z_eff: float = 10.0                # effective valence charge |Z*|
    activation_energy: float = 1.1 * EV  # J
    bulk_modulus: float = 1e11         # Pa
    d0: float = 5.2e-5                 # m^2/s self-diffusion coefficient
    resistivity: float = 3e-8          # Ohm m
    atomic_volume: float = 8.78e-30    # m^3
    critical_stress: float = 4e8       # Pa
    atoms_per_volume: float = 1.0      # cancels from all BC/loss ratios

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError(f"MaterialParams.{name} must be > 0")


@dataclass(frozen=True)
class ThermalModel:
    """One of the three temperature cases.

    Case I uses ``t_const``.  Cases II/III use
    ``T0(t) = t0_mean + t0_amplitude * sin(t0_omega * t)``.
    Case III additionally needs the Joule/ILD parameters; ``k_m`` is the
    metal thermal conductivity (not fixed by the experiment tables;
    400 W/(m K) is the standard copper value).
    """

    case: str = "I"
    t_const: float = 350.0
    t0_mean: float = 350.0
    t0_amplitude: float = 30.0
    t0_omega: float = 4e-8 * math.pi
    k_m: float = 400.0      # W/(m K)
    k_ild: float = 1.2      # W/(m K)
    t_ild: float = 0.8e-6   # m
    h_ild: float = 0.8e-6   # m

    def __post_init__(self):
        if self.case not in ("I", "II", "III"):
            raise ValueError(f"unknown thermal case {self.case!r}")

    def t0(self, t):
        """Underlying-layer temperature."""
        if self.case == "I":
            return self.t_const * np.ones_like(np.asarray(t, dtype=float))
        return self.t0_mean + self.t0_amplitude * np.sin(self.t0_omega * np.asarray(t, dtype=float))


def em_driving_force(params: MaterialParams, j: float) -> float:
    """EM driving force G = |Z*| e rho j / Omega, signed like j (Pa/m)."""
    return params.z_eff * params.charge * params.resistivity * j / params.atomic_volume


def arrhenius_diffusion(params: MaterialParams, T):
    """Effective atomic diffusion coefficient D_a(T) (m^2/s)."""
    T = np.asarray(T, dtype=float)
    return params.d0 * np.exp(-params.activation_energy / (params.boltzmann * T))


def kappa(params: MaterialParams, T):
    """Stress diffusivity kappa(T) = D_a B Omega / (k T) (m^2/s)."""
    T = np.asarray(T, dtype=float)
    return (
        arrhenius_diffusion(params, T)
        * params.bulk_modulus
        * params.atomic_volume
        / (params.boltzmann * T)
    )


def heat_spreading_factor(thermal: ThermalModel, segment: Segment) -> float:
    """Dimensionless heat spreading factor s of the ILD geometry."""
    w, d, t_ild = segment.width, segment.spacing, thermal.t_ild
    inner = (w / t_ild) * (0.5 * math.log((w + d) / w) + (t_ild - d / 2) / (w + d))
    return 1.0 / inner


def healing_length(thermal: ThermalModel, segment: Segment) -> float:
    """Joule-heat healing length L_H (m).  Case III only."""
    if thermal.case != "III":
        raise ValueError("healing_length requires a Case III thermal model")
    s = heat_spreading_factor(thermal, segment)
    return math.sqrt(thermal.k_m * thermal.h_ild / (thermal.k_ild * s))


def temperature(
    thermal: ThermalModel,
    segment: Segment,
    x_local,
    t,
    params: MaterialParams | None = None,
):
    """Temperature at a segment-centered coordinate x_local in [-L/2, L/2].

    Case III adds the cosh-shaped Joule-heating rise (which needs the
    metal resistivity from ``params``); the rise vanishes at both segment
    ends because the vias pin the nodes to T0(t).
    """
    return temperature_with_params(
        thermal, params if params is not None else MaterialParams(), segment, x_local, t
    )


def kappa_and_gradient(
    thermal: ThermalModel,
    params: MaterialParams,
    segment: Segment,
    x_local,
    t,
):
    """kappa and its spatial derivative along the segment-local axis.

    ``x_local`` is segment-centered.  dkappa/dx is exactly zero in Cases
    I/II; in Case III it follows the chain rule through the cosh profile.
    """
    T = temperature_with_params(thermal, params, segment, x_local, t)
    k = kappa(params, T)
    x = np.asarray(x_local, dtype=float)
    if thermal.case != "III":
        return k, np.zeros(np.broadcast(x, k).shape)
    lh = healing_length(thermal, segment)
    j_rms = abs(segment.current_density)
    dTdx = (
        -(j_rms**2 * params.resistivity * lh / thermal.k_m)
        * np.sinh(x / lh)
        / math.cosh(segment.length / (2 * lh))
    )
    kT = params.boltzmann * T
    dkdT = k * (params.activation_energy / (kT * T) - 1.0 / T)
    return k, dkdT * dTdx


def temperature_with_params(
    thermal: ThermalModel, params: MaterialParams, segment: Segment, x_local, t
):
    """Like :func:`temperature` but taking the resistivity from ``params``."""
    x = np.asarray(x_local, dtype=float)
    if thermal.case == "I":
        return thermal.t_const * np.ones(np.broadcast(x, np.asarray(t)).shape)
    base = thermal.t0(t)
    if thermal.case == "II":
        return base * np.ones_like(x * np.ones_like(base))
    lh = healing_length(thermal, segment)
    j_rms = abs(segment.current_density)
    amp = j_rms**2 * params.resistivity * lh**2 / thermal.k_m
    profile = 1.0 - np.cosh(x / lh) / math.cosh(segment.length / (2 * lh))
    return base + amp * profile


def atomic_flux(params: MaterialParams, kappa_val, dsdx, G):
    """Atomic flux J = (D_a C Omega / kT)(dsigma/dx + G), expressed through
    kappa as (C / B) * kappa * (dsigma/dx + G)."""
    return (params.atoms_per_volume / params.bulk_modulus) * kappa_val * (
        np.asarray(dsdx, dtype=float) + G
    )
