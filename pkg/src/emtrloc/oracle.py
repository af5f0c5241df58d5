"""Closed-form single-line transfer functions used to validate the simulator.

For a uniform lossless line observed at one end through a resistive
termination, the observed fault transient, the back-injected guess-branch
current, and the broadband guess-branch energy all have closed frequency-
domain forms.  They are deliberately computed by a different route than the
time-domain simulator (complex transfer functions on the discrete transform
grid instead of leapfrog time stepping) so the two can cross-check each
other.

Time reversal appears here as spectrum conjugation: reversing a real
waveform's samples conjugates its discrete spectrum up to the linear phase
factor ``exp(2*pi*j*k/N)`` from index reversal, which has unit magnitude and
therefore never affects energy sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LineParams, characteristic_impedance, propagation_speed

__all__ = [
    "SingularFrequencyError",
    "SingleLineSetup",
    "EnergyCurve",
    "reflection_coefficient",
    "observed_voltage_spectrum",
    "guess_current_spectrum",
    "analytic_energy_curve",
]

_SINGULAR_TOL = 1e-12


class SingularFrequencyError(ArithmeticError):
    """A transfer-function denominator vanished at an evaluated frequency."""


@dataclass(frozen=True)
class SingleLineSetup:
    """Lossless single line terminated in Z0 at the observed end (x = 0)."""

    params: LineParams
    length: float  # m
    terminal_impedance: float  # ohm, Z0 at the observation end
    fault_position: float  # m, x_f

    def __post_init__(self):
        if self.params.resistance_per_m != 0.0:
            raise ValueError("oracle setup requires a lossless line (R = 0)")
        if not 0 < self.fault_position < self.length:
            raise ValueError("fault position must lie strictly inside the line")
        if not self.terminal_impedance > 0:
            raise ValueError("terminal impedance must be > 0")

    @property
    def speed(self) -> float:
        return propagation_speed(self.params)

    @property
    def surge_impedance(self) -> float:
        return characteristic_impedance(self.params)

    @property
    def rho0(self) -> float:
        return reflection_coefficient(self.terminal_impedance, self.surge_impedance)


def reflection_coefficient(z0: float, zc: float) -> float:
    """(Z0 - Zc) / (Z0 + Zc); in (-1, 1) for positive impedances."""
    if not (z0 > 0 and zc > 0):
        raise ValueError("impedances must be > 0")
    return (z0 - zc) / (z0 + zc)


def observed_voltage_spectrum(setup: SingleLineSetup, omega, uf):
    """Observed-end voltage spectrum for a fault-point source spectrum ``uf``.

    Transfer: ``(1 + rho0) exp(-g x_f) / (1 + rho0 exp(-2 g x_f))`` with
    ``g = j*omega/c``.  Scalar or array ``omega``; raises on near-singular
    denominators rather than returning unusable magnitudes.
    """
    omega = np.asarray(omega, dtype=float)
    rho = setup.rho0
    g = 1j * omega / setup.speed
    den = 1.0 + rho * np.exp(-2.0 * g * setup.fault_position)
    bad = np.abs(den) < _SINGULAR_TOL
    if np.any(bad):
        raise SingularFrequencyError(
            f"{int(np.count_nonzero(bad))} singular frequency bin(s) in Eq-form denominator"
        )
    return (1.0 + rho) * np.exp(-g * setup.fault_position) / den * uf


def guess_current_spectrum(setup: SingleLineSetup, x_guess: float, omega, uf_conj):
    """Guess-branch current spectrum for a guess at ``x_guess``.

    ``uf_conj`` is the conjugated fault spectrum: conjugation is the
    frequency-domain image of time reversal (up to a unit-magnitude linear
    phase, see module docstring).
    """
    if not 0 < x_guess < setup.length:
        raise ValueError("guess position must lie strictly inside the line")
    omega = np.asarray(omega, dtype=float)
    rho = setup.rho0
    z0 = setup.terminal_impedance
    g = 1j * omega / setup.speed
    den_guess = 1.0 + rho * np.exp(-2.0 * g * x_guess)
    den_fault = 1.0 + rho * np.exp(2.0 * g * setup.fault_position)
    bad = (np.abs(den_guess) < _SINGULAR_TOL) | (np.abs(den_fault) < _SINGULAR_TOL)
    if np.any(bad):
        raise SingularFrequencyError(
            f"{int(np.count_nonzero(bad))} singular frequency bin(s) in current denominator"
        )
    num = (1.0 + rho) ** 2 * np.exp(-g * (x_guess - setup.fault_position))
    return num / (z0 * den_guess * den_fault) * uf_conj


@dataclass(frozen=True)
class EnergyCurve:
    """Broadband guess-branch energy against guessed position."""

    positions: np.ndarray  # m
    energies: np.ndarray  # A^2*us
    excluded_bins: np.ndarray  # singular bins dropped per position

    @property
    def argmax_position(self) -> float:
        return float(self.positions[int(np.argmax(self.energies))])


def analytic_energy_curve(setup: SingleLineSetup, fault_spectrum: np.ndarray,
                          dt: float, x_grid: np.ndarray) -> EnergyCurve:
    """Parseval energy of the guess-branch current for each guessed position.

    ``fault_spectrum`` is the full complex DFT of the fault-point transient
    sampled at ``dt``; the frequency grid is the matching DFT grid, so values
    are directly comparable with time-domain energies of length-N records:
    ``E = (dt / N) * sum_k |I_k|^2``, reported in A^2*us.  Bins where either
    denominator falls below 1e-12 in magnitude are excluded and counted.
    """
    spectrum = np.asarray(fault_spectrum, dtype=complex)
    n = spectrum.size
    omega = 2.0 * np.pi * np.fft.fftfreq(n, dt)
    rho = setup.rho0
    z0 = setup.terminal_impedance
    g = 1j * omega / setup.speed
    den_fault = 1.0 + rho * np.exp(2.0 * g * setup.fault_position)
    uf_conj = np.conj(spectrum)
    energies = np.empty(len(x_grid))
    excluded = np.zeros(len(x_grid), dtype=int)
    for i, xg in enumerate(np.asarray(x_grid, dtype=float)):
        den_guess = 1.0 + rho * np.exp(-2.0 * g * xg)
        cur = ((1.0 + rho) ** 2 * np.exp(-g * (xg - setup.fault_position))
               / (z0 * den_guess * den_fault) * uf_conj)
        bad = (np.abs(den_guess) < _SINGULAR_TOL) | (np.abs(den_fault) < _SINGULAR_TOL)
        if np.any(bad):
            excluded[i] = int(np.count_nonzero(bad))
            cur = np.where(bad, 0.0, cur)
        energies[i] = np.sum(np.abs(cur) ** 2) * dt / n * 1e6
    return EnergyCurve(np.asarray(x_grid, dtype=float), energies, excluded)
