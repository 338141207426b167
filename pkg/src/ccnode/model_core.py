"""Hamiltonians for a crossed-cavity single-photon node.

Two orthogonal single-mode cavities (labelled l and r) share their waists
with one atom.  Each cavity mode drives a ground-excited transition
|f_i> <-> |e_i| with coupling g_i, and two classical fields of Rabi
frequency Omega_i connect the excited states to a common ground state
|f_m>.  In a fixed photon-number sector (n_l, n_r) the lossless dynamics
closes on five amplitudes, ordered

    [ f_l(n_l+1, n_r), f_r(n_l, n_r+1), f_m(n_l, n_r), e_l, e_r ]

which is the basis used by every 5x5 matrix in this module.  All rates and
frequencies are quoted in units of the excited-state linewidth; time is in
units of the excited-state lifetime.

The module also provides the two adiabatic reductions (far-detuned
3-level form on [F_m, F_l, F_r] and the photonic 2x2 beam-splitter form on
[F_l, F_r]), the non-Hermitian loss prescription, and effective-linewidth
formulas for the photonic states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NodeParams",
    "SectorLabel",
    "DerivedCouplings",
    "sector_basis_labels",
    "build_full_matrix",
    "dark_state_full",
    "effective_three_level",
    "beam_splitter_hamiltonian",
    "apply_losses",
    "effective_linewidths",
]


@dataclass(frozen=True)
class NodeParams:
    """Physical constants of one node at an instant in time.

    Couplings g and Omega may carry phases (complex); detunings and decay
    rates are real.  kappa_* are cavity photon loss rates, gamma_* the
    excited-state spontaneous-emission rates; both are population rates.
    """

    g_l: complex = 0.0
    g_r: complex = 0.0
    omega_l: complex = 0.0
    omega_r: complex = 0.0
    delta_l: float = 0.0
    delta_r: float = 0.0
    delta_gl: float = 0.0  # two-photon (Raman) detuning, l arm
    delta_gr: float = 0.0  # two-photon (Raman) detuning, r arm
    kappa_l: float = 0.0
    kappa_r: float = 0.0
    gamma_l: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self):
        for name in ("kappa_l", "kappa_r", "gamma_l", "gamma_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class SectorLabel:
    """Photon-number sector (n_l, n_r) in which the 5-level matrix is built.

    The cavity couplings scale as sqrt(n+1) with the sector photon number;
    dynamics are only ever run in the single-excitation sector (0, 0), but
    the matrix builder supports any sector.
    """

    n_l: int = 0
    n_r: int = 0

    def __post_init__(self):
        if self.n_l < 0 or self.n_r < 0:
            raise ValueError(f"photon numbers must be >= 0, got ({self.n_l}, {self.n_r})")


@dataclass(frozen=True)
class DerivedCouplings:
    """Second-order rates left after eliminating the excited states.

    s_l, s_r are the two-photon Rabi rates Omega_i* g_i / Delta_i that
    couple each photonic state to the intermediate ground state; stark_l,
    stark_r are the photonic light shifts |g_i|^2 / Delta_i; delta_m is the
    intermediate-state shift sum_j |Omega_j|^2 / Delta_j.
    """

    s_l: complex
    s_r: complex
    stark_l: float
    stark_r: float
    delta_m: float

    @classmethod
    def from_params(cls, p: NodeParams) -> "DerivedCouplings":
        if p.delta_l == 0 or p.delta_r == 0:
            raise ValueError("one-photon detunings must be nonzero for the adiabatic reduction")
        return cls(
            s_l=np.conj(p.omega_l) * p.g_l / p.delta_l,
            s_r=np.conj(p.omega_r) * p.g_r / p.delta_r,
            stark_l=abs(p.g_l) ** 2 / p.delta_l,
            stark_r=abs(p.g_r) ** 2 / p.delta_r,
            delta_m=abs(p.omega_l) ** 2 / p.delta_l + abs(p.omega_r) ** 2 / p.delta_r,
        )


def sector_couplings(p: NodeParams, sector: SectorLabel) -> tuple[complex, complex]:
    """Cavity couplings in a sector: g_i scaled by sqrt(n_i + 1)."""
    return (
        np.sqrt(sector.n_l + 1) * p.g_l,
        np.sqrt(sector.n_r + 1) * p.g_r,
    )


def sector_basis_labels(sector: SectorLabel = SectorLabel()) -> list[str]:
    """Ordered state labels of the 5-level sector basis."""
    nl, nr = sector.n_l, sector.n_r
    return [
        f"fl.{nl + 1}.{nr}",
        f"fr.{nl}.{nr + 1}",
        f"fm.{nl}.{nr}",
        f"el.{nl}.{nr}",
        f"er.{nl}.{nr}",
    ]


def build_full_matrix(p: NodeParams, sector: SectorLabel = SectorLabel()) -> np.ndarray:
    """Full 5x5 generator of the sector dynamics, i dA/dt = M A.

    Diagonal carries (delta_gl, delta_gr, 0, -delta_l, -delta_r); the
    cavity couplings connect each photonic state to its excited state and
    the classical fields connect f_m to both excited states.  Hermitian
    whenever the parameters are lossless.
    """
    g_ln, g_rn = sector_couplings(p, sector)
    m = np.zeros((5, 5), dtype=complex)
    m[0, 0] = p.delta_gl
    m[1, 1] = p.delta_gr
    m[3, 3] = -p.delta_l
    m[4, 4] = -p.delta_r
    m[0, 3] = np.conj(g_ln)
    m[3, 0] = g_ln
    m[1, 4] = np.conj(g_rn)
    m[4, 1] = g_rn
    m[2, 3] = np.conj(p.omega_l)
    m[3, 2] = p.omega_l
    m[2, 4] = np.conj(p.omega_r)
    m[4, 2] = p.omega_r
    return m


def dark_state_full(p: NodeParams, sector: SectorLabel = SectorLabel()) -> np.ndarray:
    """Normalized dark state of the 5-level sector matrix.

    On Raman resonance (both two-photon detunings zero) the combination
    |f_m> - (Omega_l/g_ln)|f_l,n_l+1,n_r> - (Omega_r/g_rn)|f_r,n_l,n_r+1>
    carries no excited-state amplitude and is annihilated by the sector
    matrix.  Raises ValueError off Raman resonance or when either sector
    coupling vanishes (the amplitude ratios are then undefined).
    """
    if abs(p.delta_gl) > 1e-12 or abs(p.delta_gr) > 1e-12:
        raise ValueError("dark state requires Raman resonance (delta_gl = delta_gr = 0)")
    g_ln, g_rn = sector_couplings(p, sector)
    if g_ln == 0 or g_rn == 0:
        raise ValueError("dark state undefined when a sector cavity coupling is zero")
    vec = np.array([-p.omega_l / g_ln, -p.omega_r / g_rn, 1.0, 0.0, 0.0], dtype=complex)
    return vec / np.linalg.norm(vec)


def effective_three_level(p: NodeParams) -> np.ndarray:
    """3x3 generator on [F_m, F_l, F_r] after eliminating the excited states.

    Valid in the far-detuned limit.  Diagonal entries are the light shifts;
    the two-photon rates s_l, s_r couple each photonic state to F_m, and
    there is no direct F_l <-> F_r entry at this order.
    """
    d = DerivedCouplings.from_params(p)
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = d.delta_m
    h[1, 1] = d.stark_l
    h[2, 2] = d.stark_r
    h[0, 1] = d.s_l
    h[1, 0] = np.conj(d.s_l)
    h[0, 2] = d.s_r
    h[2, 0] = np.conj(d.s_r)
    return h


def beam_splitter_hamiltonian(p: NodeParams) -> np.ndarray:
    """2x2 photonic generator on [F_l, F_r] after also eliminating F_m.

    Entries follow the printed reduction: diagonal -|g_i|^2/Delta_i +
    |s_i|^2/delta_m and off-diagonal s_l* s_r / delta_m.  Note the diagonal
    sign is opposite to the light shifts of the 3-level form; the second
    elimination step flips the overall sign, which leaves populations of
    real-coupling protocols unchanged (conjugate evolution).  Requires both
    classical fields not simultaneously off (delta_m != 0).
    """
    d = DerivedCouplings.from_params(p)
    if d.delta_m == 0:
        raise ValueError(
            "beam-splitter reduction is singular when both classical fields are off (delta_m = 0)"
        )
    h = np.zeros((2, 2), dtype=complex)
    h[0, 0] = -d.stark_l + abs(d.s_l) ** 2 / d.delta_m
    h[1, 1] = -d.stark_r + abs(d.s_r) ** 2 / d.delta_m
    h[0, 1] = np.conj(d.s_l) * d.s_r / d.delta_m
    h[1, 0] = d.s_l * np.conj(d.s_r) / d.delta_m
    return h


def apply_losses(h: np.ndarray, p: NodeParams) -> np.ndarray:
    """Non-Hermitian loss prescription for the 5-level matrix.

    Subtracts i*kappa_i/2 from the photon-carrying diagonal entries and
    i*gamma_i/2 from the excited-state entries, so that populations decay
    at the quoted rates under i dA/dt = M A.  The intermediate ground state
    is not modified.  Returns a copy.
    """
    if h.shape != (5, 5):
        raise ValueError(f"expected a 5x5 sector matrix, got shape {h.shape}")
    out = np.array(h, dtype=complex, copy=True)
    out[0, 0] -= 0.5j * p.kappa_l
    out[1, 1] -= 0.5j * p.kappa_r
    out[3, 3] -= 0.5j * p.gamma_l
    out[4, 4] -= 0.5j * p.gamma_r
    return out


def effective_linewidths(p: NodeParams, variant: str = "physical") -> tuple[float, float]:
    """Effective decay rates (Gamma_l, Gamma_r) of the photonic states.

    Both variants share the first two terms: the bare cavity rate kappa_i
    plus spontaneous emission through the residual excited-state amplitude,
    (|g_i|^2/Delta_i^2) gamma_i.  They differ in the third term, the decay
    inherited through the intermediate ground state:

    * ``"physical"``: |s_i|^2 * Gamma_m / delta_m^2, where
      Gamma_m = sum_j |Omega_j|^2 gamma_j / Delta_j^2 is the width the
      classical fields give the intermediate state.  This follows from
      second-order elimination and is what numerical decay fits reproduce.
    * ``"as-printed"``: |Omega_i|^2 |g_i|^2 / (Delta_i^2 * Gamma_m).  This
      form places the intermediate width in the denominator and evaluates
      orders of magnitude too large at typical parameters; it is retained
      for comparison and never silently preferred.

    Raises ValueError for zero detunings or a singular denominator.
    """
    if p.delta_l == 0 or p.delta_r == 0:
        raise ValueError("effective linewidths require nonzero one-photon detunings")
    gamma_m = (
        abs(p.omega_l) ** 2 * p.gamma_l / p.delta_l**2
        + abs(p.omega_r) ** 2 * p.gamma_r / p.delta_r**2
    )
    base_l = p.kappa_l + abs(p.g_l) ** 2 / p.delta_l**2 * p.gamma_l
    base_r = p.kappa_r + abs(p.g_r) ** 2 / p.delta_r**2 * p.gamma_r
    if variant == "physical":
        d = DerivedCouplings.from_params(p)
        if d.delta_m == 0:
            if gamma_m == 0:
                return (base_l, base_r)  # no decay through a dark intermediate channel
            raise ValueError("intermediate-state shift delta_m = 0: third term is singular")
        extra_l = abs(d.s_l) ** 2 * gamma_m / d.delta_m**2
        extra_r = abs(d.s_r) ** 2 * gamma_m / d.delta_m**2
    elif variant == "as-printed":
        if gamma_m == 0:
            if p.omega_l == 0 and p.omega_r == 0 and p.gamma_l == 0 and p.gamma_r == 0:
                return (base_l, base_r)
            raise ValueError("as-printed third term is singular: denominator sum is zero")
        extra_l = abs(p.omega_l) ** 2 * abs(p.g_l) ** 2 / (p.delta_l**2 * gamma_m)
        extra_r = abs(p.omega_r) ** 2 * abs(p.g_r) ** 2 / (p.delta_r**2 * gamma_m)
    else:
        raise ValueError(f"unknown variant {variant!r}; use 'physical' or 'as-printed'")
    return (base_l + extra_l, base_r + extra_r)
