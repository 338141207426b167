"""Two fiber-coupled nodes in the single-excitation sector.

After eliminating the atomic excited states, each node is a 3-level
system (photon in the l cavity, photon in the r cavity, intermediate
ground state) characterized by its two-photon rates s_kl, s_kr, the
photonic Stark shift delta_k and the intermediate shift delta_km.  A
single fiber mode couples the l cavities of both nodes with amplitude w.

With one excitation shared between atoms, cavities and fiber, the state
space has 20 basis vectors.  Per-node states are abbreviated

    l = atom in f_l, no photon        r = atom in f_r, no photon
    Fl = f_l + photon in cavity l     Fr = f_r + photon in cavity r
    Fm = f_m, no photon
    u = f_l + photon in cavity r      v = f_r + photon in cavity l

and a two-node basis vector is written node1.node2.f<n> with n the fiber
photon number.  The fixed ordering of the 20 states, and the exact
couplings encoded by :func:`build_matrix_from_params`, follow the
equations of motion:

    i dA_1,2   = delta_1 A_1,2 + s_1l A_5,6 + w A_13,14
    i dA_3,4   = delta_1 A_3,4 + s_1r A_5,6
    i dA_5,6   = s_1l* A_1,2 + s_1r* A_3,4 + delta_1m A_5,6
    i dA_7,8   = delta_2 A_7,8 + s_2l A_11,12 + w A_13,15
    i dA_9,10  = delta_2 A_9,10 + s_2r A_11,12
    i dA_11,12 = s_2l* A_7,8 + s_2r* A_9,10 + delta_2m A_11,12
    i dA_13    = w (A_1 + A_7)
    i dA_14,15,16 = w (A_2,8,19 + A_17,18,20)
    i dA_17,18 = w A_14,15
    i dA_19,20 = w A_16

States 16, 19 and 20 couple only among themselves, so any protocol that
starts without weight there never populates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model_core import NodeParams
from .propagator import (
    Generator,
    IntegratorControl,
    Trajectory,
    _channel_term,
    _eval_channel,
    _pack_channels,
    integrate,
)
from .pulses import ParameterFrame, PulseProtocol

__all__ = [
    "TwoNodeBasisState",
    "TWO_NODE_BASIS",
    "TWO_NODE_LABELS",
    "basis_index",
    "basis_state",
    "TwoNodeParams",
    "build_matrix_from_params",
    "build_two_node_matrix",
    "dark_states_two_node",
    "two_node_generator",
    "run_protocol_two_node",
]


@dataclass(frozen=True)
class TwoNodeBasisState:
    """One basis vector: per-node states plus the fiber photon number."""

    index: int  # 1-based position in the fixed ordering
    node1: str
    node2: str
    fiber: int

    @property
    def label(self) -> str:
        return f"{self.node1}.{self.node2}.f{self.fiber}"


_BASIS_SPEC = [
    ("Fl", "l", 0), ("Fl", "r", 0),
    ("Fr", "l", 0), ("Fr", "r", 0),
    ("Fm", "l", 0), ("Fm", "r", 0),
    ("l", "Fl", 0), ("r", "Fl", 0),
    ("l", "Fr", 0), ("r", "Fr", 0),
    ("l", "Fm", 0), ("r", "Fm", 0),
    ("l", "l", 1), ("l", "r", 1),
    ("r", "l", 1), ("r", "r", 1),
    ("l", "v", 0), ("v", "l", 0),
    ("r", "v", 0), ("v", "r", 0),
]

TWO_NODE_BASIS: tuple[TwoNodeBasisState, ...] = tuple(
    TwoNodeBasisState(index=i + 1, node1=a, node2=b, fiber=n)
    for i, (a, b, n) in enumerate(_BASIS_SPEC)
)

TWO_NODE_LABELS: tuple[str, ...] = tuple(s.label for s in TWO_NODE_BASIS)

_LABEL_TO_INDEX = {s.label: s.index for s in TWO_NODE_BASIS}


def basis_state(index: int) -> TwoNodeBasisState:
    """Basis state by its 1-based index."""
    if not 1 <= index <= 20:
        raise ValueError(f"basis index must be in 1..20, got {index}")
    return TWO_NODE_BASIS[index - 1]


def basis_index(label: str) -> int:
    """1-based index of a basis label like 'Fr.l.f0'."""
    try:
        return _LABEL_TO_INDEX[label]
    except KeyError:
        raise ValueError(f"unknown two-node basis label {label!r}") from None


@dataclass(frozen=True)
class TwoNodeParams:
    """Reduced couplings of both nodes plus the fiber amplitude.

    delta_k is the common photonic Stark shift of node k (the reduction
    assumes the two arms of a node are equally shifted, which holds for
    the transit-driven protocols where one atom crosses both waists).
    """

    s_1l: complex = 0.0
    s_1r: complex = 0.0
    s_2l: complex = 0.0
    s_2r: complex = 0.0
    delta_1: float = 0.0
    delta_2: float = 0.0
    delta_1m: float = 0.0
    delta_2m: float = 0.0
    w: float = 0.0

    @classmethod
    def from_frame(cls, frame: ParameterFrame) -> "TwoNodeParams":
        if frame.node2 is None:
            raise ValueError("two-node parameters require a frame carrying both nodes")
        vals = {}
        for k, node in ((1, frame.node1), (2, frame.node2)):
            vals[f"s_{k}l"], vals[f"s_{k}r"], vals[f"delta_{k}"], vals[f"delta_{k}m"] = (
                _reduced_node(node)
            )
        return cls(w=frame.w, **vals)


def _reduced_node(p: NodeParams) -> tuple[complex, complex, float, float]:
    """(s_l, s_r, delta, delta_m) of one node from its instantaneous params."""
    if p.delta_l == 0 or p.delta_r == 0:
        raise ValueError("two-node reduction requires nonzero one-photon detunings")
    s_l = np.conj(p.omega_l) * p.g_l / p.delta_l
    s_r = np.conj(p.omega_r) * p.g_r / p.delta_r
    delta = abs(p.g_l) ** 2 / p.delta_l  # equal-shift assumption; l arm is representative
    delta_m = abs(p.omega_l) ** 2 / p.delta_l + abs(p.omega_r) ** 2 / p.delta_r
    return s_l, s_r, float(delta), float(delta_m)


def build_matrix_from_params(p: TwoNodeParams) -> np.ndarray:
    """20x20 generator of i dA/dt = M A, exactly as listed in the module doc."""
    m = np.zeros((20, 20), dtype=complex)

    def couple(i: int, j: int, value: complex):
        m[i - 1, j - 1] = value
        m[j - 1, i - 1] = np.conj(value)

    # node-1 block (states 1..6, paired by the node-2 spectator l/r)
    for a, b, c in ((1, 3, 5), (2, 4, 6)):
        m[a - 1, a - 1] = p.delta_1
        m[b - 1, b - 1] = p.delta_1
        m[c - 1, c - 1] = p.delta_1m
        couple(a, c, p.s_1l)
        couple(b, c, p.s_1r)
    # node-2 block (states 7..12)
    for a, b, c in ((7, 9, 11), (8, 10, 12)):
        m[a - 1, a - 1] = p.delta_2
        m[b - 1, b - 1] = p.delta_2
        m[c - 1, c - 1] = p.delta_2m
        couple(a, c, p.s_2l)
        couple(b, c, p.s_2r)
    # fiber couplings
    couple(13, 1, p.w)
    couple(13, 7, p.w)
    couple(14, 2, p.w)
    couple(14, 17, p.w)
    couple(15, 8, p.w)
    couple(15, 18, p.w)
    couple(16, 19, p.w)
    couple(16, 20, p.w)
    return m


def build_two_node_matrix(frame: ParameterFrame) -> np.ndarray:
    """20x20 generator from an instantaneous parameter frame of both nodes."""
    return build_matrix_from_params(TwoNodeParams.from_frame(frame))


def dark_states_two_node(p: TwoNodeParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three degenerate zero-energy states at delta_1 = delta_2 = 0.

    Written on the fixed basis (1-based indices):

        D3 on {2, 4, 17}:    |2> - (s_1l/s_1r)|4> - |17>
        D4 on {8, 10, 18}:   |8> - (s_2l/s_2r)|10> - |18>
        D5 on {1, 3, 7, 9}:  |1> - (s_1l/s_1r)|3> - |7> + (s_2l/s_2r)|9>

    Each is returned normalized.  They are annihilated by the assembled
    matrix for any fiber coupling w, which requires vanishing photonic
    Stark shifts and real couplings; both are enforced here.
    """
    if abs(p.delta_1) > 1e-12 or abs(p.delta_2) > 1e-12:
        raise ValueError("dark states require delta_1 = delta_2 = 0")
    for name in ("s_1l", "s_1r", "s_2l", "s_2r"):
        if abs(complex(getattr(p, name)).imag) > 1e-12:
            raise ValueError("dark states are stated for real couplings")
    if p.s_1r == 0 or p.s_2r == 0:
        raise ValueError("dark states undefined for vanishing s_1r or s_2r")

    r1 = complex(p.s_1l).real / complex(p.s_1r).real
    r2 = complex(p.s_2l).real / complex(p.s_2r).real

    d3 = np.zeros(20, dtype=complex)
    d3[1] = 1.0
    d3[3] = -r1
    d3[16] = -1.0

    d4 = np.zeros(20, dtype=complex)
    d4[7] = 1.0
    d4[9] = -r2
    d4[17] = -1.0

    d5 = np.zeros(20, dtype=complex)
    d5[0] = 1.0
    d5[2] = -r1
    d5[6] = -1.0
    d5[8] = r2

    return tuple(v / np.linalg.norm(v) for v in (d3, d4, d5))


def two_node_generator(proto: PulseProtocol) -> Generator:
    """Fast frame-sampled 20x20 generator for a two-node protocol."""
    if not proto.is_two_node:
        raise ValueError("protocol does not carry a second node")
    terms = []
    inv_deltas = []
    for node in (proto.node1, proto.node2):
        s = node.static
        if s.delta_l == 0 or s.delta_r == 0:
            raise ValueError("two-node reduction requires nonzero one-photon detunings")
        terms.append(tuple(_channel_term(ch) for ch in (node.g_l, node.g_r, node.omega_l, node.omega_r)))
        inv_deltas.append((1.0 / s.delta_l, 1.0 / s.delta_r))
    w = proto.w

    m = np.zeros((20, 20), dtype=complex)
    # static fiber entries
    for i, j in ((13, 1), (13, 7), (14, 2), (14, 17), (15, 8), (15, 18), (16, 19), (16, 20)):
        m[i - 1, j - 1] = w
        m[j - 1, i - 1] = w

    node_slots = (
        ((1, 3, 5), (2, 4, 6)),
        ((7, 9, 11), (8, 10, 12)),
    )

    def gen(t: float) -> np.ndarray:
        for k in range(2):
            g_l = _eval_channel(terms[k][0], t)
            g_r = _eval_channel(terms[k][1], t)
            om_l = _eval_channel(terms[k][2], t)
            om_r = _eval_channel(terms[k][3], t)
            inv_dl, inv_dr = inv_deltas[k]
            s_l = np.conj(om_l) * g_l * inv_dl
            s_r = np.conj(om_r) * g_r * inv_dr
            delta = abs(g_l) ** 2 * inv_dl  # equal-shift assumption, l arm representative
            delta_m = abs(om_l) ** 2 * inv_dl + abs(om_r) ** 2 * inv_dr
            for a, b, c in node_slots[k]:
                m[a - 1, a - 1] = delta
                m[b - 1, b - 1] = delta
                m[c - 1, c - 1] = delta_m
                m[a - 1, c - 1] = s_l
                m[c - 1, a - 1] = np.conj(s_l)
                m[b - 1, c - 1] = s_r
                m[c - 1, b - 1] = np.conj(s_r)
        return m

    flat_terms = tuple(t for node_terms in terms for t in node_terms)
    aux = np.array([d for pair in inv_deltas for d in pair])
    gen.channel_spec = (1, _pack_channels(flat_terms), aux, m.copy())
    return gen


def run_protocol_two_node(
    proto: PulseProtocol,
    psi0: Sequence[complex] | np.ndarray,
    control: Optional[IntegratorControl] = None,
) -> Trajectory:
    """Integrate the 20-state system over a two-node protocol.

    psi0 must be normalized (within 1e-9); populations of all 20 labels
    are recorded at the output cadence.
    """
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.size != 20:
        raise ValueError(f"two-node state must have 20 amplitudes, got {psi0.size}")
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"initial state must be normalized, |psi| = {nrm:.6g}")
    gen = two_node_generator(proto)
    return integrate(
        gen, psi0, proto.t_start, proto.t_end, control=control, basis=TWO_NODE_LABELS
    )
