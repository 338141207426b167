"""Time-dependent parameter channels and protocol sampling.

Every dynamical quantity of a protocol (classical Rabi amplitudes, the
transit-modulated cavity couplings, the fiber coupling) is described by a
profile object that can be evaluated at any time.  A protocol bundles the
profiles of one or two nodes together with the static detunings and decay
rates, and sampling it at time t yields the instantaneous ``NodeParams``
per node plus the fiber coupling, ready for the matrix builders.

Shapes are Gaussian or constant.  An atom crossing the cavity waist at
dimensionless speed nu produces a Gaussian coupling envelope whose width
is K/nu with K a fixed waist constant; the default K = 100 makes nu = 10
correspond to a coupling width of 10 lifetimes.  Profiles are treated as
exactly zero beyond 8 sigma from their center, which truncates below
1e-14 of the peak and gives every protocol a finite support window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .model_core import NodeParams

__all__ = [
    "PulseProfile",
    "TransitProfile",
    "Profile",
    "StaticNodeSettings",
    "NodeChannels",
    "PulseProtocol",
    "ParameterFrame",
    "NodePulseSpec",
    "eval_profile",
    "sample_protocol",
    "replace_transit_velocity",
    "splitter_protocol",
    "two_node_protocol",
    "stationary_transfer_protocol",
    "velocity_to_physical",
    "DEFAULT_WAIST_CONSTANT",
    "SUPPORT_SIGMAS",
]

DEFAULT_WAIST_CONSTANT = 100.0
SUPPORT_SIGMAS = 8.0  # beyond this many sigmas a profile is exactly zero


@dataclass(frozen=True)
class PulseProfile:
    """Gaussian or constant envelope for one parameter channel."""

    amplitude: complex
    center: float = 0.0
    width: float = 1.0  # Gaussian sigma, in lifetimes
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape not in ("gaussian", "constant"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.shape == "gaussian" and not self.width > 0:
            raise ValueError(f"gaussian width must be > 0, got {self.width}")


@dataclass(frozen=True)
class TransitProfile:
    """Cavity coupling seen by an atom crossing the waist at speed nu.

    The induced envelope is a Gaussian of width waist_const / velocity
    centered at the closest-approach time.
    """

    g0: complex
    velocity: float
    waist_const: float = DEFAULT_WAIST_CONSTANT
    center: float = 0.0

    def __post_init__(self):
        if not self.velocity > 0:
            raise ValueError(f"transit velocity must be > 0, got {self.velocity}")
        if not self.waist_const > 0:
            raise ValueError(f"waist constant must be > 0, got {self.waist_const}")

    @property
    def width(self) -> float:
        return self.waist_const / self.velocity


Profile = Union[PulseProfile, TransitProfile]


def eval_profile(prof: Optional[Profile], t: float) -> complex:
    """Instantaneous value of a channel; absent channels evaluate to 0."""
    if prof is None:
        return 0.0
    if isinstance(prof, PulseProfile):
        if prof.shape == "constant":
            return prof.amplitude
        peak = prof.amplitude
        u = (t - prof.center) / prof.width
    else:
        peak = prof.g0
        u = (t - prof.center) * prof.velocity / prof.waist_const
    if abs(u) > SUPPORT_SIGMAS:
        return 0.0
    return peak * math.exp(-0.5 * u * u)


def _support(prof: Optional[Profile]) -> Optional[tuple[float, float]]:
    """Finite support interval of a profile, or None if it has none."""
    if prof is None:
        return None
    if isinstance(prof, PulseProfile):
        if prof.shape == "constant":
            return None
        lo = prof.center - SUPPORT_SIGMAS * prof.width
        hi = prof.center + SUPPORT_SIGMAS * prof.width
    else:
        lo = prof.center - SUPPORT_SIGMAS * prof.width
        hi = prof.center + SUPPORT_SIGMAS * prof.width
    return (lo, hi)


@dataclass(frozen=True)
class StaticNodeSettings:
    """Detunings and decay rates; constant over a protocol."""

    delta_l: float = 0.0
    delta_r: float = 0.0
    delta_gl: float = 0.0
    delta_gr: float = 0.0
    kappa_l: float = 0.0
    kappa_r: float = 0.0
    gamma_l: float = 0.0
    gamma_r: float = 0.0


@dataclass(frozen=True)
class NodeChannels:
    """Dynamic channels of one node plus its static settings."""

    omega_l: Optional[Profile] = None
    omega_r: Optional[Profile] = None
    g_l: Optional[Profile] = None
    g_r: Optional[Profile] = None
    static: StaticNodeSettings = field(default_factory=StaticNodeSettings)

    def params_at(self, t: float) -> NodeParams:
        s = self.static
        return NodeParams(
            g_l=eval_profile(self.g_l, t),
            g_r=eval_profile(self.g_r, t),
            omega_l=eval_profile(self.omega_l, t),
            omega_r=eval_profile(self.omega_r, t),
            delta_l=s.delta_l,
            delta_r=s.delta_r,
            delta_gl=s.delta_gl,
            delta_gr=s.delta_gr,
            kappa_l=s.kappa_l,
            kappa_r=s.kappa_r,
            gamma_l=s.gamma_l,
            gamma_r=s.gamma_r,
        )

    def profiles(self) -> list[Profile]:
        return [p for p in (self.omega_l, self.omega_r, self.g_l, self.g_r) if p is not None]


@dataclass(frozen=True)
class ParameterFrame:
    """Instantaneous parameters of every node, plus the fiber coupling."""

    t: float
    node1: NodeParams
    node2: Optional[NodeParams] = None
    w: float = 0.0


@dataclass(frozen=True)
class PulseProtocol:
    """Complete description of one run: channels, fiber, and time window.

    Single-node protocols leave node2 absent and w = 0.  For sequenced
    two-node protocols the node-2 pulse set is conventionally centered one
    ``interval`` after node 1's; the constructors below apply that offset,
    and every center remains individually overridable.
    """

    node1: NodeChannels
    node2: Optional[NodeChannels] = None
    w: float = 0.0
    t_start: float = 0.0
    t_end: float = 1.0
    interval: float = 150.0

    def __post_init__(self):
        # t_start == t_end is tolerated as a degenerate "no evolution" window
        if self.t_start > self.t_end:
            raise ValueError(f"require t_start <= t_end, got [{self.t_start}, {self.t_end}]")
        if self.node2 is None and self.w != 0.0:
            raise ValueError("fiber coupling w is only meaningful for two-node protocols")

    @property
    def is_two_node(self) -> bool:
        return self.node2 is not None

    def with_window_from_supports(self, pad: float = 0.0) -> "PulseProtocol":
        """Set the time window to cover every profile's support."""
        lo, hi = [], []
        nodes = [self.node1] + ([self.node2] if self.node2 is not None else [])
        for node in nodes:
            for prof in node.profiles():
                sup = _support(prof)
                if sup is not None:
                    lo.append(sup[0])
                    hi.append(sup[1])
        if not lo:
            return self
        return replace(self, t_start=min(lo) - pad, t_end=max(hi) + pad)


def sample_protocol(proto: PulseProtocol, t: float) -> ParameterFrame:
    """Evaluate every channel of a protocol at one time.

    Rejects times outside [t_start, t_end]; integrators may probe
    marginally outside their span, so a tolerance of one part in 1e-9 of
    the window is allowed before rejection.
    """
    slack = 1e-9 * (proto.t_end - proto.t_start)
    if t < proto.t_start - slack or t > proto.t_end + slack:
        raise ValueError(
            f"time {t} outside protocol window [{proto.t_start}, {proto.t_end}]"
        )
    node2 = proto.node2.params_at(t) if proto.node2 is not None else None
    return ParameterFrame(t=t, node1=proto.node1.params_at(t), node2=node2, w=proto.w)


def replace_transit_velocity(proto: PulseProtocol, velocity: float) -> PulseProtocol:
    """Copy of a protocol with every transit channel's speed replaced."""

    def swap(node: Optional[NodeChannels]) -> Optional[NodeChannels]:
        if node is None:
            return None
        updates = {}
        for name in ("g_l", "g_r", "omega_l", "omega_r"):
            ch = getattr(node, name)
            if isinstance(ch, TransitProfile):
                updates[name] = replace(ch, velocity=velocity)
        return replace(node, **updates) if updates else node

    return replace(proto, node1=swap(proto.node1), node2=swap(proto.node2))


# ---------------------------------------------------------------------------
# Protocol factories for the standard operating points
# ---------------------------------------------------------------------------

def splitter_protocol(
    g0: float = 3.0,
    omega0: float = 20.0,
    delta: float = 50.0,
    sigma_c: float = 20.0,
    velocity: float = 10.0,
    waist_const: float = DEFAULT_WAIST_CONSTANT,
    center: float = 0.0,
    omega0_r: Optional[float] = None,
    kappa: float = 0.0,
    gamma: float = 0.0,
    delta_gl: float = 0.0,
    delta_gr: float = 0.0,
) -> PulseProtocol:
    """Single-node splitter: Gaussian classical pulses over a transit.

    Both classical fields share the width sigma_c; the atom crossing the
    waist at the given speed modulates both cavity couplings with width
    waist_const/velocity.  All channels are centered together by default
    (the fields are on before and after the transit because they are the
    wider pulses).  The window covers every support.
    """
    static = StaticNodeSettings(
        delta_l=delta, delta_r=delta, delta_gl=delta_gl, delta_gr=delta_gr,
        kappa_l=kappa, kappa_r=kappa, gamma_l=gamma, gamma_r=gamma,
    )
    node = NodeChannels(
        omega_l=PulseProfile(amplitude=omega0, center=center, width=sigma_c),
        omega_r=PulseProfile(
            amplitude=omega0 if omega0_r is None else omega0_r,
            center=center, width=sigma_c,
        ),
        g_l=TransitProfile(g0=g0, velocity=velocity, waist_const=waist_const, center=center),
        g_r=TransitProfile(g0=g0, velocity=velocity, waist_const=waist_const, center=center),
        static=static,
    )
    return PulseProtocol(node1=node, t_start=0.0, t_end=1.0).with_window_from_supports()


@dataclass(frozen=True)
class NodePulseSpec:
    """Pulse set of one node in a sequenced two-node protocol.

    ``center`` is the common center of the set; the per-channel offsets
    shift individual pulses relative to it.  A disabled node contributes
    no dynamic channels (its couplings stay zero).
    """

    omega0_l: float = 20.0
    omega0_r: float = 20.0
    sigma_c: float = 20.0
    sigma_g: float = 10.0
    g0: float = 3.0
    center: float = 0.0
    omega_l_offset: float = 0.0
    omega_r_offset: float = 0.0
    g_offset: float = 0.0
    enabled: bool = True

    def channels(self, delta: float) -> NodeChannels:
        static = StaticNodeSettings(delta_l=delta, delta_r=delta)
        if not self.enabled:
            return NodeChannels(static=static)
        return NodeChannels(
            omega_l=PulseProfile(self.omega0_l, self.center + self.omega_l_offset, self.sigma_c),
            omega_r=PulseProfile(self.omega0_r, self.center + self.omega_r_offset, self.sigma_c),
            g_l=PulseProfile(self.g0, self.center + self.g_offset, self.sigma_g),
            g_r=PulseProfile(self.g0, self.center + self.g_offset, self.sigma_g),
            static=static,
        )


def two_node_protocol(
    node1: NodePulseSpec,
    node2: NodePulseSpec,
    w: float,
    delta: float = 50.0,
    interval: float = 150.0,
    pad: float = 0.0,
) -> PulseProtocol:
    """Sequenced two-node protocol: node-2 pulses follow node 1's.

    node2's center defaults to node1.center + interval when left at zero;
    pass an explicit nonzero center to override the sequencing.
    """
    if node2.center == 0.0 and node2.enabled:
        node2 = replace(node2, center=node1.center + interval)
    proto = PulseProtocol(
        node1=node1.channels(delta),
        node2=node2.channels(delta),
        w=w,
        t_start=0.0,
        t_end=1.0,
        interval=interval,
    )
    return proto.with_window_from_supports(pad=pad)


def stationary_transfer_protocol(
    omega0: float = 20.0,
    g0: float = 3.0,
    delta: float = 50.0,
    duration: float = 400.0,
    t_start: float = 0.0,
) -> PulseProtocol:
    """Crossing classical ramps over constant couplings (trapped atom).

    omega_r starts at its peak and falls off, omega_l rises to its peak
    at the end of the window; the couplings are constant.  The ramps are
    realized as Gaussian flanks of width duration/3, so the off field is
    within ~1% of zero at its far end.  duration = 0 yields a degenerate
    window (no evolution).
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    sigma = duration / 3.0 if duration > 0 else 1.0
    node = NodeChannels(
        omega_l=PulseProfile(omega0, center=t_start + duration, width=sigma),
        omega_r=PulseProfile(omega0, center=t_start, width=sigma),
        g_l=PulseProfile(g0, shape="constant"),
        g_r=PulseProfile(g0, shape="constant"),
        static=StaticNodeSettings(delta_l=delta, delta_r=delta),
    )
    return PulseProtocol(node1=node, t_start=t_start, t_end=t_start + duration)


def velocity_to_physical(
    nu: float,
    waist: float,
    gamma_ei: float,
    waist_const: float = DEFAULT_WAIST_CONSTANT,
) -> dict[str, float]:
    """Convert a dimensionless transit speed to physical units.

    The coupling envelope has width waist_const/nu lifetimes; equating it
    to the physical crossing time waist/v of an atom moving at speed v
    across a waist gives v = nu * waist * gamma_ei / waist_const.  Whether
    the quoted linewidth is an ordinary or an angular frequency is an
    ambiguity of convention, so both readings are returned (the angular
    reading is 2*pi larger); callers report the pair rather than pick one.

    Args:
        nu: dimensionless transit speed.
        waist: cavity mode waist in meters.
        gamma_ei: excited-state linewidth in Hz.

    Returns:
        dict with 'ordinary_m_per_s' and 'angular_m_per_s'.
    """
    if nu <= 0 or waist <= 0 or gamma_ei <= 0:
        raise ValueError("nu, waist and gamma_ei must all be positive")
    v = nu * waist * gamma_ei / waist_const
    return {"ordinary_m_per_s": v, "angular_m_per_s": 2.0 * math.pi * v}
