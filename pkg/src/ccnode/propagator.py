"""Time-dependent Schrodinger propagation, i dA/dt = M(t) A.

The integrator works for any matrix-valued generator M(t); it never asks
whether M is Hermitian, so the same code path propagates the lossless
sector matrices and their non-Hermitian loss-modified variants.

Two stepping modes are provided.  The default is an adaptive embedded
Runge-Kutta pair of order 8(5,3) (the classic 13-stage Dormand-Prince
scheme with a combined 5th/3rd-order error estimate) at rtol 1e-9 /
atol 1e-12, which keeps Hermitian norm drift comfortably below 1e-8 per
run.  A fixed-step 4th-order scheme is retained for convergence and
determinism checks.  Output sampling is decoupled from step control: the
adaptive stepper clips steps so that states are recorded exactly on a
uniform grid (2000 samples by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model_core import sector_basis_labels
from .pulses import PulseProtocol, PulseProfile, TransitProfile, SUPPORT_SIGMAS

__all__ = [
    "IntegrationError",
    "IntegratorControl",
    "Trajectory",
    "EffectiveUnitary",
    "integrate",
    "norm_history",
    "effective_unitary",
    "run_protocol",
    "single_node_generator",
]

Generator = Callable[[float], np.ndarray]


class IntegrationError(RuntimeError):
    """Raised when a propagation cannot be completed (underflow, NaN)."""


# ---------------------------------------------------------------------------
# Dormand-Prince 8(5,3) coefficients (Hairer, Norsett & Wanner, "Solving
# Ordinary Differential Equations I", the dop853 tableau).  The 12 process
# stages are listed; the embedded 5th- and 3rd-order error weights are
# combined into a single estimate below.
# ---------------------------------------------------------------------------

_C = np.array([
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
])

_A_ROWS: list[list[tuple[int, float]]] = [
    [],
    [(0, 0.05260015195876773)],
    [(0, 0.0197250569845379), (1, 0.0591751709536137)],
    [(0, 0.02958758547680685), (2, 0.08876275643042054)],
    [(0, 0.2413651341592667), (2, -0.8845494793282861), (3, 0.924834003261792)],
    [(0, 0.037037037037037035), (3, 0.17082860872947386), (4, 0.12546768756682242)],
    [(0, 0.037109375), (3, 0.17025221101954405), (4, 0.06021653898045596),
     (5, -0.017578125)],
    [(0, 0.03709200011850479), (3, 0.17038392571223998), (4, 0.10726203044637328),
     (5, -0.015319437748624402), (6, 0.008273789163814023)],
    [(0, 0.6241109587160757), (3, -3.3608926294469414), (4, -0.868219346841726),
     (5, 27.59209969944671), (6, 20.154067550477894), (7, -43.48988418106996)],
    [(0, 0.47766253643826434), (3, -2.4881146199716677), (4, -0.590290826836843),
     (5, 21.230051448181193), (6, 15.279233632882423), (7, -33.28821096898486),
     (8, -0.020331201708508627)],
    [(0, -0.9371424300859873), (3, 5.186372428844064), (4, 1.0914373489967295),
     (5, -8.149787010746927), (6, -18.52006565999696), (7, 22.739487099350505),
     (8, 2.4936055526796523), (9, -3.0467644718982196)],
    [(0, 2.273310147516538), (3, -10.53449546673725), (4, -2.0008720582248625),
     (5, -17.9589318631188), (6, 27.94888452941996), (7, -2.8589982771350235),
     (8, -8.87285693353063), (9, 12.360567175794303), (10, 0.6433927460157636)],
]

_N_STAGES = 12

_A = np.zeros((_N_STAGES, _N_STAGES))
for _i, _row in enumerate(_A_ROWS):
    for _j, _v in _row:
        _A[_i, _j] = _v

_B = np.array([
    0.054293734116568765, 0.0, 0.0, 0.0, 0.0,
    4.450312892752409, 1.8915178993145003, -5.801203960010585,
    0.3111643669578199, -0.1521609496625161, 0.20136540080403034,
    0.04471061572777259,
])

_E3 = np.array([
    -0.18980075407240762, 0.0, 0.0, 0.0, 0.0,
    4.450312892752409, 1.8915178993145003, -5.801203960010585,
    -0.4226823213237919, -0.1521609496625161, 0.20136540080403034,
    0.02265179219836082,
])

_E5 = np.array([
    0.01312004499419488, 0.0, 0.0, 0.0, 0.0,
    -1.2251564463762044, -0.4957589496572502, 1.6643771824549864,
    -0.35032884874997366, 0.3341791187130175, 0.08192320648511571,
    -0.022355307863886294,
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERROR_EXPONENT = -1.0 / 8.0


@dataclass(frozen=True)
class IntegratorControl:
    """Step-control settings for :func:`integrate`.

    method 'adaptive' uses the embedded pair with (rtol, atol); method
    'fixed' takes uniform 4th-order steps of size dt.  samples sets the
    output cadence, independent of step control.
    """

    method: str = "adaptive"
    rtol: float = 1e-9
    atol: float = 1e-12
    dt: Optional[float] = None
    samples: int = 2000
    max_steps: int = 20_000_000

    def __post_init__(self):
        if self.method not in ("adaptive", "fixed"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.method == "fixed" and (self.dt is None or not self.dt > 0):
            raise ValueError("fixed-step integration requires dt > 0")
        if self.samples < 2:
            raise ValueError("need at least 2 output samples")


@dataclass
class Trajectory:
    """Recorded time series of a propagation."""

    times: np.ndarray          # (n_samples,), strictly increasing
    states: np.ndarray         # (n_samples, dim) complex amplitudes
    norms: np.ndarray          # (n_samples,), squared norm per sample
    basis: tuple[str, ...]     # label per amplitude column

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.states.shape != (self.times.size, len(self.basis)):
            raise ValueError("states shape inconsistent with times/basis")
        recomputed = np.sum(np.abs(self.states) ** 2, axis=1)
        if self.norms.size and np.max(np.abs(recomputed - self.norms)) > 1e-12 * max(
            1.0, float(np.max(recomputed))
        ):
            raise ValueError("recorded norms inconsistent with states")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        """(n_samples, dim) array of |amplitude|^2."""
        return np.abs(self.states) ** 2

    def population(self, label: str) -> np.ndarray:
        idx = self.basis.index(label)
        return np.abs(self.states[:, idx]) ** 2


@dataclass(frozen=True)
class EffectiveUnitary:
    """2x2 photonic map accumulated over a full protocol.

    matrix maps initial to final amplitudes on the photonic basis
    [F_l, F_r]; leak gives, per column, the weight that ended outside that
    pair.  A non-unitarity warning is attached when the defect exceeds
    0.01, which signals adiabaticity failure of the reduction.
    """

    matrix: np.ndarray
    leak: tuple[float, float]
    peak_intermediate: float
    warnings: tuple[str, ...] = ()

    @property
    def A(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def B(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def C(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def D(self) -> complex:
        return complex(self.matrix[1, 1])

    def unitarity_defect(self) -> float:
        u = self.matrix
        return float(np.max(np.abs(u.conj().T @ u - np.eye(2))))


def _rms(x: np.ndarray) -> float:
    return float(np.linalg.norm(x) / math.sqrt(x.size))


def _initial_step(gen_rhs, t0: float, y0: np.ndarray, f0: np.ndarray,
                  span: float, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = gen_rhs(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1, span)


# complex copies so the stage dots can write straight into complex buffers
_A_ROWS_CONTIG = [np.ascontiguousarray(_A[i, :i], dtype=complex) for i in range(_N_STAGES)]
_B_C = _B.astype(complex)


def _integrate_adaptive(generator: Generator, psi0: np.ndarray, t0: float, t1: float,
                        control: IntegratorControl,
                        sample_times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dim = psi0.size
    rtol, atol = control.rtol, control.atol

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.dot(generator(t), y)
        out *= -1j
        return out

    k = np.empty((_N_STAGES, dim), dtype=complex)
    acc = np.empty(dim, dtype=complex)   # stage accumulator
    yi = np.empty(dim, dtype=complex)    # stage state
    t = t0
    y = psi0.copy()
    f = rhs(t, y)
    h = _initial_step(rhs, t0, y, f, t1 - t0, rtol, atol)

    recorded = [psi0.copy()]
    next_idx = 1  # sample_times[0] == t0 already recorded
    tiny = 1e-12 * max(abs(t0), abs(t1), 1.0)
    n_steps = 0
    a_rows = _A_ROWS_CONTIG

    while next_idx < sample_times.size:
        if n_steps >= control.max_steps:
            raise IntegrationError(
                f"exceeded {control.max_steps} steps at t = {t:.6g}"
            )
        target = sample_times[next_idx]
        h_use = min(h, t1 - t)
        hit_sample = False
        if t + h_use >= target - tiny:
            h_use = target - t
            hit_sample = True
        if h_use <= tiny:
            raise IntegrationError(
                f"step size underflow at t = {t:.6g} (h = {h_use:.3e})"
            )

        k[0] = f
        for i in range(1, _N_STAGES):
            np.dot(a_rows[i], k[:i], out=acc)
            np.multiply(acc, h_use, out=acc)
            np.add(y, acc, out=yi)
            k[i] = rhs(t + _C[i] * h_use, yi)
        np.dot(_B_C, k, out=acc)
        np.multiply(acc, h_use, out=acc)
        y_new = y + acc

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err5 = np.dot(_E5, k)
        err5 /= scale
        err3 = np.dot(_E3, k)
        err3 /= scale
        err5n2 = float(err5.real @ err5.real + err5.imag @ err5.imag)
        err3n2 = float(err3.real @ err3.real + err3.imag @ err3.imag)
        if err5n2 == 0.0 and err3n2 == 0.0:
            err_norm = 0.0
        else:
            denom = err5n2 + 0.01 * err3n2
            err_norm = abs(h_use) * err5n2 / math.sqrt(denom * dim)

        if err_norm < 1.0:
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err_norm ** _ERROR_EXPONENT
            )
            t = target if hit_sample else t + h_use
            y = y_new
            if not np.all(np.isfinite(y.view(float))):
                raise IntegrationError(f"non-finite state at t = {t:.6g}")
            f = rhs(t, y)
            if hit_sample:
                recorded.append(y.copy())
                next_idx += 1
            h = h_use * factor
            n_steps += 1
        else:
            h = h_use * max(_MIN_FACTOR, _SAFETY * err_norm ** _ERROR_EXPONENT)
            n_steps += 1

    return sample_times, np.array(recorded)


def _integrate_fixed(generator: Generator, psi0: np.ndarray, t0: float, t1: float,
                     control: IntegratorControl) -> tuple[np.ndarray, np.ndarray]:
    span = t1 - t0
    n_steps = max(1, int(round(span / control.dt)))
    h = span / n_steps
    stride = max(1, n_steps // (control.samples - 1))

    y = psi0.copy()
    times = [t0]
    recorded = [psi0.copy()]

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return -1j * (generator(t) @ y)

    t = t0
    for step in range(1, n_steps + 1):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + step * h
        if step % stride == 0 or step == n_steps:
            if not np.all(np.isfinite(y.view(float))):
                raise IntegrationError(f"non-finite state at t = {t:.6g}")
            times.append(t)
            recorded.append(y.copy())

    return np.array(times), np.array(recorded)


def integrate(
    generator: Generator,
    psi0: Sequence[complex] | np.ndarray,
    t0: float,
    t1: float,
    control: Optional[IntegratorControl] = None,
    basis: Optional[Sequence[str]] = None,
) -> Trajectory:
    """Propagate i dA/dt = M(t) A from t0 to t1.

    generator(t) must return the (dim x dim) matrix M at time t; psi0 is
    the initial amplitude vector.  Raises IntegrationError on step-size
    underflow or non-finite amplitudes.  A degenerate window t0 == t1
    returns the initial state as a single-sample trajectory.
    """
    if control is None:
        control = IntegratorControl()
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if basis is None:
        basis = tuple(f"a{i}" for i in range(psi0.size))
    else:
        basis = tuple(basis)
    if len(basis) != psi0.size:
        raise ValueError("basis length does not match state dimension")
    if t1 < t0:
        raise ValueError(f"require t0 <= t1, got [{t0}, {t1}]")

    if t1 == t0:
        states = psi0[np.newaxis, :]
        return Trajectory(
            times=np.array([t0]),
            states=states,
            norms=np.sum(np.abs(states) ** 2, axis=1),
            basis=basis,
        )

    probe = np.asarray(generator(t0), dtype=complex)
    if probe.shape != (psi0.size, psi0.size):
        raise ValueError(
            f"generator shape {probe.shape} does not match state dimension {psi0.size}"
        )

    if control.method == "adaptive":
        sample_times = np.linspace(t0, t1, control.samples)
        fast_states = _run_fast_path(generator, psi0, control, sample_times)
        if fast_states is not None:
            times, states = sample_times, fast_states
        else:
            times, states = _integrate_adaptive(generator, psi0, t0, t1, control, sample_times)
    else:
        times, states = _integrate_fixed(generator, psi0, t0, t1, control)

    return Trajectory(
        times=times,
        states=states,
        norms=np.sum(np.abs(states) ** 2, axis=1),
        basis=basis,
    )


def norm_history(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """(times, squared norms) of a trajectory.

    For a Hermitian generator this is constant; for the non-Hermitian loss
    model it is the survival probability of the excitation.
    """
    return traj.times, traj.norms


# ---------------------------------------------------------------------------
# Protocol-driven propagation of the single-node 5-level model
# ---------------------------------------------------------------------------

def _channel_term(prof) -> tuple[int, complex, float, float]:
    """(kind, peak, center, inv_width); kind 0 = zero, 1 = const, 2 = gauss."""
    if prof is None:
        return (0, 0.0, 0.0, 0.0)
    if isinstance(prof, PulseProfile):
        if prof.shape == "constant":
            return (1, prof.amplitude, 0.0, 0.0)
        return (2, prof.amplitude, prof.center, 1.0 / prof.width)
    if isinstance(prof, TransitProfile):
        return (2, prof.g0, prof.center, prof.velocity / prof.waist_const)
    raise TypeError(f"unsupported profile type {type(prof)!r}")


def _eval_channel(term: tuple[int, complex, float, float], t: float) -> complex:
    kind, peak, center, inv_width = term
    if kind == 0:
        return 0.0
    if kind == 1:
        return peak
    u = (t - center) * inv_width
    if u > SUPPORT_SIGMAS or u < -SUPPORT_SIGMAS:
        return 0.0
    return peak * math.exp(-0.5 * u * u)


def _pack_channels(terms) -> np.ndarray:
    """Channel terms as the (n, 5) float table the JIT kernels read."""
    tab = np.zeros((len(terms), 5))
    for i, (kind, peak, center, inv_width) in enumerate(terms):
        pk = complex(peak)
        tab[i] = (float(kind), pk.real, pk.imag, center, inv_width)
    return tab


def _run_fast_path(generator: Generator, psi0: np.ndarray,
                   control: IntegratorControl,
                   sample_times: np.ndarray) -> Optional[np.ndarray]:
    """Dispatch to the JIT kernel when the generator carries a channel spec."""
    spec = getattr(generator, "channel_spec", None)
    if spec is None:
        return None
    from . import _fast

    if not _fast.HAVE_NUMBA:
        return None
    model, tab, aux, m_static = spec
    states, status, t_fail = _fast.dop853_channels(
        model, tab, aux, m_static.copy(), psi0, sample_times,
        control.rtol, control.atol, control.max_steps,
    )
    if status == 1:
        raise IntegrationError(f"step size underflow at t = {t_fail:.6g}")
    if status == 2:
        raise IntegrationError(f"exceeded {control.max_steps} steps at t = {t_fail:.6g}")
    if status == 3:
        raise IntegrationError(f"non-finite state at t = {t_fail:.6g}")
    return states


def single_node_generator(proto: PulseProtocol, lossy: bool = True) -> Generator:
    """Fast generator for the 5-level single-excitation dynamics of node 1.

    Equivalent to building the sector matrix from the sampled frame at
    every call (with losses applied when the static rates are nonzero),
    but without per-call parameter-object construction, which matters
    inside the adaptive stepper.
    """
    node = proto.node1
    s = node.static
    g_l = _channel_term(node.g_l)
    g_r = _channel_term(node.g_r)
    om_l = _channel_term(node.omega_l)
    om_r = _channel_term(node.omega_r)

    m = np.zeros((5, 5), dtype=complex)
    m[0, 0] = s.delta_gl
    m[1, 1] = s.delta_gr
    m[3, 3] = -s.delta_l
    m[4, 4] = -s.delta_r
    if lossy:
        m[0, 0] -= 0.5j * s.kappa_l
        m[1, 1] -= 0.5j * s.kappa_r
        m[3, 3] -= 0.5j * s.gamma_l
        m[4, 4] -= 0.5j * s.gamma_r

    def gen(t: float) -> np.ndarray:
        gl = _eval_channel(g_l, t)
        gr = _eval_channel(g_r, t)
        ol = _eval_channel(om_l, t)
        onr = _eval_channel(om_r, t)
        m[0, 3] = np.conj(gl)
        m[3, 0] = gl
        m[1, 4] = np.conj(gr)
        m[4, 1] = gr
        m[2, 3] = np.conj(ol)
        m[3, 2] = ol
        m[2, 4] = np.conj(onr)
        m[4, 2] = onr
        return m

    gen.channel_spec = (0, _pack_channels((g_l, g_r, om_l, om_r)), np.zeros(0), m.copy())
    return gen


def run_protocol(
    proto: PulseProtocol,
    psi0: Sequence[complex] | np.ndarray,
    control: Optional[IntegratorControl] = None,
    lossy: bool = True,
) -> Trajectory:
    """Integrate the single-node 5-level model over a protocol window."""
    if proto.is_two_node:
        raise ValueError("run_protocol handles single-node protocols only")
    gen = single_node_generator(proto, lossy=lossy)
    return integrate(
        gen, psi0, proto.t_start, proto.t_end, control=control,
        basis=sector_basis_labels(),
    )


def effective_unitary(
    proto: PulseProtocol,
    control: Optional[IntegratorControl] = None,
) -> EffectiveUnitary:
    """Accumulated 2x2 photonic map of a lossless single-node protocol.

    The two photonic basis states are propagated through the full 5-level
    model and the map is read off from their final projections onto
    [F_l, F_r].  Also reports the leaked weight per column and the peak
    population found outside the photonic pair during either run; a
    warning is attached when the map departs from unitarity by more than
    0.01.
    """
    if proto.is_two_node:
        raise ValueError("effective unitary is defined for single-node protocols")
    st = proto.node1.static
    if st.kappa_l or st.kappa_r or st.gamma_l or st.gamma_r:
        raise ValueError("effective unitary requires lossless parameters")
    if control is None:
        control = IntegratorControl(samples=201)

    u = np.zeros((2, 2), dtype=complex)
    leak = [0.0, 0.0]
    peak_intermediate = 0.0
    for col, start_index in enumerate((0, 1)):
        psi0 = np.zeros(5, dtype=complex)
        psi0[start_index] = 1.0
        traj = run_protocol(proto, psi0, control=control, lossy=False)
        final = traj.final_state
        u[0, col] = final[0]
        u[1, col] = final[1]
        leak[col] = float(1.0 - (abs(final[0]) ** 2 + abs(final[1]) ** 2))
        pops = traj.populations()
        peak_intermediate = max(peak_intermediate, float(np.max(np.sum(pops[:, 2:], axis=1))))

    warnings: tuple[str, ...] = ()
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(2))))
    if defect > 0.01:
        warnings = (
            f"map departs from unitarity by {defect:.3g}; "
            "the reduction to the photonic pair is breaking down",
        )

    return EffectiveUnitary(
        matrix=u,
        leak=(leak[0], leak[1]),
        peak_intermediate=peak_intermediate,
        warnings=warnings,
    )
