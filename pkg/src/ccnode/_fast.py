"""JIT-compiled stepping kernels for protocol-driven propagation.

The adaptive stepper in :mod:`propagator` accepts arbitrary Python
generators; for the two Hamiltonian forms that protocols actually
produce (the 5-level single-node sector matrix and the 20-state
two-node matrix) this module provides numba kernels that evaluate the
pulse channels and step the same embedded pair without touching the
Python interpreter per stage.  Results agree with the generic path to
integrator tolerance; if numba is unavailable everything transparently
falls back to the generic path.

Channel tables are (n_channels, 5) float arrays with rows
[kind, peak_re, peak_im, center, inv_width]; kind 0 = zero, 1 =
constant, 2 = Gaussian.  Status codes returned by the kernels:
0 = ok, 1 = step underflow, 2 = step budget exceeded, 3 = non-finite.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

from .propagator import _A, _B, _C, _E3, _E5, _N_STAGES

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0

MODEL_SINGLE = 0
MODEL_TWO = 1

# two-node layout constants (0-based): per node the (photon-l, photon-r,
# intermediate) triples, paired by the spectator state of the other node
_NODE_TRIPLES = np.array(
    [
        [[0, 2, 4], [1, 3, 5]],      # node 1
        [[6, 8, 10], [7, 9, 11]],    # node 2
    ],
    dtype=np.int64,
)


@njit(cache=True)
def _eval_ch(tab, j, t):
    kind = tab[j, 0]
    if kind == 0.0:
        return 0.0 + 0.0j
    amp = complex(tab[j, 1], tab[j, 2])
    if kind == 1.0:
        return amp
    u = (t - tab[j, 3]) * tab[j, 4]
    if u > 8.0 or u < -8.0:
        return 0.0 + 0.0j
    return amp * math.exp(-0.5 * u * u)


@njit(cache=True)
def _fill(model, m, tab, aux, t):
    if model == MODEL_SINGLE:
        gl = _eval_ch(tab, 0, t)
        gr = _eval_ch(tab, 1, t)
        ol = _eval_ch(tab, 2, t)
        orr = _eval_ch(tab, 3, t)
        m[0, 3] = gl.conjugate()
        m[3, 0] = gl
        m[1, 4] = gr.conjugate()
        m[4, 1] = gr
        m[2, 3] = ol.conjugate()
        m[3, 2] = ol
        m[2, 4] = orr.conjugate()
        m[4, 2] = orr
    else:
        for node in range(2):
            base = 4 * node
            gl = _eval_ch(tab, base + 0, t)
            gr = _eval_ch(tab, base + 1, t)
            ol = _eval_ch(tab, base + 2, t)
            orr = _eval_ch(tab, base + 3, t)
            inv_dl = aux[2 * node]
            inv_dr = aux[2 * node + 1]
            s_l = ol.conjugate() * gl * inv_dl
            s_r = orr.conjugate() * gr * inv_dr
            delta = (gl.real * gl.real + gl.imag * gl.imag) * inv_dl
            delta_m = (ol.real * ol.real + ol.imag * ol.imag) * inv_dl + (
                orr.real * orr.real + orr.imag * orr.imag
            ) * inv_dr
            for pair in range(2):
                a = _NODE_TRIPLES[node, pair, 0]
                b = _NODE_TRIPLES[node, pair, 1]
                c = _NODE_TRIPLES[node, pair, 2]
                m[a, a] = delta
                m[b, b] = delta
                m[c, c] = delta_m
                m[a, c] = s_l
                m[c, a] = s_l.conjugate()
                m[b, c] = s_r
                m[c, b] = s_r.conjugate()


@njit(cache=True)
def _rhs(model, m, tab, aux, t, y, out):
    _fill(model, m, tab, aux, t)
    n = y.shape[0]
    for r in range(n):
        s = 0.0 + 0.0j
        for c in range(n):
            mv = m[r, c]
            if mv != 0.0:
                s += mv * y[c]
        out[r] = -1j * s


@njit(cache=True)
def dop853_channels(model, tab, aux, m, y0, sample_times, rtol, atol, max_steps):
    """Adaptive 8(5,3) propagation specialized to channel-built matrices.

    m must arrive pre-filled with every static entry (diagonal terms,
    fiber couplings); only the pulse-driven entries are rewritten per
    evaluation.  Records the state exactly at sample_times.
    """
    dim = y0.shape[0]
    n_samples = sample_times.shape[0]
    states = np.zeros((n_samples, dim), dtype=np.complex128)
    states[0] = y0

    k = np.zeros((_N_STAGES, dim), dtype=np.complex128)
    acc = np.zeros(dim, dtype=np.complex128)
    yi = np.zeros(dim, dtype=np.complex128)
    y = y0.copy()
    y_new = np.zeros(dim, dtype=np.complex128)
    f = np.zeros(dim, dtype=np.complex128)
    f1 = np.zeros(dim, dtype=np.complex128)

    t0 = sample_times[0]
    t1 = sample_times[n_samples - 1]
    span = t1 - t0
    t = t0
    _rhs(model, m, tab, aux, t, y, f)

    # initial step: reduced Hairer heuristic
    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y[i])
        d0 += (abs(y[i]) / sc) ** 2
        d1 += (abs(f[i]) / sc) ** 2
    d0 = math.sqrt(d0 / dim)
    d1 = math.sqrt(d1 / dim)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    for i in range(dim):
        yi[i] = y[i] + h0 * f[i]
    _rhs(model, m, tab, aux, t + h0, yi, f1)
    d2 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y[i])
        d2 += (abs(f1[i] - f[i]) / sc) ** 2
    d2 = math.sqrt(d2 / dim) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    h = min(100.0 * h0, h1, span)

    tiny = 1e-12 * max(abs(t0), abs(t1), 1.0)
    next_idx = 1
    n_steps = 0

    while next_idx < n_samples:
        if n_steps >= max_steps:
            return states, 2, t
        target = sample_times[next_idx]
        h_use = min(h, t1 - t)
        hit = False
        if t + h_use >= target - tiny:
            h_use = target - t
            hit = True
        if h_use <= tiny:
            return states, 1, t

        for d in range(dim):
            k[0, d] = f[d]
        for i in range(1, _N_STAGES):
            for d in range(dim):
                acc[d] = 0.0
            for j in range(i):
                aij = _A[i, j]
                if aij != 0.0:
                    for d in range(dim):
                        acc[d] += aij * k[j, d]
            for d in range(dim):
                yi[d] = y[d] + h_use * acc[d]
            _rhs(model, m, tab, aux, t + _C[i] * h_use, yi, f1)
            for d in range(dim):
                k[i, d] = f1[d]

        for d in range(dim):
            s = 0.0 + 0.0j
            for j in range(_N_STAGES):
                bj = _B[j]
                if bj != 0.0:
                    s += bj * k[j, d]
            y_new[d] = y[d] + h_use * s

        err5n2 = 0.0
        err3n2 = 0.0
        for d in range(dim):
            sc = atol + rtol * max(abs(y[d]), abs(y_new[d]))
            e5 = 0.0 + 0.0j
            e3 = 0.0 + 0.0j
            for j in range(_N_STAGES):
                if _E5[j] != 0.0:
                    e5 += _E5[j] * k[j, d]
                if _E3[j] != 0.0:
                    e3 += _E3[j] * k[j, d]
            e5 /= sc
            e3 /= sc
            err5n2 += e5.real * e5.real + e5.imag * e5.imag
            err3n2 += e3.real * e3.real + e3.imag * e3.imag

        if err5n2 == 0.0 and err3n2 == 0.0:
            err_norm = 0.0
        else:
            err_norm = (
                abs(h_use) * err5n2 / math.sqrt((err5n2 + 0.01 * err3n2) * dim)
            )

        if err_norm < 1.0:
            if err_norm == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err_norm ** (-0.125))
            if hit:
                t = target
            else:
                t = t + h_use
            for d in range(dim):
                y[d] = y_new[d]
                if not (math.isfinite(y[d].real) and math.isfinite(y[d].imag)):
                    return states, 3, t
            _rhs(model, m, tab, aux, t, y, f)
            if hit:
                for d in range(dim):
                    states[next_idx, d] = y[d]
                next_idx += 1
            h = h_use * factor
            n_steps += 1
        else:
            h = h_use * max(_MIN_FACTOR, _SAFETY * err_norm ** (-0.125))
            n_steps += 1

    return states, 0, t
