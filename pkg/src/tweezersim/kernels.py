"""Hot numeric kernels, JIT-compiled with numba when available.

Setting the environment variable ``TWEEZERSIM_NUMBA=0`` (or ``false``,
``off``, ``no``) before import selects the pure-numpy fallback: the same
function bodies run uncompiled, producing bit-identical results.  The
``benchmarks/kernel_bench.py`` script compares both paths.

All randomness is drawn outside the kernels and passed in as uniform
buffers, so results do not depend on the backend.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _flag(name: str, default: bool) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() not in ("0", "false", "off", "no")


NUMBA_ENABLED = _flag("TWEEZERSIM_NUMBA", True)
if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:       # numpy fallback keeps the package importable
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(func):
        return _njit(cache=True)(func)
else:
    def _jit(func):
        return func


def _comb_profile_impl(x, amplitude, center, envelope_width, peak_width,
                       phase, period, tooth_lo, tooth_hi):
    """Gaussian envelope times a periodic train of Gaussian peaks.

    Teeth sit at n*period + phase for integer n in [tooth_lo, tooth_hi].
    """
    out = np.empty(x.shape[0], np.float64)
    inv2w_env = 0.5 / (envelope_width * envelope_width)
    inv2w_peak = 0.5 / (peak_width * peak_width)
    for i in range(x.shape[0]):
        xi = x[i]
        comb = 0.0
        for n in range(tooth_lo, tooth_hi + 1):
            d = xi - n * period - phase
            comb += math.exp(-d * d * inv2w_peak)
        e = xi - center
        out[i] = amplitude * math.exp(-e * e * inv2w_env) * comb
    return out


def _molasses_shot_impl(well_ids, n_wells, u_pair, u_life, pair_rate,
                        branching, duration, single_lifetime, bin_edges):
    """Resolve one illumination shot of pair-collision loss dynamics.

    ``well_ids`` assigns each atom to a well.  Wells holding two or more
    atoms undergo collision events at rate C(k,2)*pair_rate; an event
    removes two atoms with probability ``branching``, one otherwise, and
    the remaining occupancy keeps colliding.  Atoms alone in their well
    decay with ``single_lifetime``.  Uniform buffers are consumed in well
    order: ``u_pair`` feeds multi-occupancy wells (waiting time then
    branching per event), ``u_life`` feeds singly occupied wells.

    Returns (per-bin integral of the alive-atom count over bin_edges
    clipped to [0, duration], alive count at the end of the window).
    Times are relative to the start of illumination.
    """
    n_atoms = well_ids.shape[0]
    occ = np.zeros(n_wells, np.int64)
    for i in range(n_atoms):
        occ[well_ids[i]] += 1

    ev_t = np.empty(n_atoms + 1, np.float64)
    ev_d = np.empty(n_atoms + 1, np.int64)
    n_ev = 0
    ip = 0
    il = 0
    for w in range(n_wells):
        k = occ[w]
        if k == 1:
            t = -single_lifetime * math.log1p(-u_life[il])
            il += 1
            if t < duration:
                ev_t[n_ev] = t
                ev_d[n_ev] = 1
                n_ev += 1
        elif k >= 2:
            t = 0.0
            while k >= 2:
                rate = 0.5 * k * (k - 1) * pair_rate
                t += -math.log1p(-u_pair[ip]) / rate
                ip += 1
                v = u_pair[ip]
                ip += 1
                if t >= duration:
                    break
                dead = 2 if v < branching else 1
                ev_t[n_ev] = t
                ev_d[n_ev] = dead
                n_ev += 1
                k -= dead

    order = np.argsort(ev_t[:n_ev])
    total_dead = 0
    for j in range(n_ev):
        total_dead += ev_d[j]

    nbins = bin_edges.shape[0] - 1
    out = np.zeros(nbins, np.float64)
    alive = float(n_atoms)
    ev_i = 0
    for b in range(nbins):
        lo = bin_edges[b]
        hi = bin_edges[b + 1]
        if lo < 0.0:
            lo = 0.0
        if hi > duration:
            hi = duration
        while ev_i < n_ev and ev_t[order[ev_i]] <= lo:
            alive -= ev_d[order[ev_i]]
            ev_i += 1
        if hi <= lo:
            continue
        seg = lo
        acc = 0.0
        while ev_i < n_ev and ev_t[order[ev_i]] < hi:
            t = ev_t[order[ev_i]]
            acc += alive * (t - seg)
            alive -= ev_d[order[ev_i]]
            seg = t
            ev_i += 1
        acc += alive * (hi - seg)
        out[b] = acc
    return out, n_atoms - total_dead


comb_profile = _jit(_comb_profile_impl)
molasses_shot = _jit(_molasses_shot_impl)
