"""Light-induced pair losses under near-resonant illumination.

Two atoms sharing a potential well undergo an inelastic collision at a
configurable rate; the energy release ejects both atoms (or, with the
one-atom branching knob, a single atom).  Atoms alone in their well are
immune to pair loss and decay only with the illumination-limited storage
lifetime.  This module resolves those dynamics for a world state and
synthesizes ensemble-averaged fluorescence traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dsl import SequenceError
from .kernels import molasses_shot
from .noise import RngStream


class CollisionStateError(SequenceError):
    """Molasses applied to a state that is not fully HDT-bound."""


@dataclass(frozen=True)
class MolassesEpisode:
    """Parameters of one illumination window."""

    duration: float                      # s
    pair_collision_rate: float           # 1/s per doubly occupied well
    single_survival_lifetime: float = 60.0
    pair_loss_branching: float = 1.0     # P(an event ejects both atoms)
    fluorescence_per_atom: float = 1.0   # counts/s, arbitrary scale
    background_level: float = 0.0        # counts/s

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.pair_collision_rate <= 0 or self.single_survival_lifetime <= 0:
            raise ValueError("rates and lifetimes must be > 0")
        if not 0.0 <= self.pair_loss_branching <= 1.0:
            raise ValueError("pair_loss_branching must be in [0, 1]")


@dataclass(frozen=True)
class AtomCount:
    """Shot-to-shot distribution of the loaded atom number."""

    kind: str      # 'poisson' | 'fixed'
    value: float

    def __post_init__(self):
        if self.kind not in ("poisson", "fixed"):
            raise ValueError("kind must be 'poisson' or 'fixed'")
        if self.value < 0:
            raise ValueError("value must be >= 0")

    @classmethod
    def poisson(cls, mean: float) -> "AtomCount":
        return cls("poisson", float(mean))

    @classmethod
    def fixed(cls, n: int) -> "AtomCount":
        return cls("fixed", float(n))

    def draw(self, stream: RngStream) -> int:
        if self.kind == "poisson":
            return stream.poisson(self.value)
        return int(round(self.value))


@dataclass(frozen=True)
class TraceLayout:
    """Time structure of a fluorescence trace.

    The signal window (illumination on) starts at ``molasses_on`` and runs
    for the episode duration; a background-only tail follows after the
    trap switch-off marker.  Both markers must sit on bin boundaries.
    """

    molasses_on: float = 0.26
    bin_width: float = 0.01
    background_tail: float = 0.05

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        for name in ("molasses_on", "background_tail"):
            t = getattr(self, name)
            if t < 0:
                raise ValueError(f"{name} must be >= 0")
            n = t / self.bin_width
            if abs(n - round(n)) > 1e-9:
                raise ValueError(f"{name} must be a multiple of bin_width")

    def bin_counts(self, duration: float) -> tuple:
        n_sig = duration / self.bin_width
        if abs(n_sig - round(n_sig)) > 1e-9:
            raise ValueError("episode duration must be a multiple of bin_width")
        return (int(round(self.molasses_on / self.bin_width)),
                int(round(n_sig)),
                int(round(self.background_tail / self.bin_width)))


@dataclass(frozen=True)
class FluorescenceTrace:
    """Ensemble-averaged fluorescence level per time bin."""

    time_bins: np.ndarray        # (n_bins, 2) of (t_start, t_end)
    mean_signal: np.ndarray      # counts/s per bin
    n_shots: int
    signal_variance: np.ndarray  # per-bin shot-to-shot variance
    mean_final_alive: float      # alive atoms at the end of the window
    var_final_alive: float
    mean_initial_pairs: float    # same-well atom pairs at switch-on


def apply_molasses(state, episode: MolassesEpisode, stream: RngStream):
    """Resolve one illumination window on a world state (mutated in place).

    Every alive atom must sit in an HDT well.  Wells holding k >= 2 atoms
    collide at rate k(k-1)/2 * pair_collision_rate; each event ejects two
    atoms with the configured branching, one otherwise, and the survivors
    keep colliding.  Atoms alone in their well survive with the
    illumination-limited lifetime.
    """
    alive = [a for a in state.atoms if a.alive]
    for atom in alive:
        if atom.bound != "hdt" or atom.well is None:
            raise CollisionStateError(
                f"atom {atom.id} is not in an HDT well during molasses")
    by_well = {}
    for atom in alive:
        by_well.setdefault(atom.well, []).append(atom)

    for well in sorted(by_well):
        group = sorted(by_well[well], key=lambda a: a.id)
        if len(group) == 1:
            if not stream.exponential_survival(episode.duration,
                                               episode.single_survival_lifetime):
                _kill_atom(group[0])
            continue
        k = len(group)
        t = 0.0
        next_victim = 0
        while k >= 2:
            rate = 0.5 * k * (k - 1) * episode.pair_collision_rate
            t += stream.exponential_time(rate)
            both = stream.bernoulli(episode.pair_loss_branching)
            if t >= episode.duration:
                break
            dead = 2 if both else 1
            for _ in range(dead):
                _kill_atom(group[next_victim])
                next_victim += 1
            k -= dead
    state.clock += episode.duration
    return state


def _kill_atom(atom) -> None:
    atom.alive = False
    atom.bound = None
    atom.well = None


def fluorescence_trace(atom_count: AtomCount, wells: int,
                       episode: MolassesEpisode, n_shots: int,
                       stream: RngStream,
                       layout: Optional[TraceLayout] = None,
                       placement: str = "uniform") -> FluorescenceTrace:
    """Simulate the averaged fluorescence level of repeated loading shots.

    Per shot, the atom number is drawn from ``atom_count`` and the atoms
    are placed among ``wells`` wells (``uniform``: independently, multiple
    occupancy allowed; ``distinct``: at most one atom per well).  The
    signal per bin is fluorescence_per_atom times the time-averaged alive
    count plus background; bins before illumination and after the
    switch-off marker report background only.
    """
    if wells < 1:
        raise ValueError("wells must be >= 1")
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if placement not in ("uniform", "distinct"):
        raise ValueError("placement must be 'uniform' or 'distinct'")
    layout = layout or TraceLayout()
    n_pre, n_sig, n_post = layout.bin_counts(episode.duration)
    width = layout.bin_width
    edges_rel = np.arange(n_sig + 1, dtype=np.float64) * width

    sig_sum = np.zeros(n_sig)
    sig_sumsq = np.zeros(n_sig)
    alive_sum = 0.0
    alive_sumsq = 0.0
    pairs_sum = 0.0
    for shot in range(n_shots):
        s = stream.child(shot)
        n = atom_count.draw(s)
        if placement == "uniform":
            well_ids = s.integers(0, wells, n).astype(np.int64)
        else:
            if n > wells:
                raise ValueError("distinct placement needs n_atoms <= wells")
            well_ids = s.choose_distinct(wells, n).astype(np.int64)
        occ = np.bincount(well_ids, minlength=wells)
        pairs_sum += float(np.sum(occ * (occ - 1)) / 2.0)
        u_pair = s.uniform_array(2 * n)
        u_life = s.uniform_array(n)
        integrals, final_alive = molasses_shot(
            well_ids, wells, u_pair, u_life, episode.pair_collision_rate,
            episode.pair_loss_branching, episode.duration,
            episode.single_survival_lifetime, edges_rel)
        shot_signal = episode.fluorescence_per_atom * integrals / width
        sig_sum += shot_signal
        sig_sumsq += shot_signal ** 2
        alive_sum += final_alive
        alive_sumsq += final_alive ** 2

    mean_sig = sig_sum / n_shots
    var_sig = np.maximum(sig_sumsq / n_shots - mean_sig ** 2, 0.0)
    mean_alive = alive_sum / n_shots
    var_alive = max(alive_sumsq / n_shots - mean_alive ** 2, 0.0)

    n_bins = n_pre + n_sig + n_post
    starts = np.arange(n_bins, dtype=np.float64) * width
    time_bins = np.column_stack((starts, starts + width))
    mean_signal = np.full(n_bins, episode.background_level, dtype=np.float64)
    variance = np.zeros(n_bins)
    mean_signal[n_pre:n_pre + n_sig] += mean_sig
    variance[n_pre:n_pre + n_sig] = var_sig
    return FluorescenceTrace(time_bins=time_bins, mean_signal=mean_signal,
                             n_shots=n_shots, signal_variance=variance,
                             mean_final_alive=mean_alive,
                             var_final_alive=var_alive,
                             mean_initial_pairs=pairs_sum / n_shots)


def expected_multi_occupancy(n_atoms: int, wells: int) -> float:
    """Exact probability that uniform placement of ``n_atoms`` atoms puts
    at least two into one of ``wells`` wells."""
    if n_atoms < 0 or wells < 1:
        raise ValueError("need n_atoms >= 0 and wells >= 1")
    if n_atoms <= 1:
        return 0.0
    if n_atoms > wells:
        return 1.0
    p_all_distinct = 1.0
    for i in range(n_atoms):
        p_all_distinct *= (wells - i) / wells
    return 1.0 - p_all_distinct


def _poisson_pmf(lam: float, k_max: int) -> np.ndarray:
    pmf = np.empty(k_max + 1)
    pmf[0] = math.exp(-lam)
    for k in range(1, k_max + 1):
        pmf[k] = pmf[k - 1] * lam / k
    return pmf


def _terminal_single_probs(k_max: int, branching: float) -> np.ndarray:
    """P(one atom is left once collisions exhaust a k-atom well), k = 0..k_max."""
    p = np.empty(k_max + 1)
    p[0] = 0.0
    if k_max >= 1:
        p[1] = 1.0
    for k in range(2, k_max + 1):
        p[k] = branching * p[k - 2] + (1.0 - branching) * p[k - 1]
    return p


def steady_alive_expectation(mean_atoms: float, wells: int,
                             episode: MolassesEpisode,
                             t_after_start: float,
                             k_max: int = 60) -> float:
    """Expected alive atom count once pair collisions have resolved.

    Exact for Poisson-distributed loading with uniform placement: wells
    are then independently Poisson occupied.  Initially-single atoms decay
    with the illumination-limited lifetime up to ``t_after_start``;
    leftover atoms of multi-occupied wells only stop colliding.
    """
    lam = mean_atoms / wells
    pmf = _poisson_pmf(lam, k_max)
    p_single = _terminal_single_probs(k_max, episode.pair_loss_branching)
    singles = pmf[1] * math.exp(-t_after_start / episode.single_survival_lifetime)
    leftovers = float(np.dot(pmf[2:], p_single[2:]))
    return wells * (singles + leftovers)
