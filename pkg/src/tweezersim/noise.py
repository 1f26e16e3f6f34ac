"""Noise parameters and reproducible per-trial random streams.

Every stochastic quantity in the simulator flows through a ``NoiseModel``
(the measured rms errors, loss probabilities and lifetimes of the
apparatus) and an ``RngStream``.  Streams are derived from a 64-bit master
seed and a trial index through ``numpy.random.SeedSequence(master_seed,
spawn_key=(trial_index,))``, so any trial can be re-run in isolation and
trials are independent of execution order and worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    """Stochastic parameters of the experiment.

    Lengths in micrometers, times in seconds, rates in 1/s.  Defaults are
    the independently measured values of the apparatus.
    """

    transport_rms: float = 0.190         # axial conveyor positioning error
    insert_rms: float = 0.65             # reinsertion spread before recooling
    distance_meas_rms: float = 0.130     # camera pair-distance uncertainty
    position_meas_rms: float = 0.140     # camera single-atom position uncertainty
    radial_placement_rms: float = 2.0    # tilt / vertical-transport precision
    loss_prob_atom1: float = 0.065       # whole-sequence loss, extracted atom
    loss_prob_atom2: float = 0.0         # whole-sequence loss, stationary atom
    storage_lifetime_hdt: float = 8.0
    storage_lifetime_vdt: float = 13.0
    molasses_lifetime: float = 60.0
    pair_collision_rate: float = 20.0    # per doubly occupied well
    pair_loss_branching: float = 1.0     # P(collision ejects both atoms)

    def __post_init__(self):
        for field in ("transport_rms", "insert_rms", "distance_meas_rms",
                      "position_meas_rms", "radial_placement_rms"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be >= 0")
        for field in ("loss_prob_atom1", "loss_prob_atom2", "pair_loss_branching"):
            if not 0.0 <= getattr(self, field) <= 1.0:
                raise ValueError(f"{field} must be in [0, 1]")
        for field in ("storage_lifetime_hdt", "storage_lifetime_vdt",
                      "molasses_lifetime", "pair_collision_rate"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be > 0")

    def without_randomness(self) -> "NoiseModel":
        """Copy with all rms errors and losses switched off (lifetimes kept
        finite but losses disabled through zero probabilities)."""
        return replace(
            self,
            transport_rms=0.0, insert_rms=0.0, distance_meas_rms=0.0,
            position_meas_rms=0.0, radial_placement_rms=0.0,
            loss_prob_atom1=0.0, loss_prob_atom2=0.0,
            storage_lifetime_hdt=1e12, storage_lifetime_vdt=1e12,
            molasses_lifetime=1e12,
        )


class RngStream:
    """Deterministic random stream owned by a single trial.

    Identical (master_seed, trial_index) pairs replay the identical draw
    sequence; distinct trial indices give statistically independent
    streams.  ``draw_counter`` counts the draw calls made so far.
    """

    def __init__(self, master_seed: int, trial_index: int = 0,
                 subkeys: tuple = ()):
        self.master_seed = int(master_seed)
        self.trial_index = int(trial_index)
        self.subkeys = tuple(int(k) for k in subkeys)
        self.draw_counter = 0
        seq = np.random.SeedSequence(entropy=self.master_seed,
                                     spawn_key=(self.trial_index,
                                                *self.subkeys))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, key: int) -> "RngStream":
        """Independent sub-stream, e.g. one per shot within a run."""
        return RngStream(self.master_seed, self.trial_index,
                         self.subkeys + (key,))

    def gaussian(self, mean: float, rms: float) -> float:
        """Normal deviate; rms = 0 returns the mean exactly (no draw)."""
        if rms < 0:
            raise ValueError("rms must be >= 0")
        if rms == 0.0:
            return mean
        self.draw_counter += 1
        return mean + rms * self._gen.standard_normal()

    def bernoulli(self, p: float) -> bool:
        """True with probability p; exact at p = 0 and p = 1."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        self.draw_counter += 1
        return self._gen.random() < p

    def exponential_survival(self, duration: float, lifetime: float) -> bool:
        """Survival of an exponential decay over ``duration``."""
        if duration < 0:
            raise ValueError("duration must be >= 0")
        if lifetime <= 0:
            raise ValueError("lifetime must be > 0")
        self.draw_counter += 1
        return self._gen.random() < math.exp(-duration / lifetime)

    def exponential_time(self, rate: float) -> float:
        """Waiting time of a Poisson process with the given rate."""
        if rate <= 0:
            raise ValueError("rate must be > 0")
        self.draw_counter += 1
        return -math.log1p(-self._gen.random()) / rate

    def choose_wells(self, wells, count: int) -> list:
        """Sample ``count`` distinct entries of ``wells``, sorted ascending."""
        self.draw_counter += 1
        picked = self._gen.choice(len(wells), size=count, replace=False)
        return sorted(wells[i] for i in picked)

    def choose_distinct(self, n_options: int, count: int) -> np.ndarray:
        """Sample ``count`` distinct integers from [0, n_options)."""
        self.draw_counter += 1
        return self._gen.choice(n_options, size=count, replace=False)

    def poisson(self, mean: float) -> int:
        self.draw_counter += 1
        return int(self._gen.poisson(mean))

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        """Uniform integers in [low, high), as an array."""
        self.draw_counter += 1
        return self._gen.integers(low, high, size=size)

    def uniform_array(self, size: int) -> np.ndarray:
        """Uniforms in [0, 1), as an array."""
        self.draw_counter += 1
        return self._gen.random(size)


def trial_stream(master_seed: int, trial_index: int) -> RngStream:
    """Stream for one trial of an ensemble."""
    return RngStream(master_seed, trial_index)
