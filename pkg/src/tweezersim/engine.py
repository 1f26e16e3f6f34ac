"""Kinematic execution of manipulation sequences over a world state.

Atoms are not integrated dynamically: the axial stiffness of both traps
exceeds the radial stiffness by nearly two orders of magnitude, so a
trapped atom rides the axial motion of its trap exactly.  Each step moves
trap patterns and bound atoms, adds the measured rms errors from the
``NoiseModel``, and draws storage-lifetime survival where a step takes
time in a trap.

Whole-sequence manipulation losses (``loss_prob_atom1`` for the atom that
took the tweezer round trip, ``loss_prob_atom2`` for atoms that stayed in
the horizontal trap) are drawn once per trial, right after the last
manipulation step, where the ground-truth well assignment is also
snapshotted.  Illumination steps that follow (imaging, molasses) can kill
atoms but no longer change the recorded outcome of the manipulation.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from typing import Optional

from .collision import MolassesEpisode, apply_molasses
from .dsl import (Sequence, SequenceError, SequenceRangeError, Step,
                  TILT_MAX_UM, VDT_TRANSPORT_MAX_UM)
from .noise import NoiseModel, RngStream, trial_stream
from .traps import TrapConfig, default_hdt, default_vdt, nearest_well, well_center


class ExecutionError(SequenceError):
    """A step could not be applied to the current world state."""


@dataclass
class Atom:
    id: int
    x: float
    y: float
    z: float
    alive: bool = True
    bound: Optional[str] = None      # 'hdt' | 'vdt' | None
    well: Optional[int] = None
    was_extracted: bool = False


@dataclass
class TrapState:
    cfg: TrapConfig
    axial_shift: float = 0.0
    x_offset: float = 0.0
    scale: float = 1.0

    def well_pos(self, index: int) -> float:
        return well_center(self.cfg, index, self.axial_shift)

    def nearest(self, axial_coord: float) -> int:
        return nearest_well(self.cfg, axial_coord, self.axial_shift).index


@dataclass
class WorldState:
    atoms: list
    hdt: TrapState
    vdt: TrapState
    clock: float = 0.0

    @classmethod
    def new(cls, hdt_cfg: TrapConfig, vdt_cfg: TrapConfig) -> "WorldState":
        return cls(atoms=[],
                   hdt=TrapState(hdt_cfg, x_offset=hdt_cfg.transverse_center[0],
                                 scale=1.0),
                   vdt=TrapState(vdt_cfg, scale=0.0))

    def alive_bound(self, trap: str):
        return [a for a in self.atoms if a.alive and a.bound == trap]

    def atom_by_id(self, atom_id: int) -> Optional[Atom]:
        for a in self.atoms:
            if a.id == atom_id:
                return a
        return None


@dataclass(frozen=True)
class Measurement:
    """One camera exposure: measured axial positions and pair distances."""

    clock: float
    positions: dict
    distances: dict


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one simulated run of a sequence."""

    trial_index: int
    n_loaded: int
    initial_sep: Optional[float]          # measured, first image
    final_sep_measured: Optional[float]   # measured, last image after manipulation
    final_sep_true: Optional[float]       # ground truth, um
    final_sep_wells: Optional[int]        # ground truth, well count
    same_well: bool                       # both alive and in one well after manipulation
    alive_final: tuple                    # by atom id, at end of sequence
    post_selected: bool


def _kill(atom: Atom) -> None:
    atom.alive = False
    atom.bound = None
    atom.well = None


def _select_loaded(state: WorldState, atom_id: int) -> Atom:
    """Resolve an atom selector.

    Selecting an id that was never loaded is a programming error.  A
    loaded atom that has been lost is a legitimate physical situation: the
    hardware still executes the programmed trap move, so steps use the
    atom's frozen position as the command reference and skip any
    atom-specific action.
    """
    atom = state.atom_by_id(atom_id)
    if atom is None:
        raise ExecutionError(f"selector matches no alive atom (atom={atom_id})")
    return atom


def _require_bound(atom: Atom, trap: str) -> None:
    if atom.bound != trap:
        raise ExecutionError(
            f"atom {atom.id} is bound to {atom.bound!r}, step needs {trap!r}")


def _resnap_hdt(state: WorldState) -> None:
    """Re-derive positions of HDT-bound atoms from their well indices so
    they sit exactly on the current well grid."""
    for atom in state.alive_bound("hdt"):
        atom.y = state.hdt.well_pos(atom.well)
        atom.x = state.hdt.x_offset


def _load_atoms(state, step, noise, stream):
    if state.atoms:
        raise ExecutionError("atoms already loaded")
    half = step.spread / 2.0
    spacing = state.hdt.cfg.well_spacing
    base = state.hdt.cfg.axial_phase_offset + state.hdt.axial_shift
    k_min = math.ceil((-half - base) / spacing)
    k_max = math.floor((half - base) / spacing)
    wells = list(range(k_min, k_max + 1))
    if step.count > len(wells):
        raise ExecutionError(
            f"cannot place {step.count} atoms in {len(wells)} wells")
    chosen = stream.choose_wells(wells, step.count)
    for i, k in enumerate(chosen, start=1):
        state.atoms.append(Atom(id=i, x=state.hdt.x_offset,
                                y=state.hdt.well_pos(k),
                                z=state.hdt.cfg.transverse_center[1],
                                bound="hdt", well=k))


def _image(state, step, noise, stream):
    alive = sorted((a for a in state.atoms if a.alive), key=lambda a: a.id)
    positions = {}
    for a in alive:
        positions[a.id] = a.y + stream.gaussian(0.0, noise.position_meas_rms)
    distances = {}
    for i in range(len(alive)):
        for j in range(i + 1, len(alive)):
            true = abs(alive[j].y - alive[i].y)
            # a reported distance is non-negative by construction
            distances[(alive[i].id, alive[j].id)] = abs(
                true + stream.gaussian(0.0, noise.distance_meas_rms))
    state.clock += step.exposure
    return Measurement(clock=state.clock, positions=positions,
                       distances=distances)


def _transport_hdt(state, step, noise, stream):
    sel = _select_loaded(state, step.atom)
    if sel.alive:
        _require_bound(sel, "hdt")
    shift = (step.target_y - sel.y) + stream.gaussian(0.0, noise.transport_rms)
    state.hdt.axial_shift += shift
    _resnap_hdt(state)
    for atom in state.alive_bound("hdt"):
        if not stream.exponential_survival(step.duration,
                                           noise.storage_lifetime_hdt):
            _kill(atom)
    state.clock += step.duration


def _extract_vdt(state, step, noise, stream):
    sel = _select_loaded(state, step.atom)
    state.vdt.scale = 1.0
    if sel.alive:
        _require_bound(sel, "hdt")
        k = state.vdt.nearest(sel.z)
        sel.bound = "vdt"
        sel.well = k
        sel.was_extracted = True
        sel.z = state.vdt.well_pos(k)
        sel.x = state.vdt.cfg.transverse_center[0] + stream.gaussian(
            0.0, noise.radial_placement_rms)
    # The axial (y) coordinate is deliberately left untouched: the handoff
    # inherits the conveyor positioning error, which is what makes two
    # transports contribute sqrt(2)*transport_rms to the final distance.
    dz = step.lift + stream.gaussian(0.0, noise.radial_placement_rms)
    state.vdt.axial_shift += dz
    for atom in state.alive_bound("vdt"):
        atom.z = state.vdt.well_pos(atom.well)
    state.clock += step.duration


def _tilt_hdt(state, step, noise, stream):
    if abs(step.delta_x) > TILT_MAX_UM:
        raise SequenceRangeError(f"dx violates bound: |dx| <= {TILT_MAX_UM:g} um")
    state.hdt.x_offset += step.delta_x + stream.gaussian(
        0.0, noise.radial_placement_rms)
    for atom in state.alive_bound("hdt"):
        atom.x = state.hdt.x_offset
    state.clock += step.duration


def _transport_vdt(state, step, noise, stream):
    if abs(step.target_z) > VDT_TRANSPORT_MAX_UM:
        raise SequenceRangeError(
            f"z violates bound: |z| <= {VDT_TRANSPORT_MAX_UM:g} um")
    origin = state.vdt.cfg.axial_phase_offset + state.vdt.axial_shift
    dz = (step.target_z - origin) + stream.gaussian(
        0.0, noise.radial_placement_rms)
    state.vdt.axial_shift += dz
    for atom in state.alive_bound("vdt"):
        atom.z = state.vdt.well_pos(atom.well)
    for atom in state.alive_bound("vdt"):
        if not stream.exponential_survival(step.duration,
                                           noise.storage_lifetime_vdt):
            _kill(atom)
    state.clock += step.duration


def _merge_radial(state, step, noise, stream):
    state.hdt.x_offset = state.vdt.cfg.transverse_center[0] + stream.gaussian(
        0.0, noise.radial_placement_rms)
    for atom in state.alive_bound("hdt"):
        atom.x = state.hdt.x_offset
    state.clock += step.duration


def _ramp_vdt(state, step, noise, stream):
    if step.final_scale == 0.0 and state.vdt.scale > 0.0:
        for atom in sorted(state.alive_bound("vdt"), key=lambda a: a.id):
            y_settle = atom.y + stream.gaussian(0.0, noise.insert_rms)
            k = state.hdt.nearest(y_settle)
            atom.bound = "hdt"
            atom.well = k
            atom.y = state.hdt.well_pos(k)
            atom.x = state.hdt.x_offset
            atom.z = state.hdt.cfg.transverse_center[1]
    state.vdt.scale = step.final_scale
    state.clock += step.duration


def _molasses(state, step, noise, stream):
    episode = MolassesEpisode(duration=step.duration,
                              pair_collision_rate=noise.pair_collision_rate,
                              single_survival_lifetime=noise.molasses_lifetime,
                              pair_loss_branching=noise.pair_loss_branching)
    apply_molasses(state, episode, stream)


_HANDLERS = {
    "load_atoms": _load_atoms,
    "image": _image,
    "transport_hdt": _transport_hdt,
    "extract_vdt": _extract_vdt,
    "tilt_hdt": _tilt_hdt,
    "transport_vdt": _transport_vdt,
    "merge_radial": _merge_radial,
    "ramp_vdt": _ramp_vdt,
    "molasses": _molasses,
}


def execute_step(state: WorldState, step: Step, noise: NoiseModel,
                 stream: RngStream) -> Optional[Measurement]:
    """Apply one step to the world state (mutated in place).

    Returns a Measurement for imaging steps, None otherwise.
    """
    return _HANDLERS[step.kind](state, step, noise, stream)


def _manipulation_losses(state: WorldState, noise: NoiseModel,
                         stream: RngStream) -> None:
    for atom in sorted(state.atoms, key=lambda a: a.id):
        if not atom.alive:
            continue
        p = (noise.loss_prob_atom1 if atom.was_extracted
             else noise.loss_prob_atom2)
        if stream.bernoulli(p):
            _kill(atom)


def _ground_truth(state: WorldState):
    """Well-registry outcome for atoms 1 and 2 after the manipulation."""
    a1, a2 = state.atom_by_id(1), state.atom_by_id(2)
    if (a1 is None or a2 is None or not (a1.alive and a2.alive)
            or a1.bound != "hdt" or a2.bound != "hdt"):
        return False, None, None
    wells = abs(a2.well - a1.well)
    return wells == 0, wells, wells * state.hdt.cfg.well_spacing


def run_trial(seq: Sequence, noise: NoiseModel, stream: RngStream,
              hdt_cfg: Optional[TrapConfig] = None,
              vdt_cfg: Optional[TrapConfig] = None,
              post_selection_min_sep: float = 10.0) -> TrialRecord:
    """Execute a sequence once and record the outcome.

    The first imaging step provides the initial measured separation used
    for post-selection; the last imaging step after the final manipulation
    at which both atoms are alive provides the measured final separation.
    """
    state = WorldState.new(hdt_cfg or default_hdt(), vdt_cfg or default_vdt())
    last_manip = seq.last_manipulation_index()

    initial_sep = None
    final_meas = None
    same_well, final_wells, final_true = False, None, None
    for i, step in enumerate(seq.steps):
        meas = execute_step(state, step, noise, stream)
        if meas is not None and (1, 2) in meas.distances:
            if initial_sep is None:
                initial_sep = meas.distances[(1, 2)]
            if i > last_manip:
                final_meas = meas.distances[(1, 2)]
        if i == last_manip:
            _manipulation_losses(state, noise, stream)
            same_well, final_wells, final_true = _ground_truth(state)
    if last_manip == -1:
        same_well, final_wells, final_true = _ground_truth(state)

    alive_final = tuple(a.alive for a in sorted(state.atoms, key=lambda a: a.id))
    post_selected = initial_sep is not None and initial_sep > post_selection_min_sep
    return TrialRecord(
        trial_index=stream.trial_index,
        n_loaded=len(state.atoms),
        initial_sep=initial_sep,
        final_sep_measured=final_meas,
        final_sep_true=final_true,
        final_sep_wells=final_wells,
        same_well=same_well,
        alive_final=alive_final,
        post_selected=post_selected,
    )


_WORKER_CTX = {}


def _init_worker(payload):
    _WORKER_CTX["payload"] = payload


def _run_indexed(trial_index: int) -> TrialRecord:
    seq, noise, hdt_cfg, vdt_cfg, min_sep, master_seed = _WORKER_CTX["payload"]
    return run_trial(seq, noise, trial_stream(master_seed, trial_index),
                     hdt_cfg, vdt_cfg, min_sep)


def run_ensemble(seq: Sequence, noise: NoiseModel, n_trials: int,
                 master_seed: int,
                 hdt_cfg: Optional[TrapConfig] = None,
                 vdt_cfg: Optional[TrapConfig] = None,
                 post_selection_min_sep: float = 10.0,
                 workers: int = 1) -> list:
    """Run ``n_trials`` independent trials, ordered by trial index.

    Each trial derives its stream from (master_seed, trial_index) alone,
    so the result is identical for any worker count or execution order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    payload = (seq, noise, hdt_cfg or default_hdt(), vdt_cfg or default_vdt(),
               post_selection_min_sep, master_seed)
    if workers <= 1:
        _init_worker(payload)
        return [_run_indexed(i) for i in range(n_trials)]
    with multiprocessing.Pool(processes=workers, initializer=_init_worker,
                              initargs=(payload,)) as pool:
        return list(pool.imap(_run_indexed, range(n_trials),
                              chunksize=max(1, n_trials // (workers * 8))))
