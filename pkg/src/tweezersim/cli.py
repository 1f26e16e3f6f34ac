"""Command-line entry point: run an experiment mode and export artifacts.

Modes: ``rearrange`` (distance-control benchmark), ``join`` (same-well
insertion), ``fluorescence`` (pair-collision decay traces).  Outputs are a
per-trial CSV plus a summary JSON (and one trace CSV per configured mean
atom number in fluorescence mode); identical configuration and seed give
byte-identical files regardless of worker count.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .collision import expected_multi_occupancy, fluorescence_trace, \
    steady_alive_expectation
from .config import ConfigError, ExperimentConfig, load_config, \
    packaged_config, SCHEMA_VERSION
from .dsl import parse_sequence, SequenceError
from .engine import run_ensemble
from .noise import RngStream

MODES = ("rearrange", "join", "fluorescence")

TRIALS_CSV_HEADER = ("trial_index,initial_sep,final_sep_measured,same_well,"
                     "alive_1,alive_2,post_selected")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trials_csv(path: Path, records) -> None:
    lines = [TRIALS_CSV_HEADER]
    for r in records:
        alive1 = r.alive_final[0] if len(r.alive_final) > 0 else None
        alive2 = r.alive_final[1] if len(r.alive_final) > 1 else None
        lines.append(",".join([
            _fmt(r.trial_index), _fmt(r.initial_sep),
            _fmt(r.final_sep_measured), _fmt(r.same_well),
            _fmt(alive1), _fmt(alive2), _fmt(r.post_selected)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trace_csv(path: Path, trace) -> None:
    lines = ["t_start,t_end,mean_signal"]
    for (t0, t1), level in zip(trace.time_bins, trace.mean_signal):
        lines.append(f"{_fmt(float(t0))},{_fmt(float(t1))},{_fmt(float(level))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _rate_dict(estimate) -> dict:
    return {"point": estimate.point, "lower": estimate.lower,
            "upper": estimate.upper, "confidence": estimate.confidence,
            "k": estimate.k, "n": estimate.n}


def _trial_mode_summary(cfg: ExperimentConfig, mode: str, seq, records) -> dict:
    noise = cfg.noise
    spacing = cfg.hdt.well_spacing
    p_uncorr, p_noloss = analysis.loss_algebra(noise.loss_prob_atom1,
                                               noise.loss_prob_atom2)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "trials": len(records),
        "post_selected": sum(r.post_selected for r in records),
        "uncorrelated_loss_prob": p_uncorr,
        "no_loss_prob": p_noloss,
    }

    finals = analysis.collect_distances(records, "final")
    if finals.values.size >= 2:
        summary["final_distance"] = {
            "n": int(finals.values.size),
            "mean": float(np.mean(finals.values)),
            "std": float(np.std(finals.values, ddof=1)),
        }

    if summary["post_selected"] > 0:
        summary["rates"] = {
            "same_well": _rate_dict(analysis.success_rate(records, "same_well")),
            "pair_intact": _rate_dict(
                analysis.success_rate(records, "pair_intact")),
        }
        target = seq.target_distance
        if target is not None:
            summary["rates"]["within_one_well_of_target"] = _rate_dict(
                analysis.success_rate(records, "within_one_well_of_target",
                                      target_distance=target, period=spacing))

    true_rms = analysis.error_budget(noise.transport_rms, noise.insert_rms, 0.0)
    summary["predicted_same_well"] = {
        "true_distance_rms": true_rms,
        "no_loss_prob": p_noloss,
        "value": analysis.insertion_success_probability(
            true_rms, p_noloss, cfg.hdt.wavelength),
        "sensitivity": analysis.insertion_success_sensitivity(
            true_rms, p_noloss, cfg.hdt.wavelength),
    }
    target = seq.target_distance
    if target is not None and target > 0:
        wells_target = round(target / spacing)
        offset = target - wells_target * spacing
        summary["predicted_within_one_well_of_target"] = (
            p_noloss * analysis.well_capture_probability(offset, true_rms,
                                                         spacing))

    if mode == "rearrange" and finals.values.size >= 50:
        hist = analysis.build_histogram(finals, bin_width=spacing / 6.0)
        fit = analysis.fit_comb(hist, period=spacing)
        summary["comb_fit"] = {
            "center": fit.center,
            "envelope_width": fit.envelope_width,
            "peak_width": fit.peak_width,
            "period": fit.period,
            "residual": fit.residual,
            "degenerate": fit.degenerate,
        }
        if not fit.degenerate:
            summary["comb_fit"]["true_width_deconvolved"] = \
                analysis.deconvolve_width(
                    fit.envelope_width,
                    min(noise.distance_meas_rms, fit.envelope_width))
    return summary


def _run_trial_mode(cfg: ExperimentConfig, mode: str, out_dir: Path,
                    workers: int) -> list:
    if cfg.sequence_path is None:
        raise ConfigError(f"mode {mode!r} needs a sequence_path")
    seq = parse_sequence(cfg.sequence_path.read_text(encoding="utf-8"))
    records = run_ensemble(seq, cfg.noise, cfg.trials, cfg.master_seed,
                           cfg.hdt, cfg.vdt,
                           cfg.post_selection_min_separation, workers)
    trials_path = out_dir / "trials.csv"
    write_trials_csv(trials_path, records)
    summary = _trial_mode_summary(cfg, mode, seq, records)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True)
                            + "\n", encoding="utf-8")
    return [trials_path, summary_path]


def _run_fluorescence(cfg: ExperimentConfig, out_dir: Path) -> list:
    settings = cfg.fluorescence
    episode = settings.episode(cfg.noise)
    layout = settings.layout()
    written = []
    runs = []
    for run_index, mean in enumerate(settings.mean_atoms):
        stream = RngStream(cfg.master_seed, run_index)
        trace = fluorescence_trace(settings.atom_count(mean), settings.wells,
                                   episode, settings.shots, stream,
                                   layout=layout,
                                   placement=settings.placement)
        name = f"trace_mean{mean:g}.csv"
        trace_path = out_dir / name
        write_trace_csv(trace_path, trace)
        written.append(trace_path)

        n_pre, n_sig, _ = layout.bin_counts(episode.duration)
        signal = trace.mean_signal[n_pre:n_pre + n_sig]
        steady_pred = (episode.background_level
                       + episode.fluorescence_per_atom
                       * steady_alive_expectation(
                           mean, settings.wells, episode, episode.duration))
        runs.append({
            "mean_atoms": mean,
            "file": name,
            "shots": settings.shots,
            "wells": settings.wells,
            "initial_level": float(signal[0]),
            "steady_level": float(np.mean(signal[-3:])),
            "predicted_steady_level": steady_pred,
            "mean_final_alive": trace.mean_final_alive,
            "multi_occupancy_prob": expected_multi_occupancy(
                int(round(mean)), settings.wells),
        })
    summary = {
        "schema_version": SCHEMA_VERSION,
        "mode": "fluorescence",
        "pair_collision_rate": cfg.noise.pair_collision_rate,
        "traces": runs,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True)
                            + "\n", encoding="utf-8")
    written.append(summary_path)
    return written


def run_experiment(cfg: ExperimentConfig, mode: str, out_dir,
                   workers: int = 1) -> list:
    """Run one mode and write its artifacts; returns the written paths.

    Partially written outputs are removed if the run fails.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if mode == "fluorescence":
            written = _run_fluorescence(cfg, out_dir)
        else:
            written = _run_trial_mode(cfg, mode, out_dir, workers)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        for stale in out_dir.glob("*.tmp"):
            stale.unlink(missing_ok=True)
        raise
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweezersim",
        description="Monte Carlo simulation of two-trap atom rearrangement")
    parser.add_argument("--mode", required=True, choices=MODES)
    parser.add_argument("--config", help="config JSON path (default: the "
                        "packaged preset for the mode)")
    parser.add_argument("--trials", type=int, help="override trial count")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--sequence", help="override sequence file path")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes for trial execution")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config_path = Path(args.config) if args.config \
            else packaged_config(args.mode)
        cfg = load_config(config_path)
        overrides = {}
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            overrides["trials"] = args.trials
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.sequence is not None:
            seq_path = Path(args.sequence)
            if not seq_path.is_file():
                raise ConfigError(f"sequence file not found: {seq_path}")
            overrides["sequence_path"] = seq_path
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    try:
        written = run_experiment(cfg, args.mode, args.out, args.workers)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (SequenceError, ValueError, OSError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
