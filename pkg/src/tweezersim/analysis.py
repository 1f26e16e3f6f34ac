"""Statistics over distance samples and trial records.

Implements the closed-form same-well insertion probability and its
quadrature cross-check, rms error budgets, width deconvolution, the
uncorrelated-loss algebra, comb histogram fitting (Gaussian envelope over
periodic Gaussian peaks), exact binomial confidence intervals, and success
rates over trial ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize, stats

from .kernels import comb_profile

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DistanceSample:
    """Measured pair distances in micrometers."""

    values: np.ndarray
    label: str = "final"        # 'initial' | 'final'

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=np.float64))
        if self.label not in ("initial", "final"):
            raise ValueError("label must be 'initial' or 'final'")
        if self.values.size and (not np.all(np.isfinite(self.values))
                                 or np.any(self.values < 0)):
            raise ValueError("distances must be finite and >= 0")


@dataclass(frozen=True)
class Histogram:
    """Counts over contiguous half-open bins [origin + i*w, origin + (i+1)*w)."""

    origin: float
    bin_width: float
    first_index: int
    counts: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        n = self.counts.size
        return self.origin + (self.first_index + np.arange(n + 1)) * self.bin_width

    @property
    def centers(self) -> np.ndarray:
        return self.edges[:-1] + 0.5 * self.bin_width

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class CombFit:
    """Result of fitting an envelope-times-peak-train model to a histogram."""

    center: float            # envelope center
    envelope_width: float    # Gaussian sigma of the envelope
    peak_width: float        # Gaussian sigma of each tooth
    period: float
    amplitude: float
    phase: float
    residual: float          # sum of squared count residuals
    degenerate: bool = False
    stderr: Optional[dict] = None


@dataclass(frozen=True)
class RateEstimate:
    """Binomial point estimate with an exact central confidence interval."""

    point: float
    lower: float
    upper: float
    confidence: float
    k: int
    n: int


def insertion_success_probability(true_distance_rms: float,
                                  no_loss_prob: float,
                                  wavelength: float) -> float:
    """Probability that an atom inserted with a Gaussian axial error lands
    in the intended well and both atoms survive the manipulation.

    The capture window is half a well spacing on either side, so the
    Gaussian integral reduces to an error function.
    """
    if true_distance_rms <= 0:
        raise ValueError("true_distance_rms must be > 0")
    if not 0.0 <= no_loss_prob <= 1.0:
        raise ValueError("no_loss_prob must be in [0, 1]")
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    return no_loss_prob * math.erf((wavelength / 4.0)
                                   / (SQRT2 * true_distance_rms))


def insertion_success_quadrature(true_distance_rms: float,
                                 no_loss_prob: float,
                                 wavelength: float) -> float:
    """Adaptive-quadrature evaluation of the same integral, kept as an
    independent cross-check of the closed form."""
    if true_distance_rms <= 0:
        raise ValueError("true_distance_rms must be > 0")
    s2 = 2.0 * true_distance_rms ** 2
    value, _ = integrate.quad(lambda y: math.exp(-y * y / s2),
                              -wavelength / 4.0, wavelength / 4.0,
                              epsabs=1e-14, epsrel=1e-14)
    return no_loss_prob * value / (math.sqrt(2.0 * math.pi) * true_distance_rms)


def well_capture_probability(offset: float, width: float,
                             spacing: float) -> float:
    """P(a Gaussian draw around ``offset`` snaps to the well at 0), i.e.
    lands within half a ``spacing`` of it."""
    if width <= 0:
        raise ValueError("width must be > 0")
    half = spacing / 2.0
    z1 = (half - offset) / (SQRT2 * width)
    z0 = (-half - offset) / (SQRT2 * width)
    return 0.5 * (math.erf(z1) - math.erf(z0))


def insertion_success_sensitivity(true_distance_rms: float,
                                  no_loss_prob: float,
                                  wavelength: float) -> dict:
    """First-order partial derivatives of the success probability."""
    a = wavelength / 4.0
    z = a / (SQRT2 * true_distance_rms)
    erf_z = math.erf(z)
    dp_dwidth = no_loss_prob * (2.0 / math.sqrt(math.pi)) * math.exp(-z * z) \
        * (-z / true_distance_rms)
    return {"d_true_distance_rms": dp_dwidth, "d_no_loss_prob": erf_z}


def error_budget(transport_rms: float, insert_rms: float,
                 meas_rms: float) -> float:
    """rms of the final measured distance: two transports in quadrature
    with one insertion and one distance measurement."""
    if transport_rms < 0 or insert_rms < 0 or meas_rms < 0:
        raise ValueError("rms inputs must be >= 0")
    return math.sqrt(2.0 * transport_rms ** 2 + insert_rms ** 2
                     + meas_rms ** 2)


def deconvolve_width(measured_width: float, meas_rms: float) -> float:
    """Remove the measurement contribution from a fitted width."""
    if meas_rms < 0 or measured_width < meas_rms:
        raise ValueError("need measured_width >= meas_rms >= 0")
    return math.sqrt(measured_width ** 2 - meas_rms ** 2)


def loss_algebra(p1: float, p2: float) -> tuple:
    """(P(two uncorrelated single losses), P(no loss at all))."""
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise ValueError("probabilities must be in [0, 1]")
    return p1 * p2, (1.0 - p1) * (1.0 - p2)


def build_histogram(sample: DistanceSample, bin_width: float,
                    origin: float = 0.0) -> Histogram:
    """Histogram with half-open bins anchored at ``origin``."""
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    if sample.values.size == 0:
        return Histogram(origin=origin, bin_width=bin_width, first_index=0,
                         counts=np.zeros(0, dtype=np.int64))
    idx = np.floor((sample.values - origin) / bin_width).astype(np.int64)
    first = int(idx.min())
    counts = np.bincount(idx - first, minlength=int(idx.max()) - first + 1)
    return Histogram(origin=origin, bin_width=bin_width, first_index=first,
                     counts=counts.astype(np.int64))


def _comb_model(x: np.ndarray, amplitude, center, env_width, peak_width,
                phase, period) -> np.ndarray:
    lo = int(math.floor((x[0] - phase) / period)) - 1
    hi = int(math.ceil((x[-1] - phase) / period)) + 1
    return comb_profile(np.ascontiguousarray(x, dtype=np.float64),
                        float(amplitude), float(center),
                        float(abs(env_width)), float(abs(peak_width)),
                        float(phase), float(period), lo, hi)


def _fit_stderr(x, y, params, period) -> Optional[dict]:
    names = ("amplitude", "center", "envelope_width", "peak_width", "phase")
    n_free = len(params)
    jac = np.empty((x.size, n_free))
    base = _comb_model(x, *params, period)
    for j in range(n_free):
        h = max(1e-7, 1e-7 * abs(params[j]))
        stepped = list(params)
        stepped[j] += h
        jac[:, j] = (_comb_model(x, *stepped, period) - base) / h
    dof = x.size - n_free
    if dof <= 0:
        return None
    s2 = float(np.sum((y - base) ** 2)) / dof
    try:
        cov = s2 * np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return None
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return dict(zip(names, err))


def fit_comb(hist: Histogram, period: float, fit_phase: bool = True,
             max_iter: int = 500) -> CombFit:
    """Least-squares fit of envelope * peak-train to a histogram.

    Uses a derivative-free simplex restarted over a period/8 grid of comb
    phases to escape the periodic local minima.  Raises on an empty
    histogram; flags (instead of fitting) histograms whose mass sits in a
    single bin or a single tooth, where one or both widths are
    unidentifiable.
    """
    if period <= 0:
        raise ValueError("period must be > 0")
    if hist.counts.size == 0 or hist.total() == 0:
        raise ValueError("histogram is empty")
    x = hist.centers
    y = hist.counts.astype(np.float64)
    w_sum = y.sum()
    mean = float((x * y).sum() / w_sum)
    var = float((y * (x - mean) ** 2).sum() / w_sum)

    occupied = np.flatnonzero(y > 0)
    teeth = np.round((x[occupied] - round(mean / period) * period) / period)
    if occupied.size == 1 or np.unique(teeth).size == 1:
        peak = math.sqrt(var) if occupied.size > 1 else float("nan")
        return CombFit(center=mean, envelope_width=float("nan"),
                       peak_width=peak, period=period, amplitude=float(y.max()),
                       phase=float(np.remainder(mean, period)),
                       residual=0.0, degenerate=True)

    env0 = max(math.sqrt(var), period)
    peak0 = period / 6.0
    amp0 = float(y.max())

    def objective(theta, phase_fixed):
        amp, c, lnw_env, lnw_peak = theta[:4]
        phase = theta[4] if phase_fixed is None else phase_fixed
        model = _comb_model(x, amp * amp0, c,
                            math.exp(lnw_env) * env0,
                            math.exp(lnw_peak) * peak0, phase, period)
        return float(np.sum((model - y) ** 2))

    phases = ([(k - 4) * period / 8.0 for k in range(8)]
              if fit_phase else [0.0])
    best = None
    for phase_start in phases:
        theta0 = [1.0, mean, 0.0, 0.0]
        if fit_phase:
            theta0.append(phase_start)
            args = (None,)
        else:
            args = (phase_start,)
        res = optimize.minimize(
            objective, np.asarray(theta0), args=args, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": max_iter,
                     "maxfev": max_iter * 4})
        if best is None or res.fun < best.fun:
            best = res
            best_phase_fixed = args[0]
    amp, c, lnw_env, lnw_peak = best.x[:4]
    phase = float(best.x[4]) if best_phase_fixed is None else best_phase_fixed
    params = (float(amp * amp0), float(c),
              float(math.exp(lnw_env) * env0),
              float(math.exp(lnw_peak) * peak0), phase)
    stderr = _fit_stderr(x, y, params, period)
    return CombFit(center=params[1], envelope_width=params[2],
                   peak_width=params[3], period=period, amplitude=params[0],
                   phase=phase, residual=float(best.fun), stderr=stderr)


def binomial_ci(k: int, n: int, confidence: float = 0.6827) -> RateEstimate:
    """Exact (Clopper-Pearson) central interval for k successes in n trials.

    At the boundaries the degenerate side is exact, so the full error
    budget goes to the other side: k = 0 gives [0, 1 - alpha**(1/n)] and
    k = n gives [alpha**(1/n), 1].
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError("need n >= 1 and 0 <= k <= n")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    alpha = 1.0 - confidence
    point = k / n
    if k == 0:
        lower, upper = 0.0, 1.0 - alpha ** (1.0 / n)
    elif k == n:
        lower, upper = alpha ** (1.0 / n), 1.0
    else:
        lower = float(stats.beta.ppf(alpha / 2.0, k, n - k + 1))
        upper = float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return RateEstimate(point=point, lower=lower, upper=upper,
                        confidence=confidence, k=k, n=n)


SUCCESS_CRITERIA = ("same_well", "within_one_well_of_target", "pair_intact")


def success_rate(records, criterion: str, confidence: float = 0.6827,
                 target_distance: Optional[float] = None,
                 period: float = 0.532) -> RateEstimate:
    """Success rate over post-selected trials with an exact interval.

    ``same_well``: both atoms alive and in one well after the
    manipulation.  ``within_one_well_of_target``: both alive and the true
    final separation within half a period of ``target_distance``.
    ``pair_intact``: both atoms alive at the end of the sequence.
    """
    if criterion not in SUCCESS_CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    selected = [r for r in records if r.post_selected and r.n_loaded >= 2]
    n = len(selected)
    if n == 0:
        raise ValueError("no post-selected records")
    if criterion == "same_well":
        k = sum(r.same_well for r in selected)
    elif criterion == "pair_intact":
        k = sum(len(r.alive_final) >= 2 and r.alive_final[0]
                and r.alive_final[1] for r in selected)
    else:
        if target_distance is None:
            raise ValueError("criterion needs a target_distance")
        k = sum(r.final_sep_true is not None
                and abs(r.final_sep_true - target_distance) <= period / 2.0
                for r in selected)
    return binomial_ci(k, n, confidence)


def collect_distances(records, which: str = "final") -> DistanceSample:
    """Measured distances of post-selected trials as a DistanceSample."""
    if which == "final":
        vals = [r.final_sep_measured for r in records
                if r.post_selected and r.final_sep_measured is not None]
    elif which == "initial":
        vals = [r.initial_sep for r in records if r.initial_sep is not None]
    else:
        raise ValueError("which must be 'initial' or 'final'")
    return DistanceSample(values=np.asarray(vals, dtype=np.float64),
                          label=which)


def read_distance_csv(path) -> DistanceSample:
    """One measured distance per line, micrometers."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                values.append(float(line))
    return DistanceSample(values=np.asarray(values), label="final")
