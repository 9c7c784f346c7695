#!/usr/bin/env python3
"""Monte-Carlo recovery experiment for the sigmoidal cosinor fit.

Draws curve parameters, builds noiseless or noisy 5-day minute series, fits
with the two-stage estimator, and reports per-parameter error quantiles and
the fraction of trials inside the tolerance box.

    python3 scripts/recovery_experiment.py --trials 100 --noise 0.05
"""

import argparse
import sys
import time
from datetime import datetime
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from actirhythm import curve
from actirhythm.cosinor import FitConfig, fit_sigmoidal_cosinor
from actirhythm.preprocess import ActivitySeries


def hours_apart(a, b):
    d = abs(a - b) % 24.0
    return min(d, 24.0 - d)


def run(trials: int, noise_frac: float, seed: int, days: int):
    rng = np.random.default_rng(seed)
    t = (np.arange(days * 1440) + 0.5) / 60.0
    errors = {name: [] for name in ("min", "amplitude", "alpha", "beta", "phase")}
    in_box = 0
    started = time.time()
    for _ in range(trials):
        mn = rng.uniform(0, 5)
        amp = rng.uniform(1, 8)
        alpha = rng.uniform(-0.8, 0.8)
        beta = rng.uniform(0.5, 60)
        phase = rng.uniform(0, 24)
        y = curve.evaluate(t, mn, amp, alpha, beta, phase)
        if noise_frac > 0:
            y = y + rng.normal(0, noise_frac * amp, y.size)
        counts = np.maximum(np.expm1(y), 0.0)
        series = ActivitySeries.from_minutes("mc", datetime(2016, 5, 1), counts)
        fit = fit_sigmoidal_cosinor(series, FitConfig())
        errors["min"].append(abs(fit.min - mn))
        errors["amplitude"].append(abs(fit.amplitude - amp) / amp)
        errors["alpha"].append(abs(fit.alpha - alpha))
        errors["beta"].append(abs(fit.beta - beta) / beta)
        errors["phase"].append(hours_apart(fit.phase, phase))
        in_box += (abs(fit.min - mn) / max(mn, amp) <= 0.02
                   and abs(fit.amplitude - amp) / amp <= 0.02
                   and hours_apart(fit.phase, phase) <= 0.1
                   and abs(fit.alpha - alpha) <= 0.05
                   and abs(fit.beta - beta) / beta <= 0.10)
    elapsed = time.time() - started

    print(f"{trials} trials, noise sd = {noise_frac:.0%} of amplitude, "
          f"{elapsed:.1f}s ({elapsed / trials * 1000:.0f} ms/fit)")
    print(f"{'parameter':<12}{'median err':>12}{'p90 err':>12}{'max err':>12}  unit")
    units = {"min": "abs", "amplitude": "rel", "alpha": "abs",
             "beta": "rel", "phase": "hours"}
    for name, errs in errors.items():
        q50, q90 = np.quantile(errs, [0.5, 0.9])
        print(f"{name:<12}{q50:>12.2e}{q90:>12.2e}{max(errs):>12.2e}  {units[name]}")
    print(f"inside tolerance box: {in_box}/{trials}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--noise", type=float, default=0.05,
                        help="noise sd as a fraction of amplitude (0 = noiseless)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--days", type=int, default=5)
    args = parser.parse_args()
    run(args.trials, args.noise, args.seed, args.days)


if __name__ == "__main__":
    main()
