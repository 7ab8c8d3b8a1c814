"""Fitted power laws next to the threshold against their predictions.

For a handful of fixtures this solves e(mu) on a geometric ladder that
approaches the critical coupling, fits |e - edge| = K delta^alpha with
delta = |mu - threshold|, and prints the fitted exponent next to the
predicted one.  Exponentially small cases are fitted on the log scale
instead.  Expect a minute or so of runtime.
"""
import numpy as np

from bilap.asymptotics import (classify_case, fit_exponent, fit_exponential_rate, leading_constant,
                               threshold_coupling)
from bilap.fixtures import FIXTURES
from bilap.spectral_solver import SpectralProblem, eigenvalue_solve

RUNS = [
    ("delta_d1", "bottom", 1e-2),
    ("delta_d1", "top", 1e-2),
    ("delta_d2", "bottom", 3e-2),
    ("delta_d3", "bottom", 3e-2),
    ("laplacian_d1", "bottom", 1e-3),
    ("delta_d5", "bottom", 2e-2),
    ("delta_d2", "top", 0.4),
]


def main():
    print(f"{'fixture':<14} {'edge':<7} {'family':<20} {'predicted':>10} {'fitted':>10}")
    for name, edge, start in RUNS:
        prob = SpectralProblem(FIXTURES[name].generator)
        rep = prob.thresholds()
        case = classify_case(rep, edge)
        pred = leading_constant(rep, case)
        thr = threshold_coupling(rep, edge)
        sign = 1.0 if edge == "bottom" else -1.0
        if pred.exponential:
            # the gap is exp(-1 / (C delta)); halving delta would quickly leave the double range
            deltas = np.linspace(start / 4, start, 8)
        else:
            deltas = start * 0.5 ** np.arange(8)
        # start relative to the threshold when it is positive
        scale = abs(thr) if thr else 1.0
        res = [eigenvalue_solve(prob, thr + sign * scale * dl, rep) for dl in deltas]
        if pred.exponential:
            fit = fit_exponential_rate(res, edge, thr, float(pred.energy_power))
            want, got = pred.leading_constant, fit["rate"]
            label = "rate"
        else:
            kind = "dlogd" if pred.has_log_correction else (pred.log_factor or None)
            fit = fit_exponent(res, edge, thr, log_correction=kind)
            want = float(pred.energy_exponent)
            got = fit.corrected["exponent"] if pred.log_factor else fit.exponent_hat
            label = "exp"
        print(f"{name:<14} {edge:<7} {case.family:<20} {want:>10.4f} {got:>10.4f}  ({label})")


if __name__ == "__main__":
    main()
