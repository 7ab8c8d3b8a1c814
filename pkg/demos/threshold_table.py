"""Threshold couplings and edge classes for the built-in fixture library.

Run with ``python3 demos/threshold_table.py``.  For every fixture the script
prints the vanishing orders of v at the two band edges, the resulting
effective dimensions k, the critical couplings mu_o and mu^o, and what a
coupling exactly at the threshold produces.
"""
import math

from bilap.asymptotics import resonance_report
from bilap.fixtures import FIXTURES
from bilap.spectral_solver import SpectralProblem


def fmt(x):
    return "inf" if math.isinf(x) else f"{x:.6g}"


def main():
    head = f"{'fixture':<18} {'d':>2} {'n_o':>3} {'n^o':>3} {'k':>3} {'k_top':>5} {'mu_o':>10} {'mu^o':>10}"
    print(head)
    print("-" * len(head))
    notes = []
    for name in sorted(FIXTURES):
        prob = SpectralProblem(FIXTURES[name].generator)
        rep = prob.thresholds()
        print(f"{name:<18} {rep.d:>2} {rep.n_o:>3} {rep.n_top:>3} {rep.k_bottom:>3} {rep.k_top:>5} "
              f"{fmt(rep.mu_lower):>10} {fmt(rep.mu_upper):>10}")
        out = resonance_report(rep)
        notes.append((name, out["bottom"], out["top"]))

    print()
    print("At the critical coupling:")
    for name, bottom, top in notes:
        print(f"  {name:<18} bottom: {bottom}")
        print(f"  {'':<18} top:    {top}")


if __name__ == "__main__":
    main()
