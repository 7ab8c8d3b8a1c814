"""How the bound state leaves the band as the coupling grows.

``python3 demos/eigenvalue_curves.py`` tabulates e(mu) for the delta
generator in d = 1, 2, 3 on both sides of the spectrum.  Below the band the
eigenvalue detaches from 0 for every mu > 0 when d <= 4; above the band in
d = 3 nothing happens until |mu| passes mu^o.  For large |mu| the ratio
e / mu tends to -1 (the squared norm of the generator).
"""
import numpy as np

from bilap.core_model import delta_generator
from bilap.errors import BracketFailure, NoDiscreteSpectrum
from bilap.spectral_solver import SpectralProblem, eigenvalue_solve


def row(prob, rep, mu):
    try:
        r = eigenvalue_solve(prob, mu, rep)
    except NoDiscreteSpectrum:
        return "   (inside band)"
    except BracketFailure:
        # d = 2 top: e - 16 ~ exp(-1 / (C |mu|)) drops below the smallest double
        return "  (< 1e-308 off)"
    if mu > 0:
        return f"{r.e:16.8e}"
    return f"{prob.top:>4.0f} + {r.offset:9.3e}"


def main():
    mus = [1e-2, 1e-1, 1.0, 10.0, 30.0, 1e3]
    probs = {d: SpectralProblem(delta_generator(d)) for d in (1, 2, 3)}
    reps = {d: p.thresholds() for d, p in probs.items()}
    for d, rep in reps.items():
        print(f"d={d}: mu_o = {rep.mu_lower:.6g}, mu^o = {rep.mu_upper:.6g}")

    print("\nmu > 0, e(mu) below 0")
    print(f"{'mu':>8}" + "".join(f"{'d=' + str(d):>18}" for d in probs))
    for mu in mus:
        print(f"{mu:>8g}" + "".join(f"{row(probs[d], reps[d], mu):>18}" for d in probs))

    print("\nmu < 0, e(mu) above 4 d^2")
    print(f"{'mu':>8}" + "".join(f"{'d=' + str(d):>18}" for d in probs))
    for mu in mus:
        print(f"{-mu:>8g}" + "".join(f"{row(probs[d], reps[d], -mu):>18}" for d in probs))

    print("\ne / mu at |mu| = 1e4 (d=1):")
    for mu in (1e4, -1e4):
        print(f"  mu = {mu:g}: {eigenvalue_solve(probs[1], mu, reps[1]).e / mu:.6f}")


if __name__ == "__main__":
    np.set_printoptions(precision=6)
    main()
