"""Leading-order behaviour of the eigenvalue near the coupling thresholds.

Near the lower threshold the eigenvalue leaves the band bottom in a way
fixed by ``k = 2 n_o + d``, where ``n_o`` is the vanishing order of
``|v|^2`` at the origin.  Near the upper threshold the same holds with
``k = 2 n^o + d`` at ``(pi, ..., pi)``.  This module encodes that case
table, the leading constants, and least-squares fits that check them
against solver output.

Bottom edge, ``delta = mu - mu_o``:

====  ===================================  =============================
k     leading law                          constant
====  ===================================  =============================
1     (-e)^{1/4} = c_1 delta^{1/3}         c_1 = (pi c_v / 4)^{1/3}
3     (-e)^{1/4} = c_3 delta               c_3 = pi c_v / 8
5     (-e)^{1/4} = c_5 delta               c_5 = 16 / (pi c_v mu_o^2)
7     (-e)^{1/4} = c_7 delta^{1/3}         c_7 = (32 / (pi c_v mu_o^2))^{1/3}
>=9   (-e)^{1/4} = c_9 delta^{1/4}         c_9 = (mu_o^2 hat_c_v)^{-1/4}
2     (-e)^{1/2} = c_2 delta  (+ log)      c_2 = pi c_v / 8
4     (-e)^{1/2} = c exp(-1/(c_4 delta))   c_4 = c_v / 8
6     (-e)^{1/2} = c_6 delta  (+ log)      c_6 = 32 / (pi c_v mu_o^2)
8     (-e)^{1/2} = c_8 tau sigma           c_8 = (32 / (c_v mu_o^2))^{1/2}
>=10  (-e)^{1/2} = c_10 delta^{1/2}        c_10 = (mu_o^2 hat_c_v)^{-1/2}
====  ===================================  =============================

with ``tau = delta^{1/2}`` and ``sigma = (-1/ln tau)^{1/2}``.

Top edge, ``delta = |mu + mu^o|`` (the eigenvalue exists for ``mu < -mu^o``):

====  ===================================  =============================
k     leading law                          constant
====  ===================================  =============================
1     (e - 4d^2)^{1/2} = C_1 delta         C_1 = pi C_v
3     (e - 4d^2)^{1/2} = C_3 delta         C_3 = 1 / (pi C_v mu^o^2)
>=5   (e - 4d^2)^{1/2} = C_5 delta^{1/2}   C_5 = (hat_C_v mu^o^2)^{-1/2}
2     e - 4d^2 = c exp(-1/(C_2 delta))     C_2 = C_v
4     e - 4d^2 = C_4 delta sigma           C_4 = 1 / (C_v mu^o^2)
>=6   e - 4d^2 = C_6 delta  (+ log)        C_6 = 1 / (hat_C_v mu^o^2)
====  ===================================  =============================

with ``sigma = -1/ln delta`` at the top.  The multiplicative constant ``c``
of the exponential families is not determined by the leading analysis; it
is fitted, never predicted.
"""

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import (DivergenceMismatch, DomainError, IllConditioned,
                     InsufficientData, MissingIngredient)
from .spectral_solver import EigenResult, ThresholdReport

__all__ = [
    "EdgeCase",
    "AsymptoticPrediction",
    "FitResult",
    "classify_case",
    "leading_constant",
    "predict_e_leading",
    "fit_exponent",
    "fit_exponential_rate",
    "resonance_report",
    "threshold_coupling",
]

BOTTOM, TOP = "bottom", "top"


@dataclass(frozen=True)
class EdgeCase:
    """Expansion family selected by the edge, ``k`` and the parity of ``d``.

    Attributes
    ----------
    edge : str
        ``"bottom"`` or ``"top"``.
    k : int
        ``2 n_o + d`` or ``2 n^o + d``.
    parity : str
        ``"odd"`` or ``"even"`` (parity of ``d``, equal to that of ``k``).
    family : str
        Short label of the leading law, e.g. ``"bottom-k1"`` or
        ``"top-exponential"``.
    """

    edge: str
    k: int
    parity: str
    family: str

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Leading law ``observable ~ leading_constant * delta^predicted_exponent``.

    ``energy_power`` is the power of ``|e - edge|`` that forms the observable
    (1/4, 1/2 or 1), so ``|e - edge| ~ delta^(predicted_exponent / energy_power)``.
    ``log_factor`` names a multiplicative logarithmic factor of the leading
    term (``"sigma_bottom"``, ``"sigma_top"``), ``has_log_correction``
    flags ``delta ln delta`` corrections, and ``exponential`` marks the
    families of the form ``exp(-1/(C delta))``.
    """

    case: EdgeCase
    leading_constant: float
    observable: str
    predicted_exponent: Fraction
    energy_power: Fraction
    has_log_correction: bool = False
    log_factor: str = ""
    exponential: bool = False

    @property
    def energy_exponent(self):
        """Exponent of ``|e - edge|`` against ``delta`` (power families only)."""
        return self.predicted_exponent / self.energy_power

    def to_dict(self):
        return {
            "case": self.case.to_dict(),
            "leading_constant": self.leading_constant,
            "observable": self.observable,
            "predicted_exponent": str(self.predicted_exponent),
            "energy_power": str(self.energy_power),
            "energy_exponent": None if self.exponential else str(self.energy_exponent),
            "has_log_correction": self.has_log_correction,
            "log_factor": self.log_factor,
            "exponential": self.exponential,
        }


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit ``log|e - edge| = log(prefactor) + exponent log(delta)``.

    ``corrected`` holds the fit with the logarithmic correction term for
    log-corrected families (keys ``exponent``, ``prefactor``, ``r_squared``,
    ``correction_coefficient``), otherwise ``None``.
    """

    exponent_hat: float
    prefactor_hat: float
    r_squared: float
    window: tuple
    n_points: int
    corrected: dict = None

    def to_dict(self):
        return {"exponent_hat": self.exponent_hat, "prefactor_hat": self.prefactor_hat,
                "r_squared": self.r_squared, "window": list(self.window),
                "n_points": self.n_points, "corrected": self.corrected}


# -- case table ---------------------------------------------------------------------

def _k(report, edge):
    if edge == BOTTOM:
        return report.k_bottom
    if edge == TOP:
        return report.k_top
    raise DomainError(f"edge must be 'bottom' or 'top', got {edge!r}")


def _family(edge, k):
    if edge == BOTTOM:
        if k % 2:
            return {1: "bottom-k1", 3: "bottom-k3", 5: "bottom-k5", 7: "bottom-k7"}.get(k, "bottom-k9+")
        return {2: "bottom-k2", 4: "bottom-exponential", 6: "bottom-k6", 8: "bottom-k8"}.get(k, "bottom-k10+")
    if k % 2:
        return {1: "top-k1", 3: "top-k3"}.get(k, "top-k5+")
    return {2: "top-exponential", 4: "top-k4"}.get(k, "top-k6+")


def classify_case(report, edge):
    """Expansion family for one edge of ``report``."""
    k = _k(report, edge)
    if k < 1:
        raise DomainError("k must be positive")
    return EdgeCase(edge=edge, k=k, parity="odd" if k % 2 else "even", family=_family(edge, k))


def threshold_coupling(report, edge):
    """``mu_o`` for the bottom edge, ``-mu^o`` for the top edge."""
    return report.mu_lower if edge == BOTTOM else -report.mu_upper


def _need(value, name):
    if not (value > 0 and math.isfinite(value)):
        raise MissingIngredient(f"{name} must be positive and finite, got {value}")
    return value


def leading_constant(report, case):
    """Leading constant and observable for ``case``.

    Raises
    ------
    MissingIngredient
        If the formula needs ``hat_c_v``, ``hat_C_v`` or a threshold that is
        infinite or zero for this generator.
    """
    F = Fraction
    quarter = "(-e)^{1/4}"
    half = "(-e)^{1/2}"
    top_half = "(e-4d^2)^{1/2}"
    top_lin = "e-4d^2"
    k, fam = case.k, case.family
    if case.edge == BOTTOM:
        cv = _need(report.c_v, "c_v")
        if fam == "bottom-k1":
            return AsymptoticPrediction(case, (math.pi * cv / 4.0) ** (1 / 3), quarter, F(1, 3), F(1, 4))
        if fam == "bottom-k3":
            return AsymptoticPrediction(case, math.pi * cv / 8.0, quarter, F(1), F(1, 4))
        if fam == "bottom-k2":
            return AsymptoticPrediction(case, math.pi * cv / 8.0, half, F(1), F(1, 2), has_log_correction=True)
        if fam == "bottom-exponential":
            return AsymptoticPrediction(case, cv / 8.0, "log((-e)^{1/2})", F(-1), F(1, 2), exponential=True)
        mo = _need(report.mu_lower, "mu_o")
        if fam == "bottom-k5":
            return AsymptoticPrediction(case, 16.0 / (math.pi * cv * mo ** 2), quarter, F(1), F(1, 4))
        if fam == "bottom-k7":
            return AsymptoticPrediction(case, (32.0 / (math.pi * cv * mo ** 2)) ** (1 / 3), quarter, F(1, 3), F(1, 4))
        if fam == "bottom-k6":
            return AsymptoticPrediction(case, 32.0 / (math.pi * cv * mo ** 2), half, F(1), F(1, 2),
                                        has_log_correction=True)
        if fam == "bottom-k8":
            return AsymptoticPrediction(case, math.sqrt(32.0 / (cv * mo ** 2)), half, F(1, 2), F(1, 2),
                                        log_factor="sigma_bottom")
        hc = _need(report.hat_c_v, "hat_c_v")
        if fam == "bottom-k9+":
            return AsymptoticPrediction(case, (mo ** 2 * hc) ** -0.25, quarter, F(1, 4), F(1, 4))
        return AsymptoticPrediction(case, (mo ** 2 * hc) ** -0.5, half, F(1, 2), F(1, 2), has_log_correction=True)
    Cv = _need(report.C_v, "C_v")
    if fam == "top-k1":
        return AsymptoticPrediction(case, math.pi * Cv, top_half, F(1), F(1, 2))
    if fam == "top-exponential":
        return AsymptoticPrediction(case, Cv, "log(e-4d^2)", F(-1), F(1), exponential=True)
    mt = _need(report.mu_upper, "mu^o")
    if fam == "top-k3":
        return AsymptoticPrediction(case, 1.0 / (math.pi * Cv * mt ** 2), top_half, F(1), F(1, 2))
    if fam == "top-k4":
        return AsymptoticPrediction(case, 1.0 / (Cv * mt ** 2), top_lin, F(1), F(1), log_factor="sigma_top")
    hC = _need(report.hat_C_v, "hat_C_v")
    if fam == "top-k5+":
        return AsymptoticPrediction(case, (hC * mt ** 2) ** -0.5, top_half, F(1, 2), F(1, 2))
    return AsymptoticPrediction(case, 1.0 / (hC * mt ** 2), top_lin, F(1), F(1), has_log_correction=True)


def _log_factor(kind, delta):
    if kind == "sigma_bottom":
        tau = math.sqrt(delta)
        return math.sqrt(-1.0 / math.log(tau))
    if kind == "sigma_top":
        return -1.0 / math.log(delta)
    return 1.0


def predict_e_leading(pred, mu, report):
    """Leading-order eigenvalue for coupling ``mu``.

    For power families this is ``edge -+ (C delta^beta factor)^{1/energy_power}``.
    For the exponential families only the rate is known, and the return
    value is the predicted logarithm of the observable, ``-1 / (C delta)``.

    Raises
    ------
    DomainError
        If ``mu`` lies on the wrong side of the threshold.
    """
    edge = pred.case.edge
    thr = threshold_coupling(report, edge)
    delta = mu - thr if edge == BOTTOM else thr - mu
    if delta < 0:
        raise DomainError(f"mu={mu} is on the wrong side of the {edge} threshold {thr}")
    e_edge = 0.0 if edge == BOTTOM else 4.0 * report.d ** 2
    if pred.exponential:
        if delta == 0:
            return -math.inf
        return -1.0 / (pred.leading_constant * delta)
    if delta == 0:
        return e_edge
    if delta >= 1.0 and pred.log_factor:
        raise DomainError("logarithmic factor is defined for small delta only")
    obs = pred.leading_constant * delta ** float(pred.predicted_exponent) * _log_factor(pred.log_factor, delta)
    gap = obs ** float(1 / pred.energy_power)
    return e_edge - gap if edge == BOTTOM else e_edge + gap


# -- fits -------------------------------------------------------------------------

def _unpack(sweep_data, edge, threshold, d=None):
    mus, gaps = [], []
    for item in sweep_data:
        if isinstance(item, EigenResult):
            mu, off = item.mu, item.offset
        else:
            mu, val = item
            if edge == TOP and d is not None:
                off = val - 4.0 * d * d
            else:
                off = val
        mus.append(float(mu))
        gaps.append(abs(float(off)))
    mus, gaps = np.array(mus), np.array(gaps)
    delta = mus - threshold if edge == BOTTOM else threshold - mus
    return mus, delta, gaps


def _lstsq(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return coef, float(min(max(r2, 0.0), 1.0))


def fit_exponent(sweep_data, edge, threshold, log_correction=None, d=None):
    """Fit ``|e - edge| ~ prefactor * delta^exponent`` on a coupling ladder.

    Parameters
    ----------
    sweep_data : sequence
        :class:`EigenResult` objects, or ``(mu, value)`` pairs where value is
        ``e`` at the bottom and ``e - 4d^2`` at the top (or ``e`` together
        with ``d``).
    edge : {"bottom", "top"}
    threshold : float
        ``mu_o`` or ``-mu^o``.
    log_correction : {None, "dlogd", "sigma_bottom", "sigma_top"}
        Also fit with a ``delta ln delta`` correction term in the log, or
        with the leading logarithmic factor divided out.

    Raises
    ------
    InsufficientData
        Fewer than 6 points on the discrete-spectrum side.
    IllConditioned
        Condition number of the 2x2 normal matrix above ``1e8``.
    """
    mus, delta, gaps = _unpack(sweep_data, edge, threshold, d)
    keep = (delta > 0) & (gaps > 0)
    if keep.sum() < 6:
        raise InsufficientData(f"need at least 6 usable points, got {int(keep.sum())}")
    delta, gaps = delta[keep], gaps[keep]
    x, y = np.log(delta), np.log(gaps)
    X = np.column_stack([np.ones_like(x), x])
    if np.linalg.cond(X.T @ X) > 1e8:
        raise IllConditioned("normal equations of the log-log fit are ill conditioned")
    (a, b), r2 = _lstsq(X, y)
    corrected = None
    if log_correction == "dlogd":
        Xc = np.column_stack([np.ones_like(x), x, delta * x])
        (ac, bc, cc), r2c = _lstsq(Xc, y)
        corrected = {"exponent": float(bc), "prefactor": float(math.exp(ac)),
                     "r_squared": r2c, "correction_coefficient": float(cc)}
    elif log_correction in ("sigma_bottom", "sigma_top"):
        f = np.array([_log_factor(log_correction, t) for t in delta])
        (ac, bc), r2c = _lstsq(X, y - np.log(f))
        corrected = {"exponent": float(bc), "prefactor": float(math.exp(ac)),
                     "r_squared": r2c, "correction_coefficient": None}
    return FitResult(exponent_hat=float(b), prefactor_hat=float(math.exp(a)), r_squared=r2,
                     window=(float(delta.min()), float(delta.max())), n_points=int(keep.sum()),
                     corrected=corrected)


def fit_exponential_rate(sweep_data, edge, threshold, energy_power=0.5, d=None):
    """Fit ``log(|e - edge|^power) = log c - 1 / (C delta)`` for the exponential families.

    Returns
    -------
    dict
        ``{"rate": C, "c": c, "r_squared": r2, "n_points": n}``.
    """
    _, delta, gaps = _unpack(sweep_data, edge, threshold, d)
    keep = (delta > 0) & (gaps > 0)
    if keep.sum() < 6:
        raise InsufficientData(f"need at least 6 usable points, got {int(keep.sum())}")
    inv = 1.0 / delta[keep]
    y = energy_power * np.log(gaps[keep])
    X = np.column_stack([np.ones_like(inv), inv])
    if np.linalg.cond(X.T @ X) > 1e8:
        raise IllConditioned("normal equations of the rate fit are ill conditioned")
    (a, b), r2 = _lstsq(X, y)
    return {"rate": float(-1.0 / b), "c": float(math.exp(a)), "r_squared": r2, "n_points": int(keep.sum())}


# -- threshold states -------------------------------------------------------------

BOTTOM_TEXT = {
    "none": "no threshold state at 0 (mu_o = 0)",
    "resonance": "0-energy resonance (f not in L2)",
    "eigen": "threshold eigenfunction f in L2 at energy 0",
}
TOP_TEXT = {
    "none": "no threshold state at 4d^2 (mu^o = 0)",
    "resonance": "4d^2-energy resonance (f not in L2)",
    "eigen": "threshold eigenfunction f in L2 at energy 4d^2",
}


def resonance_report(report, prob=None):
    """Classify the threshold solutions ``f = v / e`` and ``f = v / (4d^2 - e)``.

    With ``prob`` given, the plain-grid convergence of ``int |v|^2/e``,
    ``int |v|^2/(4d^2 - e)``, ``int |v|^2/e^2`` and
    ``int |v|^2/(4d^2 - e)^2`` is also tested and compared with the
    criteria ``k >= 5``, ``k >= 3``, ``k >= 9`` and ``k >= 5`` respectively.

    Raises
    ------
    DivergenceMismatch
        If a numerical verdict contradicts its criterion.
    """
    kb, kt = report.k_bottom, report.k_top
    bottom = "none" if kb <= 4 else ("resonance" if kb <= 8 else "eigen")
    top = "none" if kt <= 2 else ("resonance" if kt <= 4 else "eigen")
    out = {"bottom": BOTTOM_TEXT[bottom], "top": TOP_TEXT[top], "k_bottom": kb, "k_top": kt,
           "verdicts": {}, "expected": {}}
    if prob is None:
        return out
    from .spectral_solver import threshold_integral_verdicts
    expected = {"bottom1": kb >= 5, "top1": kt >= 3, "bottom2": kb >= 9, "top2": kt >= 5}
    res = threshold_integral_verdicts(prob)
    mismatches = []
    for name, v in res.items():
        out["expected"][name] = "converges" if expected[name] else "diverges"
        if v is None:
            out["verdicts"][name] = "undetermined"
            continue
        out["verdicts"][name] = "converges" if v["converges"] else "diverges"
        if v["converges"] != expected[name]:
            mismatches.append(name)
    if mismatches:
        raise DivergenceMismatch(f"numerical verdicts contradict the k criteria for {mismatches}")
    return out
