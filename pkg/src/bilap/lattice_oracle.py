"""Finite momentum-grid model used as an independent check of the solver.

On an ``N^d`` grid the multiplication operator by the dispersion becomes a
diagonal matrix and the rank-one perturbation becomes ``-mu u u^T`` with
``u_k = v(p_k) h^{d/2}``.  The extremal eigenvalue of
``A = diag(e_k) - mu u u^T`` is found twice: as the root of the secular
function ``1 - mu sum_k u_k^2 / (e_k - z)`` and by dense diagonalization.
Agreement of the two isolates root-finding errors, while refining ``N``
measures the distance to the continuum solver.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import dispersion_eval, fourier_v_eval
from .errors import DomainError, NoDiscreteSpectrum, NoRoot, NumericalError, SizeExceeded
from .quadrature import TorusGrid

__all__ = [
    "MomentumGridModel",
    "OracleComparison",
    "build_model",
    "secular_root",
    "dense_eig_extremal",
    "realspace_planewave_check",
    "oracle_compare",
]

DENSE_CAP = 4096
SECULAR_RESIDUAL = 1e-13


@dataclass
class MomentumGridModel:
    """Diagonal-plus-rank-one model on a :class:`TorusGrid`.

    Attributes
    ----------
    grid : TorusGrid
    diag : ndarray
        Dispersion at every grid point, in ``[0, 4 d^2]``.
    u : ndarray
        ``v(p_k) * sqrt(weight)``, so ``u @ u`` is the grid quadrature of
        ``|v|^2``.
    """

    grid: TorusGrid
    diag: np.ndarray
    u: np.ndarray

    @property
    def n_total(self):
        return self.diag.size


def build_model(gen, N, offset=0.5):
    """Momentum-grid model of ``gen`` on the midpoint grid used by the solver."""
    grid = TorusGrid(gen.d, N, offset=offset)
    p = grid.points()
    diag = dispersion_eval(p)
    u = fourier_v_eval(gen, p) * math.sqrt(grid.weight)
    return MomentumGridModel(grid=grid, diag=np.asarray(diag, dtype=float), u=np.asarray(u, dtype=float))


def _secular(mu, w, gaps, t):
    # 1 - mu sum w_k / (gap_k + t), with gap_k + t = |e_k - z| > 0
    return 1.0 - mu * np.sum(w / (gaps + t))


def secular_root(model, mu):
    """Root of the secular function outside the range of ``model.diag``.

    For ``mu > 0`` the root lies below ``min(diag)``, for ``mu < 0`` above
    ``max(diag)``.  Distances to that edge are used as the unknown, so roots
    very close to the edge keep full relative precision.

    Raises
    ------
    DomainError
        If ``mu == 0``.
    NoRoot
        If the secular function does not change sign on that side.
    """
    mu = float(mu)
    if mu == 0.0:
        raise DomainError("mu must be nonzero")
    w = model.u ** 2
    if mu > 0:
        edge = float(model.diag.min())
        gaps = model.diag - edge
        sgn = -1.0
    else:
        edge = float(model.diag.max())
        gaps = edge - model.diag
        sgn = 1.0
    # on the side of the root, z = edge + sgn t with t > 0 and the secular
    # function reads 1 - |mu| sum w/(gap + t) for either sign of mu
    amu = abs(mu)
    at_edge = gaps <= 1e-15 * max(1.0, abs(edge))
    if not np.any(w[at_edge] > 0.0):
        f_edge = _secular(amu, w[~at_edge], gaps[~at_edge], 0.0)
        if not f_edge < 0.0:
            raise NoRoot(f"secular function is {f_edge:.3e} >= 0 at the spectral edge for mu={mu}")
    f = lambda t: _secular(amu, w, gaps, t)
    hi = amu * float(w.sum()) + 1.0          # f(hi) > 0
    lo = 1.0
    while f(lo) >= 0.0:
        lo *= 1.0 / 16.0
        if lo < 1e-300:
            raise NoRoot(f"no sign change next to the spectral edge for mu={mu}")
    lo, hi = min(lo, hi), max(lo, hi)
    if f(hi) <= 0.0:
        while f(hi) <= 0.0:
            hi *= 4.0
    # f is increasing in t: f(lo) < 0 < f(hi)
    for _ in range(2000):
        if hi - lo <= 1e-15 * hi:
            break
        mid = math.sqrt(lo) * math.sqrt(hi) if hi > 2.0 * lo else 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    ft = f(t)
    for _ in range(3):
        deriv = amu * np.sum(w / (gaps + t) ** 2)
        tn = t - ft / deriv
        if not lo <= tn <= hi:
            break
        fn = f(tn)
        if abs(fn) >= abs(ft):
            break
        t, ft = tn, fn
    if abs(ft) > SECULAR_RESIDUAL:
        raise NumericalError(f"secular residual {abs(ft):.3e} exceeds {SECULAR_RESIDUAL}")
    return float(edge + sgn * t)


def dense_eig_extremal(model, mu):
    """Smallest and largest eigenvalues of ``diag - mu u u^T``.

    Raises
    ------
    SizeExceeded
        If the matrix has more than 4096 rows.
    """
    n = model.n_total
    if n > DENSE_CAP:
        raise SizeExceeded(f"dense matrix of size {n} exceeds the cap of {DENSE_CAP}")
    A = np.diag(model.diag) - float(mu) * np.outer(model.u, model.u)
    ev = np.linalg.eigvalsh(A)
    return float(ev[0]), float(ev[-1])


def realspace_planewave_check(d, N, k):
    """Apply the periodic real-space bilaplacian stencil to a plane wave.

    The lattice Laplacian ``(Lf)(x) = 1/2 sum_{|s|=1} (f(x) - f(x + s))`` is
    applied twice to ``exp(i p.x)`` with ``p = 2 pi k / N`` on the box
    ``Z_N^d``.

    Returns
    -------
    (deviation, multiplier) : tuple of float
        Max-norm deviation of the result from ``multiplier * wave`` and the
        multiplier itself, the dispersion at ``p``.
    """
    k = np.broadcast_to(np.asarray(k, dtype=float), (d,))
    p = 2.0 * np.pi * k / N
    grids = np.meshgrid(*[np.arange(N)] * d, indexing="ij")
    phase = sum(p[i] * grids[i] for i in range(d))
    wave = np.exp(1j * phase)

    def lap(f):
        out = d * f
        for ax in range(d):
            out = out - 0.5 * (np.roll(f, -1, axis=ax) + np.roll(f, 1, axis=ax))
        return out

    applied = lap(lap(wave))
    mult = float(dispersion_eval(p))
    return float(np.max(np.abs(applied - mult * wave))), mult


@dataclass
class OracleComparison:
    """Secular versus dense eigenvalue at one grid size, plus a refinement ladder.

    ``e_secular``/``e_matrix`` are ``None`` when the grid model has no
    eigenvalue outside its diagonal range (``status == "no_root"``);
    ``e_matrix`` is also ``None`` above the dense cap.  ``ladder`` rows hold
    ``N``, ``e_secular`` and ``continuum_gap = |e_secular(N) - e(mu)|``.
    """

    d: int
    mu: float
    N: int
    n_total: int
    e_secular: float = None
    e_matrix: float = None
    abs_diff: float = None
    status: str = "ok"
    e_continuum: float = None
    ladder: list = field(default_factory=list)

    @property
    def gaps_decreasing(self):
        """Gaps shrink strictly until they reach rounding level, then stay there."""
        g = [r["continuum_gap"] for r in self.ladder if r["continuum_gap"] is not None]
        if len(g) < 2:
            return False
        floor = 1e-13 * max(1.0, abs(self.e_continuum or 0.0))
        return all(b < a or b <= floor for a, b in zip(g, g[1:]))

    def to_dict(self):
        return {"d": self.d, "mu": self.mu, "N": self.N, "n_total": self.n_total,
                "e_secular": self.e_secular, "e_matrix": self.e_matrix, "abs_diff": self.abs_diff,
                "status": self.status, "e_continuum": self.e_continuum, "ladder": list(self.ladder),
                "gaps_decreasing": self.gaps_decreasing}


def oracle_compare(prob, mu, N, levels=3):
    """Compare secular and dense eigenvalues on the ``N`` grid and refine.

    The ladder uses ``N, 2N, 4N, ...`` (``levels`` sizes) with secular roots
    only and measures the distance to the continuum eigenvalue from
    :func:`bilap.spectral_solver.eigenvalue_solve`.
    """
    from .spectral_solver import eigenvalue_solve

    gen = prob.generator
    mu = float(mu)
    model = build_model(gen, N)
    out = OracleComparison(d=gen.d, mu=mu, N=int(N), n_total=model.n_total)
    if mu == 0.0:
        out.status = "no_root"
        out.abs_diff = 0.0
        return out
    try:
        out.e_secular = secular_root(model, mu)
    except NoRoot:
        out.status = "no_root"
    if model.n_total <= DENSE_CAP:
        lo, hi = dense_eig_extremal(model, mu)
        e_mat = lo if mu > 0 else hi
        if out.status == "no_root":
            # consistent only if the dense spectrum stays inside the diagonal range
            inside = model.diag.min() <= e_mat <= model.diag.max()
            out.abs_diff = 0.0 if inside else math.inf
        else:
            out.e_matrix = e_mat
            out.abs_diff = float(abs(out.e_secular - e_mat))
    try:
        out.e_continuum = eigenvalue_solve(prob, mu).e
    except NoDiscreteSpectrum:
        out.e_continuum = None
    for j in range(levels):
        Nj = int(N) * 2 ** j
        try:
            ej = secular_root(model if j == 0 else build_model(gen, Nj), mu)
        except NoRoot:
            ej = None
        gap = None if (ej is None or out.e_continuum is None) else float(abs(ej - out.e_continuum))
        out.ladder.append({"N": Nj, "e_secular": ej, "continuum_gap": gap})
    return out
