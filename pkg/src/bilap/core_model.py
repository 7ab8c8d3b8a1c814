"""Lattice model: dispersion, generator potential and its Fourier image.

The unperturbed operator is the square of the discrete Laplacian on
``Z^d``.  In momentum space it acts by multiplication with

    e(q) = (sum_i (1 - cos q_i))**2,

which takes values in ``[0, 4 d**2]``.  The rank-one perturbation is built from
a finitely supported, even, real generator ``vhat`` whose Fourier image is

    v(p) = (2 pi)**(-d/2) * sum_x vhat(x) cos(x . p).

With this normalization Parseval's identity reads
``int_{T^d} |v|^2 dq = sum_x vhat(x)**2``.

All functions accept a single point of shape ``(d,)`` or a batch of shape
``(M, d)`` and return a scalar or an array of shape ``(M,)`` accordingly.
"""

import json
from itertools import product

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "GeneratorPotential",
    "dispersion_eval",
    "dispersion_s",
    "dispersion_top_factorization_check",
    "morse_map_eval",
    "fourier_v_eval",
    "v_sq_eval",
    "check_torus_point",
    "taylor_moment",
    "delta_generator",
    "laplacian_generator",
    "top_vanishing_generator",
    "bilaplacian_generator_1d",
]

MORSE_RADIUS = 1.0 / np.sqrt(2.0)


def _as_points(p):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    return np.atleast_2d(p), single


def _ret(values, single):
    return float(values[0]) if single else values


def check_torus_point(p, d):
    """Validate that ``p`` is a point (or batch of points) of ``[-pi, pi)^d``.

    Raises
    ------
    DomainError
        If the trailing dimension differs from ``d`` or a coordinate lies
        outside ``[-pi, pi)``.
    """
    pts, _ = _as_points(p)
    if pts.shape[-1] != d:
        raise DomainError(f"torus point has dimension {pts.shape[-1]}, expected {d}")
    if not np.all(np.isfinite(pts)) or np.any(pts < -np.pi) or np.any(pts >= np.pi):
        raise DomainError("torus coordinates must lie in [-pi, pi)")
    return pts


def dispersion_s(p):
    """Return ``s(p) = sum_i (1 - cos p_i)`` evaluated as ``2 sum sin^2(p_i/2)``.

    The half-angle form keeps full relative accuracy near ``p = 0``.
    """
    pts, single = _as_points(p)
    s = 2.0 * np.sum(np.sin(0.5 * pts) ** 2, axis=-1)
    return _ret(s, single)


def dispersion_eval(p):
    """Dispersion ``e(p) = s(p)**2`` of the discrete bilaplacian.

    Examples
    --------
    >>> round(float(dispersion_eval([np.pi / 3])), 12)
    0.25
    """
    s = dispersion_s(p)
    return s * s


def dispersion_top_factorization_check(p):
    """Both sides of ``e(q) - 4 d^2 = -(sum(3 - cos q_i)) (sum(1 + cos q_i))``.

    Returns
    -------
    lhs, rhs : float or ndarray
    """
    pts, single = _as_points(p)
    d = pts.shape[-1]
    c = np.cos(pts)
    lhs = np.sum(1.0 - c, axis=-1) ** 2 - 4.0 * d * d
    rhs = -np.sum(3.0 - c, axis=-1) * np.sum(1.0 + c, axis=-1)
    return _ret(lhs, single), _ret(rhs, single)


def morse_map_eval(y):
    """Morse substitution ``phi_i(y) = 2 arcsin(y_i)`` on the ball ``|y| < 1/sqrt(2)``.

    Under this map the dispersion becomes ``4 |y|^4`` exactly.

    Raises
    ------
    DomainError
        If some ``|y| >= 1/sqrt(2)``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(np.sqrt(np.sum(np.atleast_2d(y) ** 2, axis=-1)) >= MORSE_RADIUS):
        raise DomainError("Morse map is only used on the ball |y| < 1/sqrt(2)")
    return 2.0 * np.arcsin(y)


class GeneratorPotential:
    """Finitely supported, even, real generator ``vhat`` on ``Z^d``.

    Parameters
    ----------
    d : int
        Lattice dimension, at least 1.
    sites : array_like of int, shape (n, d)
        Support sites.  Listing only one representative of each pair
        ``{x, -x}`` is allowed; the partner is implied.  If both are listed
        their values must agree.
    values : array_like of float, shape (n,)
        Generator values at ``sites``.

    Raises
    ------
    DomainError
        If a value is non-finite, all values vanish, a site is listed twice,
        or ``vhat(-x) != vhat(x)`` for an explicitly stored pair.

    Notes
    -----
    Internally the full symmetric support is stored, with ``sites`` sorted
    lexicographically.  The object is treated as immutable.
    """

    def __init__(self, d, sites, values):
        d = int(d)
        if d < 1:
            raise DomainError("dimension must be at least 1")
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, d)
        values = np.asarray(values, dtype=float).reshape(-1)
        if sites.shape[0] != values.shape[0] or sites.shape[0] == 0:
            raise DomainError("sites and values must be nonempty and of equal length")
        if not np.all(np.isfinite(values)):
            raise DomainError("generator values must be finite")
        table = {}
        for x, c in zip(map(tuple, sites), values):
            if x in table:
                raise DomainError(f"site {x} listed twice")
            table[x] = float(c)
        full = dict(table)
        for x, c in table.items():
            mx = tuple(-xi for xi in x)
            if mx in table:
                if table[mx] != c:
                    raise DomainError(f"generator is not even: vhat{x}={c} but vhat{mx}={table[mx]}")
            else:
                full[mx] = c
        full = {x: c for x, c in full.items() if c != 0.0}
        if not full:
            raise DomainError("generator must have at least one nonzero value")
        keys = sorted(full)
        self.d = d
        self.sites = np.array(keys, dtype=np.int64).reshape(-1, d)
        self.values = np.array([full[x] for x in keys])
        self.sites.setflags(write=False)
        self.values.setflags(write=False)

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_dict(cls, data):
        """Build from the JSON object form ``{"d", "sites": [{"x", "v"}], "even"}``."""
        try:
            d = int(data["d"])
            entries = data["sites"]
            sites = [list(map(int, e["x"])) for e in entries]
            values = [float(e["v"]) for e in entries]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed generator object ({exc})", field="generator") from exc
        if data.get("even", True) is not True:
            raise ConfigError("only even generators are supported", field="generator.even")
        if any(len(x) != d for x in sites):
            raise ConfigError("site dimension does not match d", field="generator.sites")
        return cls(d, sites, values)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        """Canonical form: one entry per pair ``{x, -x}``, keyed by the smaller one."""
        out = []
        for x, c in zip(map(tuple, self.sites.tolist()), self.values):
            mx = tuple(-xi for xi in x)
            if x <= mx:
                out.append({"x": list(x), "v": float(c)})
        return {"d": self.d, "sites": out, "even": True}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    # -- derived generators ---------------------------------------------
    def scaled(self, t):
        """Generator ``t * vhat``."""
        return GeneratorPotential(self.d, self.sites, t * self.values)

    def modulated(self):
        """Generator ``(-1)^{|x|_1} vhat(x)``, whose Fourier image is ``v(pi + p)``."""
        sign = np.where(np.sum(np.abs(self.sites), axis=1) % 2 == 0, 1.0, -1.0)
        return GeneratorPotential(self.d, self.sites, sign * self.values)

    @property
    def l2_norm_sq(self):
        """``sum_x vhat(x)^2``, equal to ``int |v|^2`` by Parseval."""
        return float(np.sum(self.values ** 2))

    def is_hyperoctahedral(self):
        """True if ``vhat`` is invariant under coordinate permutations and sign flips.

        Such generators have ``|v|^2`` invariant under the same group, which
        lets torus grids be reduced to a fundamental wedge.
        """
        table = {tuple(x): c for x, c in zip(self.sites.tolist(), self.values)}
        for x, c in table.items():
            key = tuple(sorted(abs(xi) for xi in x))
            for perm in _signed_perms(key):
                if table.get(perm, 0.0) != c:
                    return False
        return True

    def __eq__(self, other):
        return (isinstance(other, GeneratorPotential) and self.d == other.d
                and np.array_equal(self.sites, other.sites)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash(self.to_json())

    def __repr__(self):
        return f"GeneratorPotential(d={self.d}, n_sites={len(self.values)})"


def _signed_perms(key):
    from itertools import permutations
    seen = set()
    for perm in permutations(key):
        for signs in product((1, -1), repeat=len(key)):
            x = tuple(s * a for s, a in zip(signs, perm))
            if x not in seen:
                seen.add(x)
                yield x


def fourier_v_eval(gen, p):
    """Fourier image ``v(p) = (2 pi)^{-d/2} sum_x vhat(x) cos(x . p)``.

    The sum is evaluated as ``S - 2 sum vhat(x) sin^2(x . p / 2)`` with
    ``S = sum vhat(x)``, which keeps relative accuracy close to a zero of
    ``v`` at the origin.

    Examples
    --------
    >>> fourier_v_eval(delta_generator(1), [0.3])
    0.3989422804014327
    """
    pts, single = _as_points(p)
    if pts.shape[-1] != gen.d:
        raise DomainError(f"point has dimension {pts.shape[-1]}, generator has d={gen.d}")
    phase = pts @ gen.sites.T.astype(float)
    total = gen.values.sum()
    val = total - 2.0 * (np.sin(0.5 * phase) ** 2) @ gen.values
    val *= (2.0 * np.pi) ** (-0.5 * gen.d)
    return _ret(val, single)


def v_sq_eval(gen, p):
    """``|v(p)|^2``; nonnegative and even in ``p``."""
    v = fourier_v_eval(gen, p)
    return v * v


def taylor_moment(gen, w, j):
    """Moment ``sum_x vhat(x) (x . w)^{2j}`` for directions ``w``.

    Up to the factor ``(-1)^j (2 pi)^{-d/2} / (2j)!`` this is the coefficient
    of ``t^{2j}`` in ``v(t w)``.  It gives an exact, quadrature-free handle on
    vanishing orders and radial limits.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    dots = w @ gen.sites.T.astype(float)
    return (dots ** (2 * j)) @ gen.values


# -- standard generators -------------------------------------------------

def delta_generator(d):
    """``vhat = delta_0`` in dimension ``d``; ``|v|^2 = (2 pi)^{-d}`` is constant."""
    return GeneratorPotential(d, [[0] * d], [1.0])


def _unit_sites(d):
    eye = np.eye(d, dtype=np.int64)
    return np.vstack([eye, -eye])


def laplacian_generator(d):
    """``vhat = sum_{|s|=1} delta_s - 2 d delta_0``.

    Its image is ``v = -2 (2 pi)^{-d/2} s(p)``, so ``|v|^2`` vanishes to
    fourth order at the origin and is nonzero at ``(pi, ..., pi)``.
    """
    sites = np.vstack([_unit_sites(d), np.zeros((1, d), dtype=np.int64)])
    values = np.concatenate([np.ones(2 * d), [-2.0 * d]])
    return GeneratorPotential(d, sites, values)


def top_vanishing_generator(d):
    """``vhat = sum_{|s|=1} delta_s + 2 d delta_0``.

    Its image is ``v = 2 (2 pi)^{-d/2} (2 d - s(p))``, vanishing to second
    order at ``(pi, ..., pi)`` and nonzero at the origin.
    """
    sites = np.vstack([_unit_sites(d), np.zeros((1, d), dtype=np.int64)])
    values = np.concatenate([np.ones(2 * d), [2.0 * d]])
    return GeneratorPotential(d, sites, values)


def bilaplacian_generator_1d():
    """One-dimensional generator with ``v proportional to (1 - cos p)^2``.

    From ``(1 - cos p)^2 = 3/2 - 2 cos p + cos(2p)/2``.
    """
    return GeneratorPotential(1, [[0], [1], [2]], [1.5, -1.0, 0.25])
