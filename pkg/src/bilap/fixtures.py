"""Reference generators with hand-derived vanishing orders.

``n_o`` and ``n_top`` count the order of ``|v|^2 ~ |q|^(2n)`` at the origin
and at ``(pi, ..., pi)``.  They follow from the closed forms of the Fourier
transforms:

* ``delta``: ``v`` is a nonzero constant, so ``n_o = n_top = 0``.
* ``laplacian``: ``v`` is proportional to ``s(p) = sum(1 - cos p_i)``, which
  vanishes to second order at the origin and equals ``2d`` at the top,
  so ``n_o = 2`` and ``n_top = 0``.
* ``top_vanishing``: ``v`` is proportional to ``2d - s(p)``, the mirror image,
  so ``n_o = 0`` and ``n_top = 2``.
* ``bilaplacian_1d``: ``v`` is proportional to ``s(p)^2``, so ``n_o = 4`` and
  ``n_top = 0``.
"""

from dataclasses import dataclass

from .core_model import (bilaplacian_generator_1d, delta_generator, laplacian_generator,
                         top_vanishing_generator)

__all__ = ["Fixture", "FIXTURES", "get_fixture"]


@dataclass(frozen=True)
class Fixture:
    name: str
    d: int
    n_o: int
    n_top: int
    factory: object

    @property
    def generator(self):
        return self.factory()

    @property
    def k_bottom(self):
        return 2 * self.n_o + self.d

    @property
    def k_top(self):
        return 2 * self.n_top + self.d


def _build():
    out = {}
    for d in range(1, 6):
        out[f"delta_d{d}"] = Fixture(f"delta_d{d}", d, 0, 0, lambda d=d: delta_generator(d))
    for d in range(1, 5):
        out[f"laplacian_d{d}"] = Fixture(f"laplacian_d{d}", d, 2, 0, lambda d=d: laplacian_generator(d))
    for d in range(1, 4):
        out[f"top_vanishing_d{d}"] = Fixture(f"top_vanishing_d{d}", d, 0, 2,
                                             lambda d=d: top_vanishing_generator(d))
    out["bilaplacian_d1"] = Fixture("bilaplacian_d1", 1, 4, 0, bilaplacian_generator_1d)
    return out


FIXTURES = _build()


def get_fixture(name):
    """Look up a fixture by name, e.g. ``"laplacian_d3"``."""
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}") from None
