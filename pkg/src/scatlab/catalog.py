"""Named test potentials used by the CLI (``catalog:NAME``) and the tests."""
import numpy as np

from .errors import PotentialValidationError
from .potentials import Potential


def _smooth_table():
    r = np.linspace(0.0, 1.0, 401)
    return Potential.table(1.0, list(zip(r.tolist(), (-2.0 * (1.0 - r * r) ** 2).tolist())),
                           name="smooth_table")


_BUILDERS = {
    "zero": lambda: Potential.zero(1.0, name="zero"),
    "square_well": lambda: Potential.constant(-1.0, 1.0, name="square_well"),
    "shallow_well": lambda: Potential.constant(-0.5, 1.0, name="shallow_well"),
    "deep_well": lambda: Potential.constant(-1.1, 1.0, name="deep_well"),
    "barrier": lambda: Potential.constant(0.5, 1.0, name="barrier"),
    "weak_well": lambda: Potential.constant(-0.01, 1.0, name="weak_well"),
    "weak_barrier": lambda: Potential.constant(0.01, 1.0, name="weak_barrier"),
    "two_step": lambda: Potential.piecewise(1.0, [(0.0, 0.6, -2.0), (0.6, 1.0, 0.7)],
                                            name="two_step"),
    "bump": lambda: Potential.piecewise(1.0, [(0.5, 1.0, 1.0)], name="bump"),
    "ramp_table": lambda: Potential.table(1.0, [(0.0, 1.0), (1.0, 0.0)], name="ramp_table"),
    "smooth_table": _smooth_table,
}

NAMES = tuple(_BUILDERS)


def get(name):
    """Catalog potential by name."""
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise PotentialValidationError(
            f"unknown catalog potential {name!r}; known: {', '.join(NAMES)}") from None


def all_potentials():
    return {n: get(n) for n in NAMES}
