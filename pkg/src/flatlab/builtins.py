"""Catalog of built-in surfaces and test functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict

from .genericity import BUILTIN_TEST_FUNCTIONS
from .surface import TranslationSurface, origami


@dataclass(frozen=True)
class BuiltinSurface:
    name: str
    description: str
    r: tuple
    u: tuple

    def build(self) -> TranslationSurface:
        return origami(list(self.r), list(self.u), name=self.name)


# squares of the Wollmilchsau are the quaternion units 1, i, j, k, -1, -i, -j, -k;
# the right neighbour of g is g i and the top neighbour is g j
_SURFACES = [
    BuiltinSurface("torus", "unit square torus, H(0)", (0,), (0,)),
    BuiltinSurface("L3", "3-square L-shaped origami in H(2)", (1, 0, 2), (2, 1, 0)),
    BuiltinSurface("L4", "4-square origami in H(2): a row of three with one square on top",
                   (1, 2, 0, 3), (3, 1, 2, 0)),
    BuiltinSurface("wollmilchsau", "8-square quaternion origami in H(1,1,1,1)",
                   (1, 4, 7, 2, 5, 0, 3, 6), (2, 3, 4, 5, 6, 7, 0, 1)),
]

SURFACES: Dict[str, BuiltinSurface] = {s.name: s for s in _SURFACES}
TEST_FUNCTIONS: Dict[str, Callable] = dict(BUILTIN_TEST_FUNCTIONS)
_FUNCTION_NOTES = {
    "systole_indicator": "clamp((systole - eps) / kappa, 0, 1); parameters eps, kappa",
    "constant": "constant value; parameter value",
}


def builtin_surface(name: str) -> TranslationSurface:
    try:
        return SURFACES[name].build()
    except KeyError:
        raise KeyError(f"unknown builtin surface {name!r}; known: {sorted(SURFACES)}") from None


def list_builtins() -> dict:
    """Names and descriptions, with the stratum of each surface."""
    surfaces = []
    for s in _SURFACES:
        S = s.build()
        surfaces.append({"name": s.name, "description": s.description, "stratum": str(S.stratum),
                         "genus": S.genus, "squares": len(s.r)})
    funcs = [{"name": k, "description": _FUNCTION_NOTES.get(k, k)} for k in TEST_FUNCTIONS]
    return {"surfaces": surfaces, "test_functions": funcs}
