"""Loading model specifications and the built-in kernel families."""

import json
import math
from pathlib import Path

from .errors import ConfigError, SpecError
from .frag import DislocationSpec
from .growth import GrowthSpec, build_brick_set
from .gw import GWSpec
from .mb_core import TabulatedKernel


def _two_type_mixed(params):
    def law(n, i):
        if n == 1:
            return [((), 1.0)]
        if i == 1:
            out = [(((k, 2), (n - k, 1)), 0.5 / (n - 1)) for k in range(1, n)]
            return out + [(((n - 1, 2),), 0.25), (((n, 2),), 0.25)]
        third = [((n - 2, 1), (1, 2), (1, 1)) if n >= 3 else ((1, 1), (1, 2))]
        return [((((n + 1) // 2, 1), (n // 2, 2)), 1 / 3), (((n - 1, 1),), 1 / 3), (third[0], 1 / 3)]
    return law, 2


def _halving(params):
    c, g = params.get("c", 1.0), params["gamma"]

    def law(n, i):
        if n == 1:
            return [((), 1.0)]
        p = min(1.0, c * n**-g)
        return [((((n + 1) // 2, 1), (n // 2, 1)), p), (((n, 1),), 1.0 - p)]
    return law, 1


def _critical_two_type(params):
    c, cs, g = params.get("c", 1.0), params.get("c_switch", 0.5), params["gamma"]

    def law(n, i):
        if n == 1:
            return [((), 1.0)]
        ps, pt = c * n**-g, cs * n**-g
        if ps + pt > 1:
            ps, pt = ps / (ps + pt), pt / (ps + pt)
        return [((((n + 1) // 2, i), (n // 2, 3 - i)), ps), (((n, 3 - i),), pt), (((n, i),), 1.0 - ps - pt)]
    return law, 2


def _mixing_null(params):
    c, g = params.get("c", 1.0), params["gamma"]

    def law(n, i):
        if n == 1:
            return [((), 1.0)]
        if i == 2:
            return [(((n, 1),), 1.0)]
        p = min(0.5, c * n**-g)
        return [((((n + 1) // 2, 1), (n // 2, 1)), p), (((n, 2),), 0.5), (((n, 1),), 0.5 - p)]
    return law, 2


KERNEL_FAMILIES = {
    "two_type_mixed": _two_type_mixed,
    "halving": _halving,
    "critical_two_type": _critical_two_type,
    "mixing_null": _mixing_null,
}


class KernelModel:
    """A named tabulated family; ``build(nmax)`` tabulates it up to nmax."""

    def __init__(self, family, params):
        if family not in KERNEL_FAMILIES:
            raise SpecError(f"unknown kernel family {family!r}; known: {sorted(KERNEL_FAMILIES)}")
        self.family = family
        self.params = dict(params)
        self.law, self.kappa = KERNEL_FAMILIES[family](self.params)

    @property
    def gamma(self):
        return self.params.get("gamma")

    def build(self, nmax):
        return TabulatedKernel.from_function(self.law, nmax, self.kappa)


def parse_model(d):
    kind = d.get("type")
    if kind == "gw":
        return GWSpec.from_dict(d)
    if kind == "growth":
        spec = GrowthSpec.from_dict(d)
        return build_brick_set(spec)
    if kind == "dislocation":
        return DislocationSpec.from_dict(d)
    if kind == "kernel":
        return KernelModel(d.get("family"), d.get("params", {}))
    raise SpecError(f"unknown model type {kind!r}")


def load_model(ref, base_dir="."):
    """A model from an inline dict or a JSON file path relative to ``base_dir``."""
    if isinstance(ref, dict):
        return parse_model(ref)
    path = Path(base_dir) / ref
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_model(d)


def admissible_near(law, target):
    """Index with positive mass nearest ``target``; ties go up."""
    best = None
    for n in range(len(law)):
        if law[n] > 0 and (best is None or abs(n - target) <= abs(best - target)):
            if best is None or abs(n - target) < abs(best - target) or n > best:
                best = n
    if best is None:
        raise ValueError("empty support")
    return best


def count_range(target):
    return int(target + max(8, math.isqrt(target)))
