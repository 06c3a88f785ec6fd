"""Registered closed-form expression families for nets and maps.

JSON descriptions reference these by name; arbitrary expression parsing is
out of scope.  Every family returns an eps-indexed factory whose expressions
evaluate on floats and on jets alike, so derivative oracles are exact.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import SpecError
from .jets import bump, cos, exp, sin, tanh

EpsFactory = Callable[[float], Callable]


def smoothed_step(eps: float) -> Callable:
    """Profile of the moving-jump family: (1+eps)/2 * (tanh t + tanh(t/eps)).

    Converges to a unit step; the slope at 0 is (1+eps)(1+1/eps)/2.
    """
    return lambda t: 0.5 * (1.0 + eps) * (tanh(t) + tanh(t / eps))


def step_slope_sup(eps: float) -> float:
    """Closed-form sup of |d/dt smoothed_step| (attained at t = 0)."""
    return 0.5 * (1.0 + eps) * (1.0 + 1.0 / eps)


# -- family builders ------------------------------------------------------


def _shape_fn(params: dict) -> Callable:
    shape = params.get("shape", "const")
    if shape == "const":
        return lambda t: 1.0 + 0.0 * t
    if shape == "bump":
        c = float(params.get("center", 0.0))
        w = float(params.get("width", 0.5))
        return lambda t: bump(t, center=c, width=w)
    if shape == "cos":
        return lambda t: cos(t)
    raise SpecError(f"unknown shape {shape!r}", "expr.shape")


_BASE_FNS = {
    "identity": lambda t: t,
    "sin": sin,
    "cos": cos,
    "tanh": tanh,
}


def build_expr(spec) -> EpsFactory:
    """Build an eps-indexed expression factory from a JSON spec.

    Spec is either a registered base name (string) or
    {"name": ..., "params": {...}}; additive-perturbation families nest a
    "base" spec.
    """
    if isinstance(spec, str):
        spec = {"name": spec, "params": {}}
    if not isinstance(spec, dict) or "name" not in spec:
        raise SpecError("expression spec needs a 'name'", "expr")
    name = spec["name"]
    params = spec.get("params", {})
    if name in _BASE_FNS:
        fn = _BASE_FNS[name]
        return lambda eps: fn
    if name == "poly":
        coeffs = [float(c) for c in params.get("coeffs", [0.0])]

        def horner(t, cs=tuple(coeffs)):
            acc = 0.0 * t + cs[-1]
            for c in reversed(cs[:-1]):
                acc = acc * t + c
            return acc

        return lambda eps: horner
    if name == "affine":
        a = float(params.get("a", 1.0))
        b = float(params.get("b", 0.0))
        return lambda eps: (lambda t: a * t + b)
    if name == "bump":
        c = float(params.get("center", 0.0))
        w = float(params.get("width", 0.5))
        h = float(params.get("height", 1.0))
        return lambda eps: (lambda t: h * bump(t, center=c, width=w))
    if name == "smoothed_step":
        return smoothed_step
    if name == "scaled_step_angle":
        # angle profile of the circle-valued jump: pi * smoothed_step
        return lambda eps: (lambda t, e=eps: math.pi * smoothed_step(e)(t))
    if name == "winding":
        rate = float(params.get("rate", 1.0))
        return lambda eps: (lambda t, e=eps: rate * t / e)
    if name == "eps_const":
        return lambda eps: (lambda t, e=eps: 0.0 * t + e)
    if name == "exp_recip":
        # the range-space diffeomorphism y -> e^(1/y)
        return lambda eps: (lambda t: exp(1.0 / t))
    if name == "plus_power":
        base = build_expr(params.get("base", "identity"))
        order = float(params.get("order", 1.0))
        coeff = float(params.get("coeff", 1.0))
        shape = _shape_fn(params)

        def factory(eps: float, base=base, order=order, coeff=coeff, shape=shape):
            b = base(eps)
            amp = coeff * eps**order
            return lambda t: b(t) + amp * shape(t)

        return factory
    if name == "plus_flat":
        # additive defect decaying faster than every power: c * e^(-rate/eps)
        base = build_expr(params.get("base", "identity"))
        rate = float(params.get("rate", 1.0))
        coeff = float(params.get("coeff", 1.0))
        shape = _shape_fn(params)

        def factory(eps: float, base=base, rate=rate, coeff=coeff, shape=shape):
            b = base(eps)
            amp = coeff * math.exp(-rate / eps) if rate / eps < 709.0 else 0.0
            return lambda t: b(t) + amp * shape(t)

        return factory
    raise SpecError(f"unknown expression family {name!r}", "expr.name")


EXPRESSION_FAMILIES = sorted(
    list(_BASE_FNS) + ["poly", "affine", "bump", "smoothed_step",
                       "scaled_step_angle", "winding", "eps_const", "exp_recip",
                       "plus_power", "plus_flat"])
