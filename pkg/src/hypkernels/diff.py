"""Gradients of scalar losses with respect to kernel parameters.

All learnable quantities live in unconstrained real raws; `materialize`
maps them onto their constrained views (poles inside the ball via the
exponential map, weights on the simplex via softmax, nonnegative radial
coefficients via squaring, positive curvature via exp).  Gradients are
computed by a reverse-mode tape over real scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Curvature, TangentVector, exp0
from .kernels import RadialCoeffs
from .rkhs import MultiplierParams


class Var:
    """A scalar node on the reverse-mode tape."""

    __slots__ = ("value", "_parents", "grad")

    def __init__(self, value: float, parents=()):
        self.value = float(value)
        self._parents = parents
        self.grad = 0.0

    def __repr__(self):
        return f"Var({self.value})"

    def __add__(self, other):
        if isinstance(other, Var):
            return Var(self.value + other.value, ((self, 1.0), (other, 1.0)))
        return Var(self.value + other, ((self, 1.0),))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return Var(self.value - other.value, ((self, 1.0), (other, -1.0)))
        return Var(self.value - other, ((self, 1.0),))

    def __rsub__(self, other):
        return Var(other - self.value, ((self, -1.0),))

    def __mul__(self, other):
        if isinstance(other, Var):
            return Var(self.value * other.value, ((self, other.value), (other, self.value)))
        return Var(self.value * other, ((self, float(other)),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            inv = 1.0 / other.value
            return Var(
                self.value * inv,
                ((self, inv), (other, -self.value * inv * inv)),
            )
        inv = 1.0 / other
        return Var(self.value * inv, ((self, inv),))

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        return Var(other * inv, ((self, -other * inv * inv),))

    def __neg__(self):
        return Var(-self.value, ((self, -1.0),))

    def __pow__(self, exponent):
        e = float(exponent)
        val = self.value**e
        return Var(val, ((self, e * self.value ** (e - 1.0)),))

    def exp(self):
        v = math.exp(self.value)
        return Var(v, ((self, v),))

    def log(self):
        return Var(math.log(self.value), ((self, 1.0 / self.value),))

    def tanh(self):
        t = math.tanh(self.value)
        return Var(t, ((self, 1.0 - t * t),))

    def sqrt(self):
        r = math.sqrt(self.value)
        return Var(r, ((self, 0.5 / r),))

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad over the whole tape."""
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = 1.0
        for node in reversed(order):
            g = node.grad
            if g == 0.0:
                continue
            for parent, local in node._parents:
                parent.grad += g * local


@dataclass(frozen=True)
class ParamVector:
    """Unconstrained real raws for every learnable kernel parameter.

    log_c = None freezes the curvature at fixed_c; affine is an optional
    (out_dim, in_dim+1) matrix [W | b] for the zero-shot semantic embedder.
    """

    pole_raws: np.ndarray
    weight_logits: np.ndarray
    radial_raws: np.ndarray
    log_c: float | None = None
    fixed_c: float = 1.0
    affine: np.ndarray | None = None

    def __post_init__(self):
        pr = np.array(self.pole_raws, dtype=np.float64, copy=True)
        wl = np.array(self.weight_logits, dtype=np.float64, copy=True)
        rr = np.array(self.radial_raws, dtype=np.float64, copy=True)
        if pr.ndim != 2 or pr.shape[0] < 1 or pr.shape[1] < 1:
            raise ValueError("pole_raws must be an m x n matrix")
        if wl.shape != (pr.shape[0],):
            raise ValueError("weight_logits must have one entry per pole")
        if rr.ndim != 1 or rr.size < 2:
            raise ValueError("radial_raws must have length K+1 >= 2")
        arrays = [pr, wl, rr]
        af = None
        if self.affine is not None:
            af = np.array(self.affine, dtype=np.float64, copy=True)
            if af.ndim != 2:
                raise ValueError("affine must be a 2-d [W | b] matrix")
            arrays.append(af)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("all raw entries must be finite")
        if self.log_c is not None and not np.isfinite(self.log_c):
            raise ValueError("log_c must be finite")
        if not (np.isfinite(self.fixed_c) and self.fixed_c > 0):
            raise ValueError("fixed_c must be positive and finite")
        for a in arrays:
            a.flags.writeable = False
        object.__setattr__(self, "pole_raws", pr)
        object.__setattr__(self, "weight_logits", wl)
        object.__setattr__(self, "radial_raws", rr)
        object.__setattr__(self, "affine", af)

    @property
    def m(self) -> int:
        return self.pole_raws.shape[0]

    @property
    def dim(self) -> int:
        return self.pole_raws.shape[1]

    @property
    def curvature_value(self) -> float:
        return math.exp(self.log_c) if self.log_c is not None else self.fixed_c

    def view(self) -> "RawView":
        """Plain-float view with the same structure the tape path uses."""
        return RawView(
            pole_raws=[list(map(float, row)) for row in self.pole_raws],
            weight_logits=[float(x) for x in self.weight_logits],
            radial_raws=[float(x) for x in self.radial_raws],
            log_c=float(self.log_c) if self.log_c is not None else None,
            fixed_c=float(self.fixed_c),
            affine=[list(map(float, row)) for row in self.affine]
            if self.affine is not None
            else None,
        )


@dataclass
class RawView:
    """Structural mirror of ParamVector whose leaves are floats or Vars."""

    pole_raws: list
    weight_logits: list
    radial_raws: list
    log_c: object = None
    fixed_c: float = 1.0
    affine: list | None = None


@dataclass(frozen=True)
class Gradient:
    """Gradient with the same shape as the ParamVector raws."""

    pole_raws: np.ndarray
    weight_logits: np.ndarray
    radial_raws: np.ndarray
    log_c: float | None = None
    affine: np.ndarray | None = None


def materialize(p: ParamVector) -> tuple[MultiplierParams, RadialCoeffs, Curvature]:
    """Map raws onto constrained parameter values.

    Poles go through the exponential map so they are always strictly
    interior; weights through softmax; radial coefficients are squared.
    """
    curvature = Curvature(p.curvature_value)
    poles = tuple(
        exp0(TangentVector(row), curvature) for row in np.asarray(p.pole_raws)
    )
    params = MultiplierParams(poles, p.weight_logits)
    radial = RadialCoeffs(p.radial_raws)
    return params, radial, curvature


def grad(loss, p: ParamVector) -> Gradient:
    """Reverse-mode gradient of loss(view) at p.

    `loss` receives a RawView whose leaves are tape scalars; it must
    evaluate finitely.  A frozen curvature (log_c = None) produces no
    gradient component.
    """
    leaves = {}

    def mk(x):
        return Var(float(x))

    view = RawView(
        pole_raws=[[mk(x) for x in row] for row in p.pole_raws],
        weight_logits=[mk(x) for x in p.weight_logits],
        radial_raws=[mk(x) for x in p.radial_raws],
        log_c=mk(p.log_c) if p.log_c is not None else None,
        fixed_c=p.fixed_c,
        affine=[[mk(x) for x in row] for row in p.affine]
        if p.affine is not None
        else None,
    )
    out = loss(view)
    value = out.value if isinstance(out, Var) else float(out)
    if not math.isfinite(value):
        raise ArithmeticError(f"loss evaluated to non-finite value {value}")
    if isinstance(out, Var):
        out.backward()

    def collect(node):
        return node.grad if isinstance(node, Var) else 0.0

    return Gradient(
        pole_raws=np.array([[collect(x) for x in row] for row in view.pole_raws]),
        weight_logits=np.array([collect(x) for x in view.weight_logits]),
        radial_raws=np.array([collect(x) for x in view.radial_raws]),
        log_c=collect(view.log_c) if view.log_c is not None else None,
        affine=np.array([[collect(x) for x in row] for row in view.affine])
        if view.affine is not None
        else None,
    )


ALL_BLOCKS = ("poles", "weights", "alphas", "log_c", "affine")
DEFAULT_BLOCKS = ("poles", "weights", "alphas")


@dataclass(frozen=True)
class OptimizerState:
    """Per-block first/second moment accumulators for the adaptive update."""

    mode: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer mode {self.mode!r}")


_BLOCK_FIELDS = {
    "poles": "pole_raws",
    "weights": "weight_logits",
    "alphas": "radial_raws",
    "log_c": "log_c",
    "affine": "affine",
}


def step(
    state: OptimizerState,
    p: ParamVector,
    g: Gradient,
    lr: float,
    blocks: tuple[str, ...] = DEFAULT_BLOCKS,
) -> tuple[OptimizerState, ParamVector]:
    """One first-order update; returns new state and parameters.

    In "adam" mode the update is normalized by bias-corrected accumulated
    squared gradients; "sgd" is the plain update p - lr*g.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    updates = {}
    new_m = dict(state.m)
    new_v = dict(state.v)
    t = state.t + 1
    for block in blocks:
        if block not in _BLOCK_FIELDS:
            raise ValueError(f"unknown parameter block {block!r}")
        fname = _BLOCK_FIELDS[block]
        pv = getattr(p, fname)
        gv = getattr(g, fname)
        if pv is None:
            continue
        if gv is None:
            raise ValueError(f"gradient missing for block {block!r}")
        pv = np.asarray(pv, dtype=np.float64)
        gv = np.asarray(gv, dtype=np.float64)
        if pv.shape != gv.shape:
            raise ValueError(f"shape mismatch in block {block!r}")
        if state.mode == "sgd":
            updates[fname] = pv - lr * gv
        else:
            m = state.m.get(block, np.zeros_like(pv))
            v = state.v.get(block, np.zeros_like(pv))
            m = state.beta1 * m + (1.0 - state.beta1) * gv
            v = state.beta2 * v + (1.0 - state.beta2) * gv * gv
            m_hat = m / (1.0 - state.beta1**t)
            v_hat = v / (1.0 - state.beta2**t)
            updates[fname] = pv - lr * m_hat / (np.sqrt(v_hat) + state.eps)
            new_m[block] = m
            new_v[block] = v
    kwargs = {}
    for fname, arr in updates.items():
        kwargs[fname] = float(arr) if fname == "log_c" else arr
    new_p = replace(p, **kwargs)
    new_state = replace(state, t=t, m=new_m, v=new_v)
    return new_state, new_p
