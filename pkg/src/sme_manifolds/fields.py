"""
Vector Field Module
State-space vector fields, exact directional derivatives and Lie brackets.

Derivatives are computed with tagged first-order infinitesimals: a ``Dual``
carries a primal part and a tangent part for one tag, and duals nest (the
primal and tangent may themselves be duals of an older tag). Each bracket
level opens a fresh tag, so a depth-n bracket is differentiated exactly
with n nested perturbations.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidArgumentError, ResourceLimitError
from .models.scenario import MeasurementChannel, ScenarioModel
from .ops import TangentVector, commutator, dag

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8

_tag_counter = itertools.count(1)


def _new_tag() -> int:
    return next(_tag_counter)


class Dual:
    """First-order infinitesimal number/matrix: re + eps * (tangent), for one tag."""

    __slots__ = ('tag', 're', 'eps')
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, tag: int, re: Any, eps: Any):
        self.tag = tag
        self.re = re
        self.eps = eps

    def __repr__(self) -> str:
        return f"Dual(tag={self.tag})"

    # arithmetic

    def __add__(self, other):
        return _binary(self, other, _add)

    def __radd__(self, other):
        return _binary(other, self, _add)

    def __sub__(self, other):
        return _binary(self, other, _sub)

    def __rsub__(self, other):
        return _binary(other, self, _sub)

    def __mul__(self, other):
        return _binary(self, other, _mul)

    def __rmul__(self, other):
        return _binary(other, self, _mul)

    def __matmul__(self, other):
        return _binary(self, other, _matmul)

    def __rmatmul__(self, other):
        return _binary(other, self, _matmul)

    def __truediv__(self, other):
        return _binary(self, other, _div)

    def __rtruediv__(self, other):
        return _binary(other, self, _div)

    def __neg__(self):
        return Dual(self.tag, -self.re, -self.eps)

    def __pos__(self):
        return self

    def __getitem__(self, key):
        return Dual(self.tag, self.re[key], self.eps[key])

    def conj(self):
        return Dual(self.tag, conj(self.re), conj(self.eps))

    @property
    def T(self):
        return Dual(self.tag, self.re.T, self.eps.T)

    @property
    def real(self):
        return Dual(self.tag, real(self.re), real(self.eps))

    @property
    def imag(self):
        return Dual(self.tag, imag(self.re), imag(self.eps))


def _tag(x) -> int:
    return x.tag if isinstance(x, Dual) else 0


def _split(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.eps
    return x, None


def _binary(a, b, rule):
    tag = max(_tag(a), _tag(b))
    ar, ae = _split(a, tag)
    br, be = _split(b, tag)
    re, eps = rule(ar, ae, br, be)
    return Dual(tag, re, eps)


def _add(ar, ae, br, be):
    if ae is None:
        return ar + br, be
    if be is None:
        return ar + br, ae
    return ar + br, ae + be


def _sub(ar, ae, br, be):
    if ae is None:
        return ar - br, -be
    if be is None:
        return ar - br, ae
    return ar - br, ae - be


def _product(op):
    def rule(ar, ae, br, be):
        re = op(ar, br)
        if ae is None:
            return re, op(ar, be)
        if be is None:
            return re, op(ae, br)
        return re, op(ar, be) + op(ae, br)
    return rule


_mul = _product(lambda x, y: x * y)
_matmul = _product(lambda x, y: x @ y)


def _div(ar, ae, br, be):
    re = ar / br
    if be is None:
        return re, ae / br
    if ae is None:
        return re, -(ar * be) / (br * br)
    return re, ae / br - (ar * be) / (br * br)


# Generic helpers that accept arrays, Python scalars or duals.

def conj(x):
    return x.conj() if isinstance(x, Dual) else _plain(np.conj(x))


def _plain(x):
    # numpy scalars become Python numbers so that duals can reflect on them
    return x.item() if isinstance(x, np.generic) else x


def real(x):
    if isinstance(x, Dual):
        return x.real
    return _plain(np.real(x))


def imag(x):
    if isinstance(x, Dual):
        return x.imag
    return _plain(np.imag(x))


def adjoint(x):
    return x.conj().T if isinstance(x, Dual) else dag(x)


def trace(x):
    """Matrix trace; plain results are Python complex so duals can reflect on them."""
    if isinstance(x, Dual):
        return Dual(x.tag, trace(x.re), trace(x.eps))
    return complex(np.trace(x))


def log(x):
    if isinstance(x, Dual):
        return Dual(x.tag, log(x.re), x.eps / x.re)
    return _plain(np.log(x))


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(x.tag, e, e * x.eps)
    return _plain(np.exp(x))


def _zeros_like(x):
    if isinstance(x, Dual):
        return _zeros_like(x.re)
    if np.ndim(x) == 0:
        return 0j
    return np.zeros_like(np.asarray(x), dtype=complex)


def tangent(x, tag: int):
    """Coefficient of the ``tag`` infinitesimal in x (zero if x does not depend on it)."""
    if not isinstance(x, Dual) or x.tag < tag:
        return _zeros_like(x)
    if x.tag == tag:
        return x.eps
    return Dual(x.tag, tangent(x.re, tag), tangent(x.eps, tag))


# ---------------------------------------------------------------- field expressions

def _g_value(L: np.ndarray, Ld: np.ndarray, x):
    m = L @ x + x @ Ld
    return m - trace(m) * x


@dataclass(frozen=True, eq=False)
class VectorFieldExpr:
    """Base class of vector-field expression nodes."""

    @property
    def depth(self) -> int:
        return 0

    @property
    def label(self) -> str:
        raise NotImplementedError

    def evaluate(self, x):
        raise NotImplementedError

    def __repr__(self) -> str:
        return self.label


@dataclass(frozen=True, eq=False)
class Ham(VectorFieldExpr):
    """Hamiltonian field -i[H, rho]."""
    H: np.ndarray
    name: str = "H"

    @property
    def label(self) -> str:
        return f"Ham({self.name})"

    def evaluate(self, x):
        return -1j * (self.H @ x - x @ self.H)


@dataclass(frozen=True, eq=False)
class FField(VectorFieldExpr):
    """Lindblad dissipator F_L(rho) = L rho L^dag - {L^dag L, rho}/2."""
    L: np.ndarray
    name: str = "L"

    @property
    def label(self) -> str:
        return f"F({self.name})"

    def evaluate(self, x):
        Ld = dag(self.L)
        ldl = Ld @ self.L
        return self.L @ x @ Ld - 0.5 * (ldl @ x + x @ ldl)


@dataclass(frozen=True, eq=False)
class GField(VectorFieldExpr):
    """Measurement backaction G_L."""
    L: np.ndarray
    name: str = "L"

    @property
    def label(self) -> str:
        return f"G({self.name})"

    def evaluate(self, x):
        return _g_value(self.L, dag(self.L), x)


@dataclass(frozen=True, eq=False)
class DField(VectorFieldExpr):
    """Ito-to-Stratonovich drift correction D_L at efficiency eta."""
    L: np.ndarray
    eta: float
    name: str = "L"

    @property
    def label(self) -> str:
        return f"D({self.name},{self.eta:g})"

    def evaluate(self, x):
        if self.eta == 0:
            return 0 * x
        L, Ld = self.L, dag(self.L)
        g = _g_value(L, Ld, x)
        m = L @ g + g @ Ld
        return -(self.eta / 2) * (m - trace(m) * x - trace(L @ x + x @ Ld) * g)


@dataclass(frozen=True, eq=False)
class CrossResidual(VectorFieldExpr):
    """
    Non-G term (L_j,L_k): [L_j,L_k] rho L_j^dag - Tr([L_j,L_k] rho L_j^dag) rho + h.c.

    Appears in the bracket of the drift of channel j with G_{L_k}.
    """
    Lj: np.ndarray
    Lk: np.ndarray
    name: str = "j,k"

    @property
    def label(self) -> str:
        return f"R({self.name})"

    def evaluate(self, x):
        c = commutator(self.Lj, self.Lk)
        term = c @ x @ dag(self.Lj)
        term = term - trace(term) * x
        return term + adjoint(term)


@dataclass(frozen=True, eq=False)
class Sum(VectorFieldExpr):
    """Weighted sum of fields."""
    terms: Tuple[VectorFieldExpr, ...]
    weights: Tuple[float, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.weights:
            object.__setattr__(self, 'weights', tuple(1.0 for _ in self.terms))
        if len(self.weights) != len(self.terms):
            raise InvalidArgumentError("Sum needs one weight per term")

    @property
    def depth(self) -> int:
        return max((t.depth for t in self.terms), default=0)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        parts = [t.label if w == 1 else f"{w:g}*{t.label}" for t, w in zip(self.terms, self.weights)]
        return "(" + " + ".join(parts) + ")"

    def evaluate(self, x):
        out = None
        for term, w in zip(self.terms, self.weights):
            if w == 0:
                continue
            val = term.evaluate(x) * w if w != 1 else term.evaluate(x)
            out = val if out is None else out + val
        return 0 * x if out is None else out


@dataclass(frozen=True, eq=False)
class Bracket(VectorFieldExpr):
    """Lie bracket [f, g](rho) = Df(rho)[g(rho)] - Dg(rho)[f(rho)]."""
    f: VectorFieldExpr
    g: VectorFieldExpr

    @property
    def depth(self) -> int:
        return 1 + max(self.f.depth, self.g.depth)

    @property
    def label(self) -> str:
        return f"[{self.f.label}, {self.g.label}]"

    def evaluate(self, x):
        fx = self.f.evaluate(x)
        gx = self.g.evaluate(x)
        t1 = _new_tag()
        df_g = tangent(self.f.evaluate(Dual(t1, x, gx)), t1)
        t2 = _new_tag()
        dg_f = tangent(self.g.evaluate(Dual(t2, x, fx)), t2)
        return df_g - dg_f


def _check_point(expr: VectorFieldExpr, rho: np.ndarray, max_depth: int) -> np.ndarray:
    if expr.depth > max_depth:
        raise ResourceLimitError(
            f"Expression depth {expr.depth} exceeds the configured maximum {max_depth}"
        )
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError(f"State must be a square matrix, got {rho.shape}")
    return rho


def evaluate(expr: VectorFieldExpr, rho: np.ndarray, max_depth: int = DEFAULT_MAX_DEPTH) -> TangentVector:
    """
    Evaluate a field expression at rho.

    Raises:
        ResourceLimitError: If the bracket depth exceeds ``max_depth``
    """
    rho = _check_point(expr, rho, max_depth)
    return TangentVector(expr.evaluate(rho))


def directional_derivative(expr: VectorFieldExpr, rho: np.ndarray, sigma,
                           max_depth: int = DEFAULT_MAX_DEPTH) -> TangentVector:
    """
    Exact derivative of ``expr`` at rho along sigma (a TangentVector or operator).
    """
    rho = _check_point(expr, rho, max_depth)
    direction = sigma.op if isinstance(sigma, TangentVector) else np.asarray(sigma, dtype=complex)
    if direction.shape != rho.shape:
        raise InvalidArgumentError(f"Direction shape {direction.shape} does not match state {rho.shape}")
    tag = _new_tag()
    return TangentVector(tangent(expr.evaluate(Dual(tag, rho, direction)), tag))


def strat_correction(channel: MeasurementChannel, rho: np.ndarray) -> TangentVector:
    """D_L(rho) for a measured channel (zero when eta = 0)."""
    rho = np.asarray(rho, dtype=complex)
    if channel.L.shape != rho.shape:
        raise InvalidArgumentError(f"Channel shape {channel.L.shape} does not match state {rho.shape}")
    return TangentVector(DField(channel.L, channel.eta, channel.label or "L").evaluate(rho))


# ---------------------------------------------------------------- model fields

def drift_field(model: ScenarioModel, stratonovich: bool = True,
                include_drives: bool = False, t: float = 0.0) -> VectorFieldExpr:
    """
    Total drift of the model as an expression.

    Args:
        model: Scenario model
        stratonovich: Add the D_L corrections (the form used for bracket analysis)
        include_drives: Use H(t) including drives instead of the bare H
        t: Drive evaluation time
    """
    H = model.hamiltonian(t) if include_drives else model.H
    terms: List[VectorFieldExpr] = [Ham(H, "H")]
    for k, ch in enumerate(model.channels):
        name = ch.label or f"L{k + 1}"
        terms.append(FField(ch.L, name))
        if stratonovich and ch.eta > 0:
            terms.append(DField(ch.L, ch.eta, name))
    return Sum(tuple(terms), name="drift")


def noise_fields(model: ScenarioModel) -> List[VectorFieldExpr]:
    """G_{L_k} for every channel with eta > 0."""
    return [GField(ch.L, ch.label or f"L{k + 1}")
            for k, ch in enumerate(model.channels) if ch.eta > 0]


def control_fields(model: ScenarioModel) -> List[VectorFieldExpr]:
    return [Ham(d.coupling, d.label or f"K{i + 1}") for i, d in enumerate(model.drives)]


@dataclass(frozen=True)
class ClosedFormBracket:
    """Closed-form bracket: an explicit field plus directions it is exact modulo."""
    explicit: VectorFieldExpr
    span: Tuple[VectorFieldExpr, ...] = ()


def bracket_closed_form(kind: str, Lj: np.ndarray, Lk: np.ndarray, eta_j: float = 0.0) -> ClosedFormBracket:
    """
    Closed-form Lie brackets between measurement fields.

    Kinds:
        GG: [G_{Lj}, G_{Lk}] = G_{[Lj,Lk]} exactly.
        driftG_same: [F_L + D_L, G_L] = G_{L'} modulo G_L, with L' = [L, L^dag L]/2.
        driftG_cross: [F_{Lj} + D_{Lj}, G_{Lk}] = (1-eta) (R + G_{L'}) + eta G_{L''}
            modulo G_{[Lj,Lk]} and G_{Lj}, where R is the CrossResidual term,
            L' = [Lk, Lj^dag Lj]/2 and L'' = [Lk, (Lj^dag + Lj) Lj]/2.

    Raises:
        InvalidArgumentError: On an unsupported kind
    """
    Lj = np.asarray(Lj, dtype=complex)
    Lk = np.asarray(Lk, dtype=complex)
    if kind == 'GG':
        return ClosedFormBracket(GField(commutator(Lj, Lk), "[Lj,Lk]"))
    if kind == 'driftG_same':
        lp = 0.5 * commutator(Lj, dag(Lj) @ Lj)
        return ClosedFormBracket(GField(lp, "L'"), (GField(Lj, "L"),))
    if kind == 'driftG_cross':
        lp, lpp = _cross_ops(Lj, Lk)
        explicit = Sum(
            (CrossResidual(Lj, Lk), GField(lp, "L'"), GField(lpp, "L''")),
            (1.0 - eta_j, 1.0 - eta_j, eta_j),
        )
        span = tuple(f for f, op in ((GField(commutator(Lj, Lk), "[Lj,Lk]"), commutator(Lj, Lk)),
                                     (GField(Lj, "Lj"), Lj))
                     if np.any(np.abs(op) > 0))
        return ClosedFormBracket(explicit, span)
    raise InvalidArgumentError(f"Unsupported bracket kind '{kind}'")


def _cross_ops(Lj: np.ndarray, Lk: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    Ljd = dag(Lj)
    lp = 0.5 * commutator(Lk, Ljd @ Lj)
    lpp = 0.5 * commutator(Lk, (Ljd + Lj) @ Lj)
    return lp, lpp


# ---------------------------------------------------------------- coordinates

def ito_transform(h: Callable[[Any], Any], model: ScenarioModel, rho: np.ndarray,
                  t: float = 0.0) -> Tuple[float, np.ndarray]:
    """
    Ito rule for a scalar coordinate h(rho).

    dh = (Dh[f] + 1/2 sum_k D^2h[g_k, g_k]) dt + sum_k Dh[g_k] dw_k, with f the
    Ito drift and g_k = sqrt(eta_k) G_{L_k}. ``h`` must be written with the
    generic helpers of this module (trace, log, exp, indexing) so that it
    accepts dual arguments.

    Returns:
        (drift coefficient, per-channel diffusion coefficients)
    """
    rho = np.asarray(rho, dtype=complex)
    f = drift_field(model, stratonovich=False, include_drives=True, t=t).evaluate(rho)
    diffusion = np.zeros(model.n_channels)
    drift_val = _scalar_derivative(h, rho, f)
    for k, ch in enumerate(model.channels):
        if ch.eta == 0:
            continue
        g = ch.sqrt_eta * GField(ch.L).evaluate(rho)
        diffusion[k] = _scalar_derivative(h, rho, g)
        t1, t2 = _new_tag(), _new_tag()
        point = Dual(t2, Dual(t1, rho, g), g)
        second = tangent(tangent(h(point), t2), t1)
        drift_val += 0.5 * float(np.real(second))
    return drift_val, diffusion


def _scalar_derivative(h, rho, direction) -> float:
    tag = _new_tag()
    return float(np.real(tangent(h(Dual(tag, rho, direction)), tag)))
