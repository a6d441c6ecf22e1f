"""Uncertainty quantities and the inequality chains built on them.

Two uncertainties of a map A at a point x normalized by a functional f
(f(x) = 1)::

    delta(A, x, f) = ||Ax - f(Ax) x||
    nabla(f, A, x) = Lip_0 norm of u -> f(Au) - f(Ax) f(u)

and, on a Hilbert space with unit state h, the classical
``delta_h(A) = ||Ah - <Ah, h> h||``.

Every chain is returned as a :class:`ChainReport`. Slack names have the form
``"upper>=lower"`` so they can be recomputed from the terms. A slack is marked
exact when no estimated quantity and no linearity assumption enters it; a
negative exact slack is a violation, a negative non-exact slack is only an
empirical finding.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainEscape, NonUnitState, NotHermitian
from .lipnorm import (
    LipEstimate,
    composite,
    lip_linear_composite_exact,
    lip_refine,
    lip_sampled,
)
from .model import DomainSpec, FunctionalSpec, Instance, LinearFunctional, LinearMap, MapSpec
from .space import NormSpec, as_normspec, as_vector, inner, norm

DEFAULT_ATOL = 1e-10
DEFAULT_RTOL = 1e-10
STATE_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
EXPECTATION_IMAG_ATOL = 1e-12
DEFAULT_REFINE_BUDGET = 2000

PASS = "pass"
EMPIRICAL = "empirical-negative"
VIOLATION = "violation"


@dataclass
class ChainReport:
    name: str
    terms: dict
    slacks: dict
    exact: dict
    tol: float
    notes: list = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return any(s < -self.tol for s in self.slacks.values())

    @property
    def exact_violation(self) -> bool:
        return any(s < -self.tol and self.exact[k] for k, s in self.slacks.items())

    @property
    def empirical_negative(self) -> bool:
        return any(s < -self.tol and not self.exact[k] for k, s in self.slacks.items())

    @property
    def status(self) -> str:
        if self.exact_violation:
            return VIOLATION
        if self.empirical_negative:
            return EMPIRICAL
        return PASS

    @property
    def min_slack(self) -> float:
        return min(self.slacks.values()) if self.slacks else 0.0

    def recompute_slacks(self) -> dict:
        out = {}
        for key in self.slacks:
            upper, lower = key.split(">=")
            out[key] = self.terms[upper] - self.terms[lower]
        return out

    def to_json(self):
        return {
            "name": self.name,
            "terms": dict(self.terms),
            "slacks": dict(self.slacks),
            "exact": dict(self.exact),
            "tol": self.tol,
            "violated": self.violated,
            "status": self.status,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, obj) -> "ChainReport":
        return cls(obj["name"], dict(obj["terms"]), dict(obj["slacks"]), dict(obj["exact"]),
                   float(obj["tol"]), list(obj.get("notes", [])))


def build_chain(name, terms, order, exact=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL,
                notes=()) -> ChainReport:
    """Chain report with slack ``terms[a] - terms[b]`` for each ``(a, b)`` in ``order``.

    ``exact`` maps slack names to False where an estimate is involved; missing
    names count as exact. Tolerance is ``atol + rtol * max(term)``.
    """
    exact = exact or {}
    terms = {k: float(v) for k, v in terms.items()}
    slacks, flags = {}, {}
    for a, b in order:
        key = f"{a}>={b}"
        slacks[key] = terms[a] - terms[b]
        flags[key] = bool(exact.get(key, True))
    scale = max((abs(v) for v in terms.values()), default=0.0)
    return ChainReport(name, terms, slacks, flags, atol + rtol * scale, list(notes))


def mean_chain_terms(a: float, b: float) -> dict:
    """The algebraic head of every chain: half sum of squares, quarter squared sum, product."""
    return {
        "half_sum_squares": 0.5 * (a * a + b * b),
        "quarter_square_sum": 0.25 * (a + b) ** 2,
        "product": a * b,
    }


HEAD = [("half_sum_squares", "quarter_square_sum"), ("quarter_square_sum", "product")]


# ---------------------------------------------------------------------------
# Banach-space quantities


def evaluation_point(B: MapSpec, x, f: FunctionalSpec) -> np.ndarray:
    """y = Bx - f(Bx) x, the vector whose norm is delta(B, x, f)."""
    x = as_vector(x)
    Bx = B(x)
    return Bx - complex(f(Bx)) * x


def delta(B: MapSpec, x, f: FunctionalSpec, spec=NormSpec(), check: bool = True) -> float:
    """||Bx - f(Bx) x||."""
    x = as_vector(x)
    if check and abs(complex(f(x)) - 1) > STATE_ATOL:
        warnings.warn("delta evaluated with f(x) != 1", RuntimeWarning, stacklevel=2)
    return norm(evaluation_point(B, x, f), spec)


def nabla(f: FunctionalSpec, A: MapSpec, x, M: DomainSpec, spec=NormSpec(), extra_points=(),
          budget: int = DEFAULT_REFINE_BUDGET, seed: int = 0) -> LipEstimate:
    """Lip_0 norm of g(u) = f(Au) - f(Ax) f(u), taken over M.

    Closed form when f and A are linear. Otherwise the sup over M's cloud
    augmented with 0, x and ``extra_points``, then refined by hill climbing.
    """
    spec = as_normspec(spec)
    x = as_vector(x)
    c = complex(f(A(x)))
    if f.is_linear and A.is_linear:
        return lip_linear_composite_exact(f, A, c, spec)
    g = composite(f, A, c)
    zero = np.zeros_like(x)
    cloud = M.augmented(zero, x, *extra_points)
    start = lip_sampled(g, cloud, spec)
    return lip_refine(g, start, spec, M, budget, seed)


def _lip_of_fB(f: FunctionalSpec, B: MapSpec, x, N: DomainSpec, spec, budget, seed) -> LipEstimate:
    """||fB||_Lip0, exact for linear f and B, else sampled over N and refined."""
    if f.is_linear and B.is_linear:
        return lip_linear_composite_exact(f, B, 0.0, spec)
    g = composite(f, B, 0.0)
    start = lip_sampled(g, N.augmented(np.zeros_like(x), x), spec)
    return lip_refine(g, start, spec, N, budget, seed)


def _require_in(domain: DomainSpec | None, owner: MapSpec, point, what: str):
    if owner.is_linear or domain is None:
        return
    if not domain.contains(point):
        raise DomainEscape(what, norm(point, domain.norm), domain.radius)


def commutator_apply(A: MapSpec, B: MapSpec, x, M: DomainSpec | None = None,
                     N: DomainSpec | None = None) -> np.ndarray:
    """A(B(x)) - B(A(x)). M and N are the domains of A and B."""
    x = as_vector(x)
    Bx, Ax = B(x), A(x)
    _require_in(M, A, Bx, "Bx in domain of A")
    _require_in(N, B, Ax, "Ax in domain of B")
    return A(Bx) - B(Ax)


def anticommutator_apply(A: MapSpec, B: MapSpec, x, M: DomainSpec | None = None,
                         N: DomainSpec | None = None) -> np.ndarray:
    """A(B(x)) + B(A(x))."""
    x = as_vector(x)
    Bx, Ax = B(x), A(x)
    _require_in(M, A, Bx, "Bx in domain of A")
    _require_in(N, B, Ax, "Ax in domain of B")
    return A(Bx) + B(Ax)


def middle_form(f: FunctionalSpec, A: MapSpec, x, B: MapSpec, M: DomainSpec | None = None) -> float:
    """|g(y)| with g(u) = f(Au) - f(Ax) f(u) and y = Bx - f(Bx) x."""
    x = as_vector(x)
    y = evaluation_point(B, x, f)
    _require_in(M, A, y, "y = Bx - f(Bx)x in domain of A")
    c = complex(f(A(x)))
    return abs(complex(f(A(y))) - c * complex(f(y)))


@dataclass
class NHRSParts:
    """Shared pieces of the Banach chains for one instance."""

    Ax: np.ndarray
    Bx: np.ndarray
    fAx: complex
    fBx: complex
    y: np.ndarray
    delta_b: float
    nabla: LipEstimate
    middle: float
    final: float


def nhrs_parts(inst: Instance, budget: int = DEFAULT_REFINE_BUDGET, seed: int | None = None) -> NHRSParts:
    spec, A, B, f, x = inst.norm, inst.A, inst.B, inst.f, inst.x
    seed = inst.seed if seed is None else seed
    Ax, Bx = A(x), B(x)
    fAx, fBx = complex(f(Ax)), complex(f(Bx))
    y = Bx - fBx * x
    _require_in(inst.M, A, y, "y = Bx - f(Bx)x in M")
    _require_in(inst.M, A, Bx, "Bx in M")
    nab = nabla(f, A, x, inst.M, spec, extra_points=(y,), budget=budget, seed=seed)
    middle = abs(complex(f(A(y))) - fAx * complex(f(y)))
    final = abs(complex(f(A(Bx))) - fAx * fBx)
    return NHRSParts(Ax, Bx, fAx, fBx, y, norm(y, spec), nab, middle, final)


def nabla_upper_bound(inst: Instance, fAx: complex) -> float:
    """Catalog bound Lip(f) Lip(A) + |f(Ax)| Lip(f) for nabla over the ball of M."""
    r, spec = inst.M.radius, inst.norm
    lip_a = inst.A.lipschitz_bound(r, spec)
    # A maps the ball of radius r into the ball of radius lip_a * r
    lip_f_image = inst.f.lipschitz_bound(r * max(1.0, lip_a), spec)
    return lip_f_image * lip_a + abs(fAx) * inst.f.lipschitz_bound(r, spec)


def chain_nhrs(inst: Instance, budget: int = DEFAULT_REFINE_BUDGET, atol=DEFAULT_ATOL,
               rtol=DEFAULT_RTOL, parts: NHRSParts | None = None) -> ChainReport:
    """half(nabla^2 + delta^2) >= quarter(nabla + delta)^2 >= nabla*delta
    >= |f(ABx) - f(Ax) f(Bx)|, with the middle form |g(y)| alongside."""
    parts = parts or nhrs_parts(inst, budget)
    nab, dlt = parts.nabla.value, parts.delta_b
    terms = {"nabla": nab, "delta": dlt, **mean_chain_terms(nab, dlt),
             "middle_form": parts.middle, "final_bound": parts.final}
    order = HEAD + [("product", "middle_form"), ("product", "final_bound")]
    exact, notes = {}, []
    if not parts.nabla.is_exact:
        notes.append("nabla is a sampled lower bound over the cloud of M")
    if not inst.is_linear:
        exact["product>=final_bound"] = False
        notes.append("final form assumes linear f and A; slack is empirical")
        terms["nabla_upper"] = max(nabla_upper_bound(inst, parts.fAx), nab)
        terms["product_upper"] = terms["nabla_upper"] * dlt
        order.append(("product_upper", "final_bound"))
        exact["product_upper>=final_bound"] = False
    return build_chain("nhrs", terms, order, exact, atol, rtol, notes)


def _corollary(name, inst, parts, budget, atol, rtol, sign):
    spec, A, B, f, x = inst.norm, inst.A, inst.B, inst.f, inst.x
    fb = _lip_of_fB(f, B, x, inst.N, spec, budget, inst.seed + 1)
    if sign < 0:
        applied = commutator_apply(A, B, x, inst.M, inst.N)
        delta_a = delta(A, x, f, spec)
    else:
        applied = anticommutator_apply(A, B, x, inst.M, inst.N)
        # delta(A, x, -f) = ||Ax + f(Ax) x||
        delta_a = norm(parts.Ax + parts.fAx * x, spec)
    lhs_a = parts.nabla.value * parts.delta_b
    lhs_b = fb.value * delta_a
    terms = {
        "nabla_delta_b": lhs_a,
        "fb_norm": fb.value,
        "delta_a": delta_a,
        "lhs": lhs_a + lhs_b,
        "rhs": abs(complex(f(applied))),
    }
    notes = []
    if sign > 0 and A.is_linear:
        terms["delta_a_neg_x"] = delta(A, -x, f, spec, check=False)
    exact = {}
    if not inst.is_linear:
        exact["lhs>=rhs"] = False
        notes.append("nabla and ||fB|| are estimates and the bound assumes linearity; empirical")
    return build_chain(name, terms, [("lhs", "rhs")], exact, atol, rtol, notes)


def corollary_commutator(inst: Instance, budget: int = DEFAULT_REFINE_BUDGET, atol=DEFAULT_ATOL,
                         rtol=DEFAULT_RTOL, parts: NHRSParts | None = None) -> ChainReport:
    """nabla(f,A,x) delta(B,x,f) + ||fB|| delta(A,x,f) >= |f([A,B]x)|."""
    parts = parts or nhrs_parts(inst, budget)
    return _corollary("commutator", inst, parts, budget, atol, rtol, -1)


def corollary_anticommutator(inst: Instance, budget: int = DEFAULT_REFINE_BUDGET,
                             atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL,
                             parts: NHRSParts | None = None) -> ChainReport:
    """nabla(f,A,x) delta(B,x,f) + ||fB|| delta(A,x,-f) >= |f({A,B}x)|."""
    parts = parts or nhrs_parts(inst, budget)
    return _corollary("anticommutator", inst, parts, budget, atol, rtol, +1)


# ---------------------------------------------------------------------------
# Hilbert space


def _matrix(A) -> np.ndarray:
    return A.matrix if isinstance(A, LinearMap) else np.asarray(A, dtype=np.complex128)


def check_hermitian(A, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    m = _matrix(A)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian("operator must be a square matrix")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.conj().T).max(initial=0.0) > atol * scale:
        raise NotHermitian("operator is not self-adjoint")
    return m


def check_state(h, atol: float = STATE_ATOL) -> np.ndarray:
    h = as_vector(h)
    if abs(norm(h, 2) - 1.0) > atol:
        raise NonUnitState(f"state has norm {norm(h, 2):.15g}, expected 1")
    return h


def expectation(A, h) -> float:
    """<Ah, h> as a real number; rejects imaginary parts above 1e-12."""
    m = _matrix(A)
    h = as_vector(h)
    e = inner(m @ h, h)
    if abs(e.imag) > EXPECTATION_IMAG_ATOL * max(1.0, abs(e.real)):
        raise NotHermitian(f"expectation has imaginary part {e.imag:.3g}")
    return e.real


def delta_hilbert(A, h) -> float:
    """||Ah - <Ah, h> h||_2 for Hermitian A and unit h."""
    m = check_hermitian(A)
    h = check_state(h)
    Ah = m @ h
    return norm(Ah - inner(Ah, h) * h, 2)


def delta_hilbert_sqrt(A, h) -> float:
    """sqrt(||Ah||^2 - <Ah, h>^2); same value as :func:`delta_hilbert`."""
    m = check_hermitian(A)
    h = check_state(h)
    e = expectation(m, h)
    return float(np.sqrt(max(norm(m @ h, 2) ** 2 - e * e, 0.0)))


class Reduction(NamedTuple):
    nabla: float
    delta: float
    discrepancy: float


def hilbert_reduction_check(A, h) -> Reduction:
    """nabla(f, A, h) for f(u) = <u, h>, against delta_h(A).

    nabla is the l^2 dual norm of u -> <Au, h> - <Ah, h><u, h>, whose
    coefficient vector is A^H h - conj(<Ah, h>) h.
    """
    m = check_hermitian(A)
    h = check_state(h)
    f = LinearFunctional(h)
    op = LinearMap(m)
    est = lip_linear_composite_exact(f, op, complex(f(op(h))), 2)
    d = delta_hilbert(m, h)
    return Reduction(est.exact, d, abs(est.exact - d))


def robertson_chain(A, B, h, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL) -> ChainReport:
    """half(dA^2 + dB^2) >= quarter(dA + dB)^2 >= dA dB >= half|<[A,B]h, h>|."""
    a, b = check_hermitian(A), check_hermitian(B)
    h = check_state(h)
    da, db = delta_hilbert(a, h), delta_hilbert(b, h)
    comm = (a @ b - b @ a) @ h
    terms = {"delta_a": da, "delta_b": db, **mean_chain_terms(da, db),
             "robertson_bound": 0.5 * abs(inner(comm, h))}
    return build_chain("robertson", terms, HEAD + [("product", "robertson_bound")], atol=atol,
                       rtol=rtol)


class Schrodinger(NamedTuple):
    covariance_form: float
    identity_form: float
    product: float


def schrodinger_bound(A, B, h) -> Schrodinger:
    """Both right-hand forms of the Schrodinger bound and dA * dB."""
    a, b = check_hermitian(A), check_hermitian(B)
    h = check_state(h)
    Ah, Bh = a @ h, b @ h
    ea, eb = expectation(a, h), expectation(b, h)
    cov = abs(inner(Ah, Bh) - ea * eb)
    comm = inner((a @ b - b @ a) @ h, h)
    anti = inner((a @ b + b @ a) @ h, h)
    ident = 0.5 * np.sqrt(abs(comm) ** 2 + abs(anti - 2 * ea * eb) ** 2)
    return Schrodinger(float(cov), float(ident), delta_hilbert(a, h) * delta_hilbert(b, h))


def schrodinger_chain(A, B, h, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL) -> ChainReport:
    """product >= covariance form, the two right-hand forms equal, and the
    covariance form dominating the Robertson bound."""
    s = schrodinger_bound(A, B, h)
    a, b = check_hermitian(A), check_hermitian(B)
    comm = (a @ b - b @ a) @ as_vector(h)
    terms = {"product": s.product, "covariance_form": s.covariance_form,
             "identity_form": s.identity_form,
             "robertson_bound": 0.5 * abs(inner(comm, h))}
    order = [("product", "covariance_form"), ("covariance_form", "identity_form"),
             ("identity_form", "covariance_form"), ("covariance_form", "robertson_bound")]
    return build_chain("schrodinger", terms, order, atol=atol, rtol=rtol)
