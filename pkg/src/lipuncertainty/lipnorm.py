"""Lipschitz norms: closed forms for linear maps/functionals, sampled lower
bounds and seeded local refinement for everything else."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, UnsupportedExponent
from .model import FunctionalSpec, LinearFunctional, LinearMap, MapSpec, complex_gaussian
from .space import NormSpec, as_normspec, as_vector, dual_norm, norm, norming_vector, pairing

PAIR_EPS = 1e-12
POWER_RTOL = 1e-12
POWER_MAX_ITER = 10_000
REFINE_BATCH = 128
# probe pairs closer than this (relative to the domain radius) lose digits to cancellation
REFINE_MIN_SEP = 1e-6

DUAL_FORMULA = "dual-formula"
OPERATOR_FORMULA = "operator-formula"
POWER_ITERATION = "power-iteration"
PAIRWISE_SAMPLE = "pairwise-sample"
REFINED = "refined"


@dataclass(frozen=True, eq=False)
class LipEstimate:
    """A Lipschitz norm value. ``lower`` is always a valid lower bound;
    ``exact`` is set only when a closed form was used."""

    lower: float
    method: str
    exact: float | None = None
    witness: tuple | None = None

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def value(self) -> float:
        return self.exact if self.exact is not None else self.lower

    def to_json(self):
        out = {"lower": self.lower, "method": self.method, "exact": self.exact}
        if self.witness is not None:
            out["witness"] = [[w.real.tolist(), w.imag.tolist()] for w in self.witness]
        return out


def difference_quotient(g, u, v, spec=NormSpec(), out_spec=None) -> float:
    """|g(u) - g(v)| / ||u - v|| for one pair."""
    spec = as_normspec(spec)
    out_spec = spec if out_spec is None else as_normspec(out_spec)
    u, v = as_vector(u), as_vector(v)
    d = np.asarray(g(np.stack([u, v])))
    diff = d[0] - d[1]
    num = abs(complex(diff)) if diff.ndim == 0 else norm(diff, out_spec)
    return float(num / norm(u - v, spec))


# ---------------------------------------------------------------------------
# closed forms


def _spectral(matrix: np.ndarray):
    gram = matrix.conj().T @ matrix
    rng = np.random.default_rng(0x5EED)
    v = complex_gaussian(rng, matrix.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        w = gram @ v
        lam_new = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        v = w / nw
        if abs(lam_new - lam) <= POWER_RTOL * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    # ||Av|| at the converged unit vector is the Rayleigh estimate of sigma_max
    return float(np.linalg.norm(matrix @ v)), v


def lip_exact_linear_map(matrix, spec=NormSpec()) -> LipEstimate:
    """Operator norm of a square matrix on l^1, l^2 or l^inf."""
    spec = as_normspec(spec)
    m = np.asarray(matrix, dtype=np.complex128)
    dim = m.shape[1]
    if spec.p == 1.0:
        cols = np.abs(m).sum(axis=0)
        k = int(np.argmax(cols))
        u = np.zeros(dim, dtype=np.complex128)
        u[k] = 1.0
        val = float(cols[k])
        method = OPERATOR_FORMULA
    elif spec.is_inf:
        rows = np.abs(m).sum(axis=1)
        k = int(np.argmax(rows))
        row = m[k]
        a = np.abs(row)
        u = np.where(a > 0, np.conj(row) / np.where(a > 0, a, 1.0), 1.0).astype(np.complex128)
        val = float(rows[k])
        method = OPERATOR_FORMULA
    elif spec.p == 2.0:
        val, u = _spectral(m)
        method = POWER_ITERATION
    else:
        raise UnsupportedExponent(f"no closed-form operator norm for p = {spec}")
    return LipEstimate(val, method, exact=val, witness=(u, np.zeros(dim, dtype=np.complex128)))


def matrix_norm_upper(matrix, spec=NormSpec()) -> float:
    """Exact operator norm for p in {1, 2, inf}; Riesz-Thorin bound otherwise."""
    spec = as_normspec(spec)
    try:
        return lip_exact_linear_map(matrix, spec).exact
    except UnsupportedExponent:
        m = np.abs(np.asarray(matrix))
        n1 = float(m.sum(axis=0).max())
        ninf = float(m.sum(axis=1).max())
        return n1 ** (1.0 / spec.p) * ninf ** (1.0 - 1.0 / spec.p)


def composite_coefficients(f: LinearFunctional, A: LinearMap, c=0.0) -> np.ndarray:
    """Coefficient vector of the linear functional u -> f(Au) - c f(u)."""
    return A.matrix.conj().T @ f.w - np.conj(c) * f.w


def lip_linear_composite_exact(f: FunctionalSpec, A: MapSpec, c, spec=NormSpec()) -> LipEstimate:
    """Lip_0 norm of u -> f(Au) - c f(u) for linear f and A, via the dual norm."""
    if not (f.is_linear and A.is_linear):
        raise TypeError("closed form needs a linear functional and a linear map")
    spec = as_normspec(spec)
    coeffs = composite_coefficients(f, A, c)
    val = dual_norm(coeffs, spec)
    u = norming_vector(coeffs, spec)
    return LipEstimate(val, DUAL_FORMULA, exact=val, witness=(u, np.zeros_like(u)))


def lip_functional_exact(w, spec=NormSpec()) -> LipEstimate:
    w = as_vector(w)
    val = dual_norm(w, spec)
    u = norming_vector(w, spec)
    return LipEstimate(val, DUAL_FORMULA, exact=val, witness=(u, np.zeros_like(u)))


# ---------------------------------------------------------------------------
# sampling


def lip_sampled(g, cloud, spec=NormSpec(), out_spec=None, pair_eps: float = PAIR_EPS) -> LipEstimate:
    """Largest difference quotient of ``g`` over distinct pairs of ``cloud``.

    ``g`` must accept a stack of points of shape ``(n, dim)``. Pairs are
    scanned in row-major upper-triangle order and the first maximal pair is
    the witness. Pairs closer than ``pair_eps`` are skipped.
    """
    spec = as_normspec(spec)
    out_spec = spec if out_spec is None else as_normspec(out_spec)
    pts = as_vector(cloud)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise EmptySample("need at least two cloud points")
    vals = np.asarray(g(pts))
    i, j = np.triu_indices(pts.shape[0], 1)
    dist = norm(pts[i] - pts[j], spec)
    diff = vals[i] - vals[j]
    num = np.abs(diff) if diff.ndim == 1 else norm(diff, out_spec)
    ok = dist > pair_eps
    if not np.any(ok):
        raise EmptySample("every pair of cloud points is degenerate")
    q = np.where(ok, num / np.where(ok, dist, 1.0), -1.0)
    k = int(np.argmax(q))
    return LipEstimate(float(q[k]), PAIRWISE_SAMPLE, witness=(pts[i[k]].copy(), pts[j[k]].copy()))


def _project(points: np.ndarray, radius: float, spec: NormSpec) -> np.ndarray:
    r = norm(points, spec)
    shrink = np.where(r > radius, radius / np.where(r > 0, r, 1.0), 1.0)
    return points * shrink[:, None]


def lip_refine(g, start: LipEstimate, spec, domain, budget: int, seed: int,
               out_spec=None, pair_eps: float = PAIR_EPS) -> LipEstimate:
    """Seeded hill climb of the difference quotient from ``start``'s witness.

    Each round perturbs the current best pair with a batch of Gaussian moves
    projected back into ``domain``'s ball; ``budget`` counts probe pairs. The
    step size grows on improvement and shrinks otherwise. Never returns a
    smaller lower bound than ``start``.
    """
    if budget <= 0 or start.witness is None:
        return start
    spec = as_normspec(spec)
    out_spec = spec if out_spec is None else as_normspec(out_spec)
    rng = np.random.default_rng(seed)
    radius = float(domain.radius)
    u, v = (as_vector(w) for w in start.witness)
    dim = u.shape[0]
    best = start.lower
    step = 0.25 * radius
    remaining = int(budget)
    while remaining > 0:
        k = min(REFINE_BATCH, remaining)
        remaining -= k
        noise = complex_gaussian(rng, (2, k, dim)) * (step / math.sqrt(dim))
        # a third of the probes move only one endpoint
        which = rng.integers(0, 3, k)
        noise[0, which == 1] = 0.0
        noise[1, which == 2] = 0.0
        U = _project(u + noise[0], radius, spec)
        V = _project(v + noise[1], radius, spec)
        gu, gv = np.asarray(g(U)), np.asarray(g(V))
        diff = gu - gv
        num = np.abs(diff) if diff.ndim == 1 else norm(diff, out_spec)
        dist = norm(U - V, spec)
        ok = dist > max(pair_eps, REFINE_MIN_SEP * radius)
        q = np.where(ok, num / np.where(ok, dist, 1.0), -1.0)
        idx = int(np.argmax(q))
        if q[idx] > best:
            best = float(q[idx])
            u, v = U[idx].copy(), V[idx].copy()
            step = min(step * 1.5, 2.0 * radius)
        else:
            step = max(step * 0.7, REFINE_MIN_SEP * radius)
    if best <= start.lower:
        return start
    return LipEstimate(best, REFINED, exact=start.exact, witness=(u, v))


def functional_of(f: FunctionalSpec):
    """Vectorized scalar map u -> f(u)."""
    return lambda u: f(u)


def composite(f: FunctionalSpec, A: MapSpec, c):
    """Vectorized scalar map u -> f(A(u)) - c f(u)."""
    return lambda u: f(A(u)) - c * f(u)


def pairing_map(w):
    return lambda u: pairing(w, u)
