"""Lipschitz maps pinned at zero, Lip_0 functionals, sampled domains and
seeded random instances.

All maps and functionals evaluate on a single vector or on a stack of vectors
of shape ``(n, dim)``. Scalar profiles act on real numbers; on complex entries
they are applied to the real and imaginary parts separately, which keeps the
scalar Lipschitz constant valid for the complex modulus.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotNormalizable
from .space import (
    DEFAULT_ATOL,
    NormSpec,
    as_normspec,
    as_vector,
    dual_norm,
    norm,
    pairing,
)

NORMALIZE_EPS = 1e-9
# generator-side rejection: |f(x)| must be at least this fraction of Lip(f)*||x||
CONDITION_FLOOR = 0.05
MAX_ATTEMPTS = 32
INSTANCE_ATOL = 1e-12


class Mode(str, enum.Enum):
    HILBERT = "hilbert"
    BANACH_LINEAR = "banach-linear"
    BANACH_NONLINEAR = "banach-nonlinear"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {"linear": "banach-linear", "nonlinear": "banach-nonlinear",
                   "banachlinear": "banach-linear", "banachnonlinear": "banach-nonlinear"}
        return cls(aliases.get(key, key))


def _split(profile, z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return profile(z.real) + 1j * profile(z.imag)
    return profile(z)


def _c2j(arr) -> list:
    arr = np.asarray(arr, dtype=np.complex128)
    return [arr.real.tolist(), arr.imag.tolist()]


def _j2c(obj) -> np.ndarray:
    re, im = obj
    return np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)


# ---------------------------------------------------------------------------
# scalar profiles (real -> real, value 0 at 0)


@dataclass(frozen=True)
class ScaledTanh:
    """t -> scale * tanh(rate * t)."""

    rate: float
    scale: float

    def __call__(self, t):
        return self.scale * np.tanh(self.rate * np.asarray(t, dtype=float))

    def lipschitz(self, radius: float) -> float:
        return abs(self.rate * self.scale)

    def radial_lipschitz(self, radius: float) -> float:
        # phi(r)/r and phi'(r) both lie between 0 and rate*scale
        return 2.0 * abs(self.rate * self.scale)

    def to_json(self):
        return {"profile": "scaled-tanh", "rate": self.rate, "scale": self.scale}


@dataclass(frozen=True)
class PinnedPolynomial:
    """t -> sum_k coeffs[k-1] * t**k; no constant term by construction."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValueError("pinned polynomial needs at least one coefficient")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c in reversed(self.coeffs):
            out = (out + c) * t
        return out

    def lipschitz(self, radius: float) -> float:
        return sum(k * abs(c) * radius ** (k - 1) for k, c in enumerate(self.coeffs, 1))

    def radial_lipschitz(self, radius: float) -> float:
        # sup|phi(r)/r| + sup|phi'(r) - phi(r)/r| <= sum k|c_k| R^(k-1)
        return self.lipschitz(radius)

    def to_json(self):
        return {"profile": "pinned-polynomial", "coeffs": list(self.coeffs)}


def profile_from_json(obj):
    kind = obj["profile"]
    if kind == "scaled-tanh":
        return ScaledTanh(float(obj["rate"]), float(obj["scale"]))
    if kind == "pinned-polynomial":
        return PinnedPolynomial(tuple(obj["coeffs"]))
    raise ValueError(f"unknown profile {kind!r}")


# ---------------------------------------------------------------------------
# maps A with A(0) = 0


class MapSpec:
    is_linear = False
    dim: int | None = None

    def _check(self, u):
        u = as_vector(u)
        if self.dim is not None and u.shape[-1] != self.dim:
            raise DimensionMismatch(f"map acts on dimension {self.dim}, got {u.shape[-1]}")
        return u

    def __call__(self, u) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_bound(self, radius: float, spec) -> float:
        """Upper bound for the Lipschitz constant on the ball of given radius."""
        raise NotImplementedError

    @staticmethod
    def from_json(obj) -> "MapSpec":
        kind = obj["kind"]
        if kind == "linear":
            return LinearMap(_j2c(obj["matrix"]))
        if kind == "componentwise":
            return ComponentwiseMap(profile_from_json(obj["profile"]))
        if kind == "radial":
            return RadialMap(profile_from_json(obj["profile"]), NormSpec(obj["norm"]))
        raise ValueError(f"unknown map kind {kind!r}")


@dataclass(frozen=True, eq=False)
class LinearMap(MapSpec):
    matrix: np.ndarray
    is_linear = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("linear map needs a square matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, u):
        return self._check(u) @ self.matrix.T

    def scaled(self, t) -> "LinearMap":
        return LinearMap(t * self.matrix)

    def lipschitz_bound(self, radius, spec):
        from .lipnorm import matrix_norm_upper

        return matrix_norm_upper(self.matrix, spec)

    def to_json(self):
        return {"kind": "linear", "matrix": _c2j(self.matrix)}


@dataclass(frozen=True, eq=False)
class ComponentwiseMap(MapSpec):
    profile: object

    def __call__(self, u):
        return np.asarray(_split(self.profile, self._check(u)), dtype=np.complex128)

    def lipschitz_bound(self, radius, spec):
        # every |u_i| <= ||u||_p and the profile acts entrywise
        return self.profile.lipschitz(radius)

    def to_json(self):
        return {"kind": "componentwise", "profile": self.profile.to_json()}


@dataclass(frozen=True, eq=False)
class RadialMap(MapSpec):
    """u -> phi(||u||) u / ||u||, with 0 -> 0."""

    profile: object
    norm: NormSpec = field(default_factory=NormSpec)

    def __call__(self, u):
        u = self._check(u)
        r = np.asarray(norm(u, self.norm))
        safe = np.where(r > 0, r, 1.0)
        factor = np.where(r > 0, self.profile(r) / safe, 0.0)
        return np.asarray(factor, dtype=float)[..., None] * u

    def lipschitz_bound(self, radius, spec):
        return self.profile.radial_lipschitz(radius)

    def to_json(self):
        return {"kind": "radial", "profile": self.profile.to_json(),
                "norm": self.norm.to_json()}


def eval_map(A: MapSpec, u) -> np.ndarray:
    return A(u)


# ---------------------------------------------------------------------------
# functionals f in Lip_0


class FunctionalSpec:
    is_linear = False
    w: np.ndarray

    def _pair(self, u):
        u = as_vector(u)
        if u.shape[-1] != self.w.shape[0]:
            raise DimensionMismatch(
                f"functional acts on dimension {self.w.shape[0]}, got {u.shape[-1]}")
        return pairing(self.w, u)

    @staticmethod
    def from_json(obj) -> "FunctionalSpec":
        kind = obj["kind"]
        if kind == "linear":
            return LinearFunctional(_j2c(obj["w"]))
        if kind == "post-composed":
            re, im = obj["scale"]
            return PostComposedFunctional(_j2c(obj["w"]), profile_from_json(obj["profile"]),
                                          complex(re, im))
        raise ValueError(f"unknown functional kind {kind!r}")


def _freeze_vector(v):
    v = np.array(as_vector(v), dtype=np.complex128)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class LinearFunctional(FunctionalSpec):
    """u -> sum u_i conj(w_i)."""

    w: np.ndarray
    is_linear = True

    def __post_init__(self):
        object.__setattr__(self, "w", _freeze_vector(self.w))

    def __call__(self, u):
        return self._pair(u)

    def scaled(self, c) -> "LinearFunctional":
        return LinearFunctional(self.w * np.conj(c))

    def lipschitz_bound(self, radius, spec):
        return dual_norm(self.w, spec)

    def to_json(self):
        return {"kind": "linear", "w": _c2j(self.w)}


@dataclass(frozen=True, eq=False)
class PostComposedFunctional(FunctionalSpec):
    """u -> scale * profile(sum u_i conj(w_i))."""

    w: np.ndarray
    profile: object
    scale: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "w", _freeze_vector(self.w))
        object.__setattr__(self, "scale", complex(self.scale))

    def __call__(self, u):
        return self.scale * _split(self.profile, self._pair(u))

    def scaled(self, c) -> "PostComposedFunctional":
        return PostComposedFunctional(self.w, self.profile, self.scale * c)

    def lipschitz_bound(self, radius, spec):
        wq = dual_norm(self.w, spec)
        return abs(self.scale) * self.profile.lipschitz(radius * wq) * wq

    def to_json(self):
        return {"kind": "post-composed", "w": _c2j(self.w), "profile": self.profile.to_json(),
                "scale": [self.scale.real, self.scale.imag]}


def eval_functional(f: FunctionalSpec, u):
    return f(u)


def normalize_functional(f: FunctionalSpec, x, eps: float = NORMALIZE_EPS) -> FunctionalSpec:
    """Rescale ``f`` so that ``f(x) = 1``."""
    fx = complex(f(x))
    if abs(fx) <= eps:
        raise NotNormalizable(f"|f(x)| = {abs(fx):.3g} is below {eps:g}")
    return f.scaled(1.0 / fx)


# ---------------------------------------------------------------------------
# domains and instances


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Norm ball of ``radius`` with a finite sample cloud that contains 0."""

    radius: float
    cloud: np.ndarray
    norm: NormSpec = field(default_factory=NormSpec)

    def __post_init__(self):
        cloud = np.array(as_vector(self.cloud), dtype=np.complex128)
        if cloud.ndim != 2:
            raise ValueError("cloud must be a 2-D array of points")
        if self.radius <= 0:
            raise ValueError("domain radius must be positive")
        if not np.any(np.all(cloud == 0, axis=1)):
            raise ValueError("domain cloud must contain the zero vector")
        if np.any(norm(cloud, self.norm) > self.radius + DEFAULT_ATOL):
            raise ValueError("cloud point outside the domain ball")
        cloud.setflags(write=False)
        object.__setattr__(self, "cloud", cloud)

    def contains(self, v, atol: float = DEFAULT_ATOL) -> bool:
        return bool(norm(v, self.norm) <= self.radius + atol)

    def augmented(self, *points) -> np.ndarray:
        """Cloud with extra points appended (not re-checked for membership)."""
        extra = [np.atleast_2d(as_vector(p)) for p in points]
        return np.concatenate([self.cloud, *extra], axis=0)

    def to_json(self):
        return {"radius": self.radius, "norm": self.norm.to_json(), "cloud": _c2j(self.cloud)}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["radius"]), _j2c(obj["cloud"]), NormSpec(obj["norm"]))


@dataclass(frozen=True, eq=False)
class Instance:
    mode: Mode
    seed: int
    norm: NormSpec
    M: DomainSpec
    N: DomainSpec
    A: MapSpec
    B: MapSpec
    x: np.ndarray
    f: FunctionalSpec

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        object.__setattr__(self, "x", _freeze_vector(self.x))
        zero = np.zeros(self.dim, dtype=np.complex128)
        if abs(complex(self.f(self.x)) - 1) > INSTANCE_ATOL:
            raise ValueError("instance functional must satisfy f(x) = 1")
        if np.any(self.A(zero) != 0) or np.any(self.B(zero) != 0):
            raise ValueError("instance maps must fix the origin")
        if not (self.M.contains(self.x) and self.N.contains(self.x)):
            raise ValueError("x must lie in both domains")

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def is_linear(self) -> bool:
        return self.A.is_linear and self.B.is_linear and self.f.is_linear

    def to_json(self):
        return {
            "mode": self.mode.value,
            "seed": self.seed,
            "dim": self.dim,
            "p": self.norm.to_json(),
            "M": self.M.to_json(),
            "N": self.N.to_json(),
            "A": self.A.to_json(),
            "B": self.B.to_json(),
            "x": _c2j(self.x),
            "f": self.f.to_json(),
        }

    @classmethod
    def from_json(cls, obj) -> "Instance":
        return cls(
            mode=Mode.parse(obj["mode"]),
            seed=int(obj["seed"]),
            norm=NormSpec(obj["p"]),
            M=DomainSpec.from_json(obj["M"]),
            N=DomainSpec.from_json(obj["N"]),
            A=MapSpec.from_json(obj["A"]),
            B=MapSpec.from_json(obj["B"]),
            x=_j2c(obj["x"]),
            f=FunctionalSpec.from_json(obj["f"]),
        )


# ---------------------------------------------------------------------------
# random generation


@dataclass(frozen=True)
class GeneratorConfig:
    mode: Mode = Mode.HILBERT
    dim: int = 3
    p: float = 2.0
    cloud_size: int = 64
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.cloud_size < 2:
            raise ValueError("cloud_size must be at least 2")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        as_normspec(self.p)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    """(G + G^H) / 2 for complex Gaussian G; exactly Hermitian in floating point."""
    g = complex_gaussian(rng, (dim, dim))
    return (g + g.conj().T) / 2


def sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float, spec) -> np.ndarray:
    """Radially uniform points in the complex l^p ball (exactly uniform for p = 2)."""
    if n <= 0:
        return np.zeros((0, dim), dtype=np.complex128)
    d = complex_gaussian(rng, (n, dim))
    d = d / norm(d, spec)[:, None]
    r = radius * rng.random(n) ** (1.0 / (2 * dim))
    return d * r[:, None]


def _domain(rng, cfg: GeneratorConfig, spec: NormSpec, x) -> DomainSpec:
    zero = np.zeros((1, cfg.dim), dtype=np.complex128)
    pts = sample_ball(rng, cfg.cloud_size - 2, cfg.dim, cfg.radius, spec)
    return DomainSpec(cfg.radius, np.concatenate([zero, np.atleast_2d(x), pts]), spec)


def _random_profile(rng):
    if rng.random() < 0.5:
        rate = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        return ScaledTanh(float(rate), float(rng.uniform(0.3, 1.0)))
    degree = int(rng.integers(2, 4))
    return PinnedPolynomial(tuple(rng.uniform(-1.0, 1.0, degree)))


def _random_nonlinear_map(rng, spec):
    profile = _random_profile(rng)
    if rng.random() < 0.5:
        return ComponentwiseMap(profile)
    return RadialMap(profile, spec)


def _check_conditioning(f, x, radius, spec):
    fx = abs(complex(f(x)))
    if fx < CONDITION_FLOOR * f.lipschitz_bound(radius, spec) * norm(x, spec):
        raise NotNormalizable(f"|f(x)| = {fx:.3g} is poorly conditioned")


def _attempt(rng, cfg: GeneratorConfig, seed: int) -> Instance:
    dim = cfg.dim
    if cfg.mode is Mode.HILBERT:
        spec = NormSpec(2.0)
        A = LinearMap(random_hermitian(rng, dim))
        B = LinearMap(random_hermitian(rng, dim))
        x = complex_gaussian(rng, dim)
        x = x / norm(x, spec)
        f = normalize_functional(LinearFunctional(x), x)
    elif cfg.mode is Mode.BANACH_LINEAR:
        spec = as_normspec(cfg.p)
        scale = 1.0 / math.sqrt(dim)
        A = LinearMap(complex_gaussian(rng, (dim, dim)) * scale)
        B = LinearMap(complex_gaussian(rng, (dim, dim)) * scale)
        x = complex_gaussian(rng, dim)
        x = x / norm(x, spec)
        f0 = LinearFunctional(complex_gaussian(rng, dim))
        _check_conditioning(f0, x, cfg.radius, spec)
        f = normalize_functional(f0, x)
    else:
        spec = as_normspec(cfg.p)
        A = _random_nonlinear_map(rng, spec)
        B = _random_nonlinear_map(rng, spec)
        x = complex_gaussian(rng, dim)
        x = x / norm(x, spec) * cfg.radius * rng.uniform(0.2, 0.6)
        f0 = PostComposedFunctional(complex_gaussian(rng, dim), _random_profile(rng))
        _check_conditioning(f0, x, cfg.radius, spec)
        f = normalize_functional(f0, x)
    M = _domain(rng, cfg, spec, x)
    N = _domain(rng, cfg, spec, x)
    return Instance(cfg.mode, seed, spec, M, N, A, B, x, f)


def generate_instance(seed: int, cfg: GeneratorConfig) -> Instance:
    """Deterministic random instance for ``(seed, cfg)``.

    Draws whose functional cannot be normalized at ``x`` are rejected and
    redrawn from the sub-seed ``[seed, attempt]``.
    """
    last = None
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        try:
            return _attempt(rng, cfg, seed)
        except NotNormalizable as exc:
            last = exc
    raise NotNormalizable(f"no normalizable draw in {MAX_ATTEMPTS} attempts: {last}")
