"""Extended-real convex functions on R^n and the operations applied to them.

Every handle is an immutable object that evaluates a function
``f: R^n -> R ∪ {+inf}`` on batches of points.  Besides point evaluation a
handle carries the geometric metadata that the integrators rely on:

* ``support_box()``: a coordinate box containing the closure of ``{f < inf}``,
* ``breakpoints()``: per-axis coordinates of kinks and walls,
* ``body()``: the convex body when the handle is an indicator function,
* ``dual_box(p)``: the exact domain of ``f^{*,p}`` when it is a known box,
* ``transform_closed(y, p)``: a closed-form L^p-Legendre transform when one is known.

Plus infinity is represented by the IEEE value ``numpy.inf``.  Evaluation
never produces ``nan`` or ``-inf``; this is enforced at the public boundary.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from . import specfun
from .errors import DimensionError, DomainError, UnsupportedError

__all__ = [
    "AffineLowerBound",
    "Body",
    "FunctionHandle",
    "FunctionalSimplex",
    "GridSampled",
    "GridSpec",
    "IndicatorBall",
    "IndicatorCube",
    "IndicatorSimplex",
    "InfConv",
    "L1Norm",
    "Pulled",
    "Quadratic",
    "Scaled",
    "Tensor",
    "Translated",
    "affine_lower_bound",
    "evaluate",
    "inf_conv",
    "pullback",
    "read_grid_csv",
    "scale",
    "tensor",
    "translate",
    "write_grid_csv",
]

SINGULAR_THRESHOLD = 1e-12


def _as_points(x, dim: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Return ``x`` reshaped to ``(m, dim)`` plus the batch shape to restore."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise DimensionError(f"scalar point given to a function on R^{dim}")
        return arr.reshape(1, 1), ()
    if arr.shape[-1] != dim:
        raise DimensionError(f"point has trailing dimension {arr.shape[-1]}, expected {dim}")
    batch = arr.shape[:-1]
    return arr.reshape(-1, dim), batch


def _restore(values: np.ndarray, batch: tuple[int, ...]):
    values = values.reshape(batch)
    if batch == ():
        return float(values)
    return values


def _clean(values: np.ndarray) -> np.ndarray:
    """Map ``nan`` to an error and ``-inf`` to an error: evaluation must be proper."""
    if np.isnan(values).any():
        raise DomainError("function evaluation produced nan")
    if np.isneginf(values).any():
        raise DomainError("function evaluation produced -inf")
    return values


# ---------------------------------------------------------------------------
# bodies


@dataclass(frozen=True, eq=False)
class Body:
    """Affine image ``{A u + c : u in R}`` of a reference body ``R``.

    ``ref`` is one of ``"cube"`` (``[-1, 1]^n``), ``"ball"`` (closed unit ball)
    or ``"simplex"`` (``{u >= 0, sum u <= 1}``).
    """

    ref: str
    A: np.ndarray
    c: np.ndarray

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def ref_volume(self) -> float:
        n = self.dim
        if self.ref == "cube":
            return 2.0**n
        if self.ref == "ball":
            return math.exp(0.5 * n * math.log(math.pi) - math.lgamma(1 + n / 2))
        return 1.0 / math.factorial(n)

    def volume(self) -> float:
        return abs(float(np.linalg.det(self.A))) * self.ref_volume()

    def to_reference(self, X: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.A, (X - self.c).T).T

    def contains(self, X: np.ndarray) -> np.ndarray:
        U = self.to_reference(X)
        tol = 1e-13
        if self.ref == "cube":
            return np.all(np.abs(U) <= 1 + tol, axis=-1)
        if self.ref == "ball":
            return np.sum(U * U, axis=-1) <= 1 + tol
        return np.all(U >= -tol, axis=-1) & (np.sum(U, axis=-1) <= 1 + tol)

    def mapped(self, M: np.ndarray, shift: np.ndarray) -> "Body":
        """Return the body ``{M x + shift : x in self}``."""
        return Body(self.ref, M @ self.A, M @ self.c + shift)


# ---------------------------------------------------------------------------
# base class


class FunctionHandle:
    """Abstract evaluable function ``R^n -> R ∪ {+inf}``."""

    dim: int
    kind: str = "abstract"

    # -- evaluation -----------------------------------------------------
    def __call__(self, x):
        X, batch = _as_points(x, self.dim)
        return _restore(_clean(self._eval(X)), batch)

    def batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on an ``(m, n)`` array without reshaping overhead."""
        return self._eval(np.asarray(X, dtype=float))

    def _eval(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def gradient(self, x):
        """Gradient where ``f`` is finite and differentiable."""
        X, batch = _as_points(x, self.dim)
        G = self._grad(X)
        return G.reshape(batch + (self.dim,)) if batch else G.reshape(self.dim)

    def _grad(self, X: np.ndarray) -> np.ndarray:
        raise UnsupportedError(f"{self.kind} has no evaluable gradient")

    # -- metadata -------------------------------------------------------
    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def breakpoints(self) -> tuple[np.ndarray, ...]:
        return tuple(np.empty(0) for _ in range(self.dim))

    def body(self) -> Body | None:
        return None

    @property
    def is_indicator(self) -> bool:
        return self.body() is not None

    @property
    def has_gradient(self) -> bool:
        return False

    def dual_box(self, p: float) -> tuple[np.ndarray, np.ndarray] | None:
        return None

    @property
    def has_closed_transform(self) -> bool:
        return False

    def transform_closed(self, Y: np.ndarray, p: float) -> np.ndarray:
        raise UnsupportedError(f"no closed-form transform for {self.kind}")

    def volume_closed(self) -> float | None:
        return None

    def mode_hint(self) -> np.ndarray:
        return np.zeros(self.dim)

    def scale_hint(self) -> float:
        return 1.0

    def linear_structure(self) -> tuple["FunctionHandle", np.ndarray] | None:
        """``(g, M)`` with ``f(x) = g(M x)`` when integrating ``g`` is easier, else ``None``."""
        return None

    @property
    def smooth(self) -> bool:
        """True when ``f`` is finite everywhere and has no breakpoints."""
        lo, hi = self.support_box()
        return bool(np.all(np.isinf(lo)) and np.all(np.isinf(hi))
                    and all(len(b) == 0 for b in self.breakpoints()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


def evaluate(f: FunctionHandle, x):
    """Evaluate ``f`` at ``x``; returns a float or an array of floats (``inf`` allowed)."""
    return f(x)


# ---------------------------------------------------------------------------
# closed-form catalog


@dataclass(frozen=True, eq=False, repr=False)
class L1Norm(FunctionHandle):
    dim: int = 1
    kind: str = field(default="l1", init=False)

    def _eval(self, X):
        return np.sum(np.abs(X), axis=-1)

    def _grad(self, X):
        return np.sign(X)

    @property
    def has_gradient(self):
        return True

    def breakpoints(self):
        return tuple(np.zeros(1) for _ in range(self.dim))

    def dual_box(self, p):
        w = (p + 1.0) / p
        return np.full(self.dim, -w), np.full(self.dim, w)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        z = p * Y / (p + 1.0)
        inside = np.all(np.abs(z) < 1.0, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sum(np.log1p(-np.minimum(z * z, 1.0)), axis=-1)
        out = -(self.dim / p) * math.log(p + 1.0) - s / p
        return np.where(inside, out, np.inf)

    def volume_closed(self):
        return 2.0**self.dim


@dataclass(frozen=True, eq=False, repr=False)
class Quadratic(FunctionHandle):
    dim: int = 1
    kind: str = field(default="quadratic", init=False)

    def _eval(self, X):
        return 0.5 * np.sum(X * X, axis=-1)

    def _grad(self, X):
        return X.copy()

    @property
    def has_gradient(self):
        return True

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        return p / (p + 1.0) * 0.5 * np.sum(Y * Y, axis=-1) - self.dim / (2.0 * p) * math.log1p(p)

    def volume_closed(self):
        return (2.0 * math.pi) ** (self.dim / 2.0)


@dataclass(frozen=True, eq=False, repr=False)
class FunctionalSimplex(FunctionHandle):
    """``sum(x)`` on ``[-1, inf)^n`` and ``+inf`` elsewhere."""

    dim: int = 1
    kind: str = field(default="funcsimplex", init=False)

    def _eval(self, X):
        inside = np.all(X >= -1.0, axis=-1)
        return np.where(inside, np.sum(X, axis=-1), np.inf)

    def _grad(self, X):
        return np.ones_like(X)

    @property
    def has_gradient(self):
        return True

    def support_box(self):
        return np.full(self.dim, -1.0), np.full(self.dim, np.inf)

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, (p + 1.0) / p)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        gap = p + 1.0 - p * Y
        inside = np.all(gap > 0, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.sum(1.0 - Y - np.log(np.maximum(gap, 1e-300)) / p, axis=-1)
        return np.where(inside, out, np.inf)

    def volume_closed(self):
        return math.e**self.dim

    def mode_hint(self):
        return np.full(self.dim, -1.0)


def _log_sinhc(z: np.ndarray) -> np.ndarray:
    """``log(sinh(z)/z)`` without overflow or cancellation."""
    a = np.abs(np.asarray(z, dtype=float))
    small = a < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        big = a + np.log1p(-np.exp(-2.0 * a)) - math.log(2.0) - np.log(a)
    z2 = a * a
    series = z2 / 6.0 - z2 * z2 / 180.0
    return np.where(small, series, big)


@dataclass(frozen=True, eq=False, repr=False)
class IndicatorCube(FunctionHandle):
    dim: int = 1
    half_width: float = 1.0
    kind: str = field(default="cube", init=False)

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError("half_width must be positive")

    def _eval(self, X):
        return np.where(np.all(np.abs(X) <= self.half_width, axis=-1), 0.0, np.inf)

    def support_box(self):
        w = self.half_width
        return np.full(self.dim, -w), np.full(self.dim, w)

    def body(self):
        return Body("cube", self.half_width * np.eye(self.dim), np.zeros(self.dim))

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        return np.sum(_log_sinhc(p * self.half_width * Y), axis=-1) / p

    def volume_closed(self):
        return (2.0 * self.half_width) ** self.dim

    def scale_hint(self):
        return self.half_width


@dataclass(frozen=True, eq=False, repr=False)
class IndicatorBall(FunctionHandle):
    dim: int = 1
    radius: float = 1.0
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("radius must be positive")

    def _eval(self, X):
        return np.where(np.sum(X * X, axis=-1) <= self.radius**2, 0.0, np.inf)

    def support_box(self):
        r = self.radius
        return np.full(self.dim, -r), np.full(self.dim, r)

    def body(self):
        return Body("ball", self.radius * np.eye(self.dim), np.zeros(self.dim))

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        rho = self.radius * np.sqrt(np.sum(Y * Y, axis=-1))
        return specfun.ball_support(self.dim, p, rho)

    def volume_closed(self):
        return self.body().volume()

    def scale_hint(self):
        return self.radius


@dataclass(frozen=True, eq=False, repr=False)
class IndicatorSimplex(FunctionHandle):
    """Indicator of ``{x >= 0, sum x <= 1}``, optionally translated to barycenter 0."""

    dim: int = 1
    centered: bool = False
    kind: str = field(default="simplex", init=False)

    @property
    def offset(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / (self.dim + 1)) if self.centered else np.zeros(self.dim)

    def _eval(self, X):
        U = X + self.offset
        inside = np.all(U >= 0, axis=-1) & (np.sum(U, axis=-1) <= 1.0)
        return np.where(inside, 0.0, np.inf)

    def support_box(self):
        c = self.offset
        return -c, 1.0 - c

    def body(self):
        return Body("simplex", np.eye(self.dim), -self.offset)

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    @property
    def has_closed_transform(self):
        return True

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        flat = Y.reshape(-1, self.dim)
        vals = np.array([specfun.log_simplex_average(p * row) / p for row in flat])
        vals -= flat @ self.offset
        return vals.reshape(Y.shape[:-1])

    def volume_closed(self):
        return 1.0 / math.factorial(self.dim)

    def mode_hint(self):
        return np.full(self.dim, 1.0 / (self.dim + 1)) - self.offset

    def scale_hint(self):
        return 1.0 / self.dim


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned tensor grid with ``counts[i]`` nodes on ``[lo[i], hi[i]]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]
    row_major: bool = True
    budget: int = 4_000_000

    def __post_init__(self):
        lo, hi, counts = tuple(map(float, self.lo)), tuple(map(float, self.hi)), tuple(map(int, self.counts))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)
        if not (len(lo) == len(hi) == len(counts)) or len(lo) == 0:
            raise DimensionError("grid bounds and counts must have equal positive length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise DomainError("grid needs lo < hi on every axis")
        if any(c < 2 for c in counts):
            raise DomainError("grid needs at least two nodes per axis")
        if math.prod(counts) > self.budget:
            raise DomainError(f"grid has {math.prod(counts)} nodes, above budget {self.budget}")

    @property
    def dim(self) -> int:
        return len(self.counts)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @classmethod
    def cube(cls, dim: int, half_width: float, count: int) -> "GridSpec":
        return cls((-half_width,) * dim, (half_width,) * dim, (count,) * dim)


@dataclass(frozen=True, eq=False, repr=False)
class GridSampled(FunctionHandle):
    """Multilinear interpolation of samples on a tensor grid, ``+inf`` outside.

    A cell in which any vertex carrying positive interpolation weight is
    ``+inf`` evaluates to ``+inf``; this never underestimates the function.
    """

    grid: GridSpec = None
    values: np.ndarray = None
    kind: str = field(default="grid", init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(self.grid.counts)
        if np.isnan(vals).any() or np.isneginf(vals).any():
            raise DomainError("grid values must be finite or +inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def _locate(self, X):
        idx, frac, outside = [], [], np.zeros(X.shape[0], dtype=bool)
        for i, ax in enumerate(self.grid.axes()):
            x = X[:, i]
            outside |= (x < ax[0]) | (x > ax[-1])
            k = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, len(ax) - 2)
            idx.append(k)
            frac.append(np.clip((x - ax[k]) / (ax[k + 1] - ax[k]), 0.0, 1.0))
        return idx, frac, outside

    def _eval(self, X):
        idx, frac, outside = self._locate(X)
        total = np.zeros(X.shape[0])
        infinite = outside.copy()
        for corner in itertools.product((0, 1), repeat=self.dim):
            w = np.ones(X.shape[0])
            for i, c in enumerate(corner):
                w = w * (frac[i] if c else 1.0 - frac[i])
            v = self.values[tuple(k + c for k, c in zip(idx, corner))]
            hot = w > 0
            infinite |= hot & np.isinf(v)
            total += np.where(hot & np.isfinite(v), w * np.where(np.isfinite(v), v, 0.0), 0.0)
        return np.where(infinite, np.inf, total)

    def _grad(self, X):
        idx, frac, outside = self._locate(X)
        axes = self.grid.axes()
        G = np.zeros_like(X)
        for corner in itertools.product((0, 1), repeat=self.dim):
            v = self.values[tuple(k + c for k, c in zip(idx, corner))]
            v = np.where(np.isfinite(v), v, np.nan)
            for j in range(self.dim):
                w = np.ones(X.shape[0])
                for i, c in enumerate(corner):
                    if i == j:
                        h = axes[i][idx[i] + 1] - axes[i][idx[i]]
                        w = w * ((1.0 if c else -1.0) / h)
                    else:
                        w = w * (frac[i] if c else 1.0 - frac[i])
                G[:, j] += w * v
        return G

    @property
    def has_gradient(self):
        return True

    def support_box(self):
        return np.array(self.grid.lo), np.array(self.grid.hi)

    def breakpoints(self):
        return tuple(self.grid.axes())

    def dual_box(self, p):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def mode_hint(self):
        flat = np.argmin(np.where(np.isfinite(self.values), self.values, np.inf))
        return self.grid.points()[flat]

    def scale_hint(self):
        return float(np.max(np.array(self.grid.hi) - np.array(self.grid.lo))) / 8.0

    @classmethod
    def sample(cls, f, grid: GridSpec) -> "GridSampled":
        """Sample a callable (handle or plain vectorised function) on ``grid``."""
        pts = grid.points()
        vals = f.batch(pts) if isinstance(f, FunctionHandle) else np.asarray(f(pts), dtype=float)
        return cls(grid=grid, values=vals.reshape(grid.counts))


def read_grid_csv(path: str | Path) -> GridSampled:
    """Read a grid file: a metadata line ``dim,lo_1,hi_1,n_1,...`` then row-major values."""
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r and any(c.strip() for c in r)]
    if not rows:
        raise DomainError(f"grid file {path} is empty")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]  # optional textual header naming the metadata fields
    try:
        meta = [float(t) for t in rows[0]]
        dim = int(meta[0])
        if len(meta) != 1 + 3 * dim:
            raise ValueError
        lo = tuple(meta[1 + 3 * i] for i in range(dim))
        hi = tuple(meta[2 + 3 * i] for i in range(dim))
        counts = tuple(int(meta[3 + 3 * i]) for i in range(dim))
        values = [float(t.strip()) for r in rows[1:] for t in r if t.strip()]
    except (ValueError, IndexError) as exc:
        raise DomainError(f"malformed grid file {path}") from exc
    grid = GridSpec(lo, hi, counts)
    if len(values) != math.prod(counts):
        raise DomainError(f"grid file {path} has {len(values)} values, expected {math.prod(counts)}")
    return GridSampled(grid=grid, values=np.array(values))


def write_grid_csv(f: GridSampled, path: str | Path) -> None:
    g = f.grid
    meta = [str(g.dim)]
    for a, b, c in zip(g.lo, g.hi, g.counts):
        meta += [repr(a), repr(b), str(c)]
    lines = [",".join(meta)]
    vals = f.values.reshape(-1, g.counts[-1])
    for row in vals:
        lines.append(",".join("inf" if np.isinf(v) else repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# algebra


@dataclass(frozen=True, eq=False, repr=False)
class Translated(FunctionHandle):
    """``x -> base(x + a)``."""

    base: FunctionHandle = None
    a: np.ndarray = None
    kind: str = field(default="translated", init=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        if a.shape != (self.base.dim,):
            raise DimensionError(f"translation vector has shape {a.shape}, expected ({self.base.dim},)")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self):
        return self.base.dim

    def _eval(self, X):
        return self.base._eval(X + self.a)

    def _grad(self, X):
        return self.base._grad(X + self.a)

    @property
    def has_gradient(self):
        return self.base.has_gradient

    def support_box(self):
        lo, hi = self.base.support_box()
        return lo - self.a, hi - self.a

    def breakpoints(self):
        return tuple(b - ai for b, ai in zip(self.base.breakpoints(), self.a))

    def body(self):
        b = self.base.body()
        return None if b is None else b.mapped(np.eye(self.dim), -self.a)

    def dual_box(self, p):
        return self.base.dual_box(p)

    @property
    def has_closed_transform(self):
        return self.base.has_closed_transform

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        return self.base.transform_closed(Y, p) - Y @ self.a

    def volume_closed(self):
        return self.base.volume_closed()

    def mode_hint(self):
        return self.base.mode_hint() - self.a

    def scale_hint(self):
        return self.base.scale_hint()


def translate(f: FunctionHandle, a) -> FunctionHandle:
    """Return ``T_a f``, the function ``x -> f(x + a)``."""
    return Translated(base=f, a=a)


@dataclass(frozen=True, eq=False, repr=False)
class Pulled(FunctionHandle):
    """``x -> base(A x)`` for an invertible square ``A``."""

    base: FunctionHandle = None
    A: np.ndarray = None
    kind: str = field(default="pulled", init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)).copy()
        n = self.base.dim
        if A.shape != (n, n):
            raise DimensionError(f"matrix has shape {A.shape}, expected ({n}, {n})")
        if abs(np.linalg.det(A)) < SINGULAR_THRESHOLD:
            raise DomainError("pullback matrix is singular")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self):
        return self.base.dim

    @property
    def diagonal(self) -> bool:
        return bool(np.all(self.A == np.diag(np.diag(self.A))))

    def _eval(self, X):
        return self.base._eval(X @ self.A.T)

    def _grad(self, X):
        return self.base._grad(X @ self.A.T) @ self.A

    @property
    def has_gradient(self):
        return self.base.has_gradient

    def support_box(self):
        lo, hi = self.base.support_box()
        if self.diagonal:
            d = np.diag(self.A)
            a, b = lo / d, hi / d
            return np.minimum(a, b), np.maximum(a, b)
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            Ainv = np.linalg.inv(self.A)
            corners = np.array(list(itertools.product(*zip(lo, hi))))
            img = corners @ Ainv.T
            return img.min(axis=0), img.max(axis=0)
        return super().support_box()

    def breakpoints(self):
        if self.diagonal:
            return tuple(b / d for b, d in zip(self.base.breakpoints(), np.diag(self.A)))
        return super().breakpoints()

    def body(self):
        b = self.base.body()
        if b is None:
            return None
        Ainv = np.linalg.inv(self.A)
        return b.mapped(Ainv, np.zeros(self.dim))

    def dual_box(self, p):
        box = self.base.dual_box(p)
        if box is None:
            return None
        lo, hi = box
        if self.diagonal:
            d = np.diag(self.A)
            a, b = lo * d, hi * d
            return np.minimum(a, b), np.maximum(a, b)
        if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
            return lo, hi
        return None

    @property
    def has_closed_transform(self):
        return self.base.has_closed_transform

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        return self.base.transform_closed(Y @ np.linalg.inv(self.A), p)

    def volume_closed(self):
        v = self.base.volume_closed()
        return None if v is None else v / abs(float(np.linalg.det(self.A)))

    def mode_hint(self):
        return np.linalg.solve(self.A, self.base.mode_hint())

    def linear_structure(self):
        # off-axis kinks and walls of the base become axis-aligned again in u = A x
        return None if self.diagonal else (self.base, self.A)

    def scale_hint(self):
        s = np.linalg.svd(np.linalg.inv(self.A), compute_uv=False)
        return self.base.scale_hint() * float(np.exp(np.mean(np.log(s))))


def pullback(f: FunctionHandle, A) -> FunctionHandle:
    """Return ``A^* f``, the function ``x -> f(A x)``."""
    return Pulled(base=f, A=A)


@dataclass(frozen=True, eq=False, repr=False)
class Tensor(FunctionHandle):
    """``(x, y) -> left(x) + right(y)``."""

    left: FunctionHandle = None
    right: FunctionHandle = None
    kind: str = field(default="tensor", init=False)

    @property
    def dim(self):
        return self.left.dim + self.right.dim

    def _split(self, X):
        k = self.left.dim
        return X[:, :k], X[:, k:]

    def _eval(self, X):
        a, b = self._split(X)
        return self.left._eval(a) + self.right._eval(b)

    def _grad(self, X):
        a, b = self._split(X)
        return np.concatenate([self.left._grad(a), self.right._grad(b)], axis=-1)

    @property
    def has_gradient(self):
        return self.left.has_gradient and self.right.has_gradient

    def support_box(self):
        (a, b), (c, d) = self.left.support_box(), self.right.support_box()
        return np.concatenate([a, c]), np.concatenate([b, d])

    def breakpoints(self):
        return self.left.breakpoints() + self.right.breakpoints()

    def body(self):
        bl, br = self.left.body(), self.right.body()
        if bl is not None and br is not None and bl.ref == br.ref == "cube":
            A = np.zeros((self.dim, self.dim))
            k = self.left.dim
            A[:k, :k], A[k:, k:] = bl.A, br.A
            return Body("cube", A, np.concatenate([bl.c, br.c]))
        return None

    def dual_box(self, p):
        bl, br = self.left.dual_box(p), self.right.dual_box(p)
        if bl is None or br is None:
            return None
        return np.concatenate([bl[0], br[0]]), np.concatenate([bl[1], br[1]])

    @property
    def has_closed_transform(self):
        return self.left.has_closed_transform and self.right.has_closed_transform

    def transform_closed(self, Y, p):
        Y = np.asarray(Y, dtype=float)
        k = self.left.dim
        return self.left.transform_closed(Y[..., :k], p) + self.right.transform_closed(Y[..., k:], p)

    def volume_closed(self):
        a, b = self.left.volume_closed(), self.right.volume_closed()
        return None if a is None or b is None else a * b

    def mode_hint(self):
        return np.concatenate([self.left.mode_hint(), self.right.mode_hint()])

    def scale_hint(self):
        return max(self.left.scale_hint(), self.right.scale_hint())


def tensor(f: FunctionHandle, g: FunctionHandle) -> FunctionHandle:
    """Return ``f ⊗ g``, the function ``(x, y) -> f(x) + g(y)``."""
    return Tensor(left=f, right=g)


@dataclass(frozen=True, eq=False, repr=False)
class Scaled(FunctionHandle):
    """``x -> lam * base(x / lam)``."""

    lam: float = 1.0
    base: FunctionHandle = None
    kind: str = field(default="scaled", init=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("scaling factor must be positive")

    @property
    def dim(self):
        return self.base.dim

    def _eval(self, X):
        v = self.base._eval(X / self.lam)
        return np.where(np.isfinite(v), self.lam * v, np.inf)

    def _grad(self, X):
        return self.base._grad(X / self.lam)

    @property
    def has_gradient(self):
        return self.base.has_gradient

    def support_box(self):
        lo, hi = self.base.support_box()
        return self.lam * lo, self.lam * hi

    def breakpoints(self):
        return tuple(self.lam * b for b in self.base.breakpoints())

    def body(self):
        b = self.base.body()
        return None if b is None else b.mapped(self.lam * np.eye(self.dim), np.zeros(self.dim))

    def dual_box(self, p):
        if self.base.is_indicator:
            return self.base.dual_box(p)
        box = self.base.dual_box(p)
        if box is not None and np.all(np.isinf(box[0])) and np.all(np.isinf(box[1])):
            return box
        return None

    @property
    def has_closed_transform(self):
        return self.base.is_indicator and self.base.has_closed_transform

    def transform_closed(self, Y, p):
        if not self.has_closed_transform:
            return super().transform_closed(Y, p)
        return self.base.transform_closed(self.lam * np.asarray(Y, dtype=float), p)

    def volume_closed(self):
        if self.base.is_indicator:
            v = self.base.volume_closed()
            return None if v is None else v * self.lam**self.dim
        return None

    def mode_hint(self):
        return self.lam * self.base.mode_hint()

    def scale_hint(self):
        return self.lam * self.base.scale_hint()


def scale(lam: float, f: FunctionHandle) -> FunctionHandle:
    """Return ``lam · f``, the function ``x -> lam f(x / lam)``."""
    if not lam > 0:
        raise DomainError("scaling factor must be positive")
    return Scaled(lam=float(lam), base=f)


@dataclass(frozen=True, eq=False, repr=False)
class InfConv(GridSampled):
    """Grid-sampled brute-force infimal convolution; keeps its operands for reference."""

    left: FunctionHandle = None
    right: FunctionHandle = None
    kind: str = field(default="infconv", init=False)


def inf_conv(f: FunctionHandle, g: FunctionHandle, search_grid: GridSpec, chunk: int = 2048) -> InfConv:
    """Brute-force ``(f □ g)(z) = min_x f(x) + g(z - x)`` with ``x, z`` on ``search_grid``.

    The result is exact only up to grid resolution; it is sampled on the
    same grid and returned as a multilinear grid function.
    """
    if f.dim != g.dim or search_grid.dim != f.dim:
        raise DimensionError("inf_conv needs operands and grid of equal dimension")
    pts = search_grid.points()
    if pts.shape[0] == 0:
        raise DomainError("empty search grid")
    fx = f.batch(pts)
    keep = np.isfinite(fx)
    xs, fx = pts[keep], fx[keep]
    out = np.full(pts.shape[0], np.inf)
    if xs.shape[0]:
        for s in range(0, pts.shape[0], max(1, chunk // max(1, xs.shape[0] // 256 + 1))):
            Z = pts[s:s + chunk]
            diff = Z[:, None, :] - xs[None, :, :]
            gv = g.batch(diff.reshape(-1, f.dim)).reshape(Z.shape[0], xs.shape[0])
            out[s:s + chunk] = np.min(fx[None, :] + gv, axis=1)
    return InfConv(grid=search_grid, values=out.reshape(search_grid.counts), left=f, right=g)


# ---------------------------------------------------------------------------
# affine lower bound


@dataclass(frozen=True)
class AffineLowerBound:
    """Constants with ``f(x) >= a |x| + b``."""

    a: float
    b: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.a * np.linalg.norm(x, axis=-1) + self.b


def _radial_extent(f: FunctionHandle, c: np.ndarray, u: np.ndarray, level: float, start: float) -> float:
    """Largest ``t`` with ``f(c + t u) <= level`` along a ray, by bracketing and bisection."""

    def inside(t):
        return float(f.batch((c + t * u)[None, :])[0]) <= level

    lo, hi = 0.0, start
    if inside(hi):
        for _ in range(200):
            lo, hi = hi, 2.0 * hi
            if not inside(hi):
                break
        else:
            raise DomainError("sublevel set appears unbounded; f is not super-linear")
    else:
        for _ in range(80):
            if inside(hi / 2.0):
                lo = hi / 2.0
                break
            hi /= 2.0
        else:
            return 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _directions(n: int) -> np.ndarray:
    eye = np.eye(n)
    diag = np.ones((1, n)) / math.sqrt(n)
    return np.concatenate([eye, -eye, diag, -diag])


def _minimizer(f: FunctionHandle) -> tuple[np.ndarray, float]:
    x0 = np.asarray(f.mode_hint(), dtype=float)
    v0 = float(f.batch(x0[None, :])[0])
    if not np.isfinite(v0):
        raise DomainError("mode hint lies outside the effective domain")

    def obj(x):
        v = float(f.batch(np.asarray(x)[None, :])[0])
        return v if np.isfinite(v) else 1e300

    res = optimize.minimize(obj, x0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * f.dim})
    if res.fun < v0:
        return np.asarray(res.x), float(res.fun)
    return x0, v0


def affine_lower_bound(f: FunctionHandle, validation_points: int = 41,
                       validation_extent: float | None = None) -> AffineLowerBound:
    """Constants ``a > 0, b`` with ``f(x) >= a|x| + b``, from sublevel-set geometry.

    The construction centres at a minimiser ``c`` with value ``beta``, sets
    ``m0 = beta + 1``, estimates a radius ``r`` of a ball around ``c`` inside
    ``{f <= m0}`` and a radius ``R`` of a ball around ``c`` containing
    ``{f <= m0 + 1}``.  Convexity along rays then gives, with ``a = 1/(R - r)``,
    ``f(x) >= a|x - c| + beta - a R`` everywhere, hence the bound with
    ``b = beta - a R - a|c|``.  Both radii come from radial bisection along
    ``2n + 2`` directions and the result is checked on a validation grid.

    Raises
    ------
    DomainError
        If a sublevel set looks unbounded or the validation grid violates the bound.
    """
    n = f.dim
    c, beta = _minimizer(f)
    m0 = beta + 1.0
    start = f.scale_hint()
    axis_r = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        axis_r.append(min(_radial_extent(f, c, e, m0, start), _radial_extent(f, c, -e, m0, start)))
    axis_r = np.array(axis_r)
    # the cross-polytope spanned by the axis hits contains this ball when f is convex
    r = 0.0 if np.any(axis_r <= 0) else 0.99 / math.sqrt(float(np.sum(1.0 / axis_r**2)))
    outer = max(_radial_extent(f, c, u, m0 + 1.0, start) for u in _directions(n))
    R = max(2.0 * outer, r + 1e-12, 1e-12)
    a = 1.0 / (R - r)
    b = beta - a * R - a * float(np.linalg.norm(c))
    bound = AffineLowerBound(a, b)

    L = validation_extent if validation_extent is not None else 4.0 * R + float(np.linalg.norm(c))
    k = validation_points if n <= 2 else min(validation_points, 15)
    grid = GridSpec((-L,) * n, (L,) * n, (k,) * n, budget=10**7).points()
    rng = np.random.default_rng(0)
    pts = np.concatenate([grid, c + rng.normal(scale=R, size=(200, n)), c[None, :]])
    fv = f.batch(pts)
    if np.any(fv < bound(pts) - 1e-9 * (1 + np.abs(bound(pts)))):
        raise DomainError("affine lower bound violated on the validation sample; f may be non-convex")
    return bound
