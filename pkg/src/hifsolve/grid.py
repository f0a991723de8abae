"""Test-problem generation: grids, random coefficient fields, stencil assembly.

The model problem is -div(a(x) grad u) + b*u = f on the unit square/cube with
homogeneous Dirichlet conditions, discretized by the standard 5-point (2D) or
7-point (3D) stencil on a uniform grid with n subdivisions per dimension.
Unknowns live at the (n-1)^dim interior grid points.  The coefficient a(x) is
a quantized high-contrast random field: uniform noise, smoothed by a Gaussian,
then thresholded at its median to the two values contrast^(+-1/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage
import scipy.sparse as sp

from .errors import ConfigurationError, EstimationError, NotSpdError

GENERATOR_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with n = 2^L * m subdivisions per dimension.

    m is the leaf cell size of the associated quad-/octree and L its depth.
    """

    dim: int
    n: int
    m: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if self.m < 2:
            raise ConfigurationError(f"leaf size m must be >= 2, got {self.m}")
        if self.n <= 0 or self.n % self.m != 0:
            raise ConfigurationError(f"n={self.n} is not a multiple of m={self.m}")
        ratio = self.n // self.m
        if ratio < 2 or ratio & (ratio - 1) != 0:
            raise ConfigurationError(
                f"n={self.n} must equal 2^L * m with L >= 1 (m={self.m})"
            )

    @property
    def levels(self) -> int:
        """Tree depth L with n = 2^L * m."""
        return (self.n // self.m).bit_length() - 1

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n - 1,) * self.dim

    @property
    def ndofs(self) -> int:
        return (self.n - 1) ** self.dim

    def coords_of(self, ids) -> np.ndarray:
        """Lattice coordinates (in 1..n-1 per axis) of the given DOF ids.

        DOF ids are x-fastest: id = (x-1) + (n-1)*(y-1) [+ (n-1)^2*(z-1)].
        Returns an array of shape (len(ids), dim).
        """
        ids = np.asarray(ids)
        k = self.n - 1
        out = np.empty(ids.shape + (self.dim,), dtype=np.int64)
        rem = ids
        for d in range(self.dim):
            out[..., d] = rem % k + 1
            rem = rem // k
        return out

    def id_of(self, coords) -> np.ndarray:
        """Inverse of :meth:`coords_of`."""
        coords = np.asarray(coords)
        k = self.n - 1
        ids = np.zeros(coords.shape[:-1], dtype=np.int64)
        for d in range(self.dim - 1, -1, -1):
            ids = ids * k + (coords[..., d] - 1)
        return ids


@dataclass(frozen=True)
class CoefficientField:
    """Quantized coefficient samples on the interior grid points.

    values has shape spec.shape, indexed [x-1, y-1(, z-1)]; the flat DOF
    ordering is Fortran order (x fastest), matching GridSpec.id_of.
    """

    spec: GridSpec
    values: np.ndarray
    seed: int
    contrast: float
    smoothing_width: float
    generator: str = GENERATOR_NAME

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, order="F")

    def metadata(self) -> dict:
        s = self.spec
        return {
            "dim": s.dim,
            "n": s.n,
            "m": s.m,
            "L": s.levels,
            "seed": int(self.seed),
            "contrast": float(self.contrast),
            "smoothing_width": float(self.smoothing_width),
            "generator": self.generator,
        }


class SymSparseMatrix:
    """Symmetric sparse matrix; full pattern stored, lower triangle exported."""

    def __init__(self, csr, check: bool = True):
        csr = sp.csr_array(csr)
        if csr.shape[0] != csr.shape[1]:
            raise ConfigurationError("matrix must be square")
        if check:
            d = csr - csr.T
            if d.nnz and np.max(np.abs(d.data)) > 1e-12 * max(1.0, np.max(np.abs(csr.data))):
                raise ConfigurationError("matrix is not symmetric")
        self.csr = csr

    @classmethod
    def from_coo_lower(cls, n, rows, cols, vals) -> "SymSparseMatrix":
        """Build from lower-triangle coordinates (diagonal included once)."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        vals = np.asarray(vals, dtype=np.float64)
        if np.any(rows < cols):
            raise ConfigurationError("entries must lie in the lower triangle")
        lower = sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
        strict = sp.tril(lower, k=-1)
        return cls(lower + strict.T, check=False)

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def matvec(self, x):
        return self.csr @ x

    def __matmul__(self, x):
        return self.csr @ x

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def lower_coo(self):
        """(rows, cols, values) of the lower triangle, 0-based, row-major order."""
        low = sp.tril(self.csr).tocoo()
        order = np.lexsort((low.col, low.row))
        return low.row[order], low.col[order], low.data[order]

    def write_coordinate(self, path):
        """Write a matrix-market style coordinate listing (1-based, lower triangle)."""
        rows, cols, vals = self.lower_coo()
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            fh.write(f"{self.n} {self.n} {len(vals)}\n")
            for i, j, v in zip(rows, cols, vals):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def generate_field(spec: GridSpec, seed: int, contrast: float = 1e4,
                   smoothing_width: float = 4.0) -> CoefficientField:
    """Draw the quantized high-contrast random coefficient field.

    Pipeline: (1) i.i.d. uniform(0,1) samples at the interior grid points,
    (2) convolution with an isotropic Gaussian of standard deviation
    smoothing_width grid steps, truncated at 4 standard deviations with
    reflective boundary handling, (3) two-level quantization about the lower
    median mu: values <= mu map to contrast^(-1/2), the rest to contrast^(1/2).

    Identical (seed, spec, contrast, smoothing_width) reproduce the field
    bit for bit.
    """
    if contrast < 1.0:
        raise ConfigurationError(f"contrast must be >= 1, got {contrast}")
    if smoothing_width <= 0.0:
        raise ConfigurationError("smoothing_width must be positive")
    rng = np.random.default_rng(seed)
    raw = rng.random(spec.shape)
    smooth = scipy.ndimage.gaussian_filter(
        raw, sigma=smoothing_width, mode="reflect", truncate=4.0
    )
    flat = smooth.reshape(-1)
    k = (flat.size + 1) // 2  # lower median: k-th smallest, k = ceil(N/2)
    mu = np.partition(flat, k - 1)[k - 1]
    lo = contrast ** -0.5
    hi = contrast ** 0.5
    values = np.where(smooth <= mu, lo, hi)
    return CoefficientField(spec, values, seed, contrast, smoothing_width)


def assemble_operator(field: CoefficientField, b: float = 0.0) -> SymSparseMatrix:
    """Assemble the 5/7-point stencil for -div(a grad u) + b*u, scaled by h^2.

    Flux coefficients at half-points are arithmetic means of the two adjacent
    nodal values of a; at half-points next to the domain boundary the interior
    value is used (nearest-sample extension).  Out-of-domain neighbors are
    dropped (homogeneous Dirichlet data).  Scaling through by h^2 keeps the
    entries O(a) without changing conditioning or solver behavior for b = 0.
    """
    if b < 0.0:
        raise ConfigurationError(f"b must be >= 0, got {b}")
    spec = field.spec
    a = field.values
    if a.shape != spec.shape:
        raise ConfigurationError("field shape does not match its grid spec")
    dim = spec.dim
    k = spec.n - 1

    ids = np.arange(spec.ndofs, dtype=np.int64).reshape(spec.shape, order="F")
    diag = np.full(spec.shape, b * spec.h ** 2)
    rows = []
    cols = []
    vals = []
    for d in range(dim):
        sl_lo = tuple(slice(None) if t != d else slice(0, k - 1) for t in range(dim))
        sl_hi = tuple(slice(None) if t != d else slice(1, k) for t in range(dim))
        half = 0.5 * (a[sl_lo] + a[sl_hi])
        diag[sl_lo] += half
        diag[sl_hi] += half
        # lower-triangle entry: larger id row, smaller id column
        rows.append(ids[sl_hi].reshape(-1))
        cols.append(ids[sl_lo].reshape(-1))
        vals.append(-half.reshape(-1))
        # boundary half-points contribute to the diagonal only
        first = tuple(slice(None) if t != d else 0 for t in range(dim))
        last = tuple(slice(None) if t != d else k - 1 for t in range(dim))
        diag[first] += a[first]
        diag[last] += a[last]

    # ids and diag share a shape, so flattening both the same way lines them up
    rows.append(ids.reshape(-1))
    cols.append(ids.reshape(-1))
    vals.append(diag.reshape(-1))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return SymSparseMatrix.from_coo_lower(spec.ndofs, rows, cols, vals)


def estimate_operator_condition(A: SymSparseMatrix, rel_tol: float = 1e-3,
                                maxit: int = 2000, seed: int = 0) -> float:
    """Estimate kappa(A) = lambda_max/lambda_min for SPD A by power iteration.

    The largest eigenvalue comes from power iteration on A, the smallest from
    power iteration on A^{-1} (dense Cholesky solve for N <= 4096, otherwise
    conjugate gradients).  Raises EstimationError with the partial result if
    either iteration fails to settle within maxit.
    """
    from .diagnostics import power_norm  # local import: avoids cycle

    n = A.n
    lam_max = power_norm(lambda x: A.csr @ x, n, rel_tol=rel_tol, maxit=maxit,
                         seed=[seed, 11])
    if not lam_max.converged:
        raise EstimationError("power iteration on A did not converge",
                              partial=lam_max.value)

    if n <= 4096:
        import scipy.linalg

        dense = A.to_dense()
        c, low = scipy.linalg.cho_factor(dense, lower=True)
        solve = lambda x: scipy.linalg.cho_solve((c, low), x)
    else:
        from .krylov import pcg

        def solve(x):
            sol, rep = pcg(A, x, tol=1e-10, maxit=20 * int(math.isqrt(n)) + 1000)
            return sol

    lam_inv = power_norm(solve, n, rel_tol=rel_tol, maxit=maxit, seed=[seed, 13])
    if not lam_inv.converged:
        raise EstimationError("power iteration on A^-1 did not converge",
                              partial=lam_max.value * lam_inv.value)
    return lam_max.value * lam_inv.value


def write_field_text(field: CoefficientField, path):
    """Write the field as a coordinate listing: 1-based linear index, value."""
    flat = field.flat()
    with open(path, "w") as fh:
        fh.write(f"{flat.size}\n")
        for i, v in enumerate(flat):
            fh.write(f"{i + 1} {v:.17g}\n")


def write_metadata_json(field: CoefficientField, path):
    with open(path, "w") as fh:
        json.dump(field.metadata(), fh, indent=2)
        fh.write("\n")
