"""Grids, discrete calculus, quadrature, projections and snapshot IO.

Two boundary modes share one interface. "periodic" is the analysis-grade
mode: Fourier differentiation with the Nyquist mode removed from the
derivative symbol, which makes every derivative exactly skew-adjoint under
the nodal rectangle quadrature. "dirichlet" uses centered second-order
differences and trapezoid quadrature and is meant for order-of-accuracy
work only.

Fields live on the grid nodes as plain numpy arrays of shape
grid.shape + (3,) for vectors, grid.shape + (3, 3) for matrices. On 2-D
grids vectors keep all three components and derivatives along the missing
axis vanish (a slab geometry).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_BOUNDARY_CODES = {"periodic": 0, "dirichlet": 1}
_SNAPSHOT_MAGIC = b"NLCF"
_SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Raised for malformed snapshot files."""


@dataclass(frozen=True, eq=False)
class Grid:
    shape: tuple
    extent: tuple
    boundary: str
    spacing: tuple

    @property
    def ndim(self):
        return len(self.shape)

    def axes(self):
        """1-D node coordinate arrays per spatial axis."""
        out = []
        for n, L, h in zip(self.shape, self.extent, self.spacing):
            if self.boundary == "periodic":
                out.append(np.arange(n) * h)
            else:
                out.append(np.linspace(0.0, L, n))
        return out

    def mesh(self):
        """Broadcastable coordinate arrays, indexing 'ij'."""
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def cell_volume(self):
        vol = 1.0
        for h in self.spacing:
            vol *= h
        return vol


def make_grid(shape, extent=2.0 * np.pi, boundary="periodic") -> Grid:
    if np.isscalar(shape):
        shape = (int(shape),)
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (2, 3):
        raise ValueError("grid must be 2-D or 3-D, got shape %r" % (shape,))
    if np.isscalar(extent):
        extent = (float(extent),) * len(shape)
    extent = tuple(float(L) for L in extent)
    if len(extent) != len(shape):
        raise ValueError("extent and shape rank mismatch")
    if boundary not in _BOUNDARY_CODES:
        raise ValueError("boundary must be 'periodic' or 'dirichlet'")
    if any(n < 4 for n in shape):
        raise ValueError("need at least 4 nodes per axis")
    if any(L <= 0 for L in extent):
        raise ValueError("extent must be positive")
    if boundary == "periodic":
        spacing = tuple(L / n for L, n in zip(extent, shape))
    else:
        spacing = tuple(L / (n - 1) for L, n in zip(extent, shape))
    return Grid(shape=shape, extent=extent, boundary=boundary, spacing=spacing)


def _require_periodic(grid, what):
    if grid.boundary != "periodic":
        raise ValueError("%s requires a periodic grid" % what)


def _wavenumbers_1d(grid, axis):
    """Derivative symbol along one axis, Nyquist zeroed.

    Killing the Nyquist mode keeps the symbol odd, so multiplication by it
    is exactly skew-adjoint on the nodal values. It also matches the exact
    derivative of the symmetric trigonometric interpolant.
    """
    n = grid.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.spacing[axis])
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def _mode_numbers_1d(n):
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def _bcast(arr1d, axis, ndim):
    shape = [1] * ndim
    shape[axis] = arr1d.shape[0]
    return arr1d.reshape(shape)


def partial(grid, f, axis):
    """d f / d x_axis, broadcast over trailing component axes.

    axis may run up to 2 on a 2-D grid, in which case the derivative is
    identically zero (slab geometry).
    """
    f = np.asarray(f, dtype=float)
    if axis >= grid.ndim:
        return np.zeros_like(f)
    if grid.boundary == "periodic":
        fa = np.fft.fft(f, axis=axis)
        k = _bcast(_wavenumbers_1d(grid, axis), axis, f.ndim)
        return np.fft.ifft(1j * k * fa, axis=axis).real
    return np.gradient(f, grid.spacing[axis], axis=axis, edge_order=2)


def scalar_grad(grid, s):
    return np.stack([partial(grid, s, j) for j in range(3)], axis=-1)


def grad(grid, f):
    """Jacobian of a vector field, out[..., i, j] = d f_i / d x_j."""
    return np.stack([partial(grid, f, j) for j in range(3)], axis=-1)


def div_vec(grid, f):
    acc = np.zeros(f.shape[:-1])
    for j in range(grid.ndim):
        acc += partial(grid, f[..., j], j)
    return acc


def div_mat(grid, m):
    """Row-wise divergence, out_i = sum_j d m_ij / d x_j."""
    acc = np.zeros(m.shape[:-1])
    for j in range(grid.ndim):
        acc += partial(grid, m[..., :, j], j)
    return acc


def curl(grid, f):
    c0 = partial(grid, f[..., 2], 1) - partial(grid, f[..., 1], 2)
    c1 = partial(grid, f[..., 0], 2) - partial(grid, f[..., 2], 0)
    c2 = partial(grid, f[..., 1], 0) - partial(grid, f[..., 0], 1)
    return np.stack([c0, c1, c2], axis=-1)


def quad_weights(grid):
    """Nodal quadrature weights as a broadcastable array."""
    if grid.boundary == "periodic":
        return np.full((1,) * grid.ndim, grid.cell_volume())
    w = np.ones(grid.shape)
    for a, (n, h) in enumerate(zip(grid.shape, grid.spacing)):
        wa = np.full(n, h)
        wa[0] = 0.5 * h
        wa[-1] = 0.5 * h
        w *= _bcast(wa, a, grid.ndim)
    return w


def integrate(grid, f):
    """Quadrature of a scalar field."""
    if grid.boundary == "periodic":
        return float(np.sum(f) * grid.cell_volume())
    return float(np.sum(quad_weights(grid) * f))


def _sq_magnitude(grid, f):
    f = np.asarray(f, dtype=float)
    extra = f.ndim - grid.ndim
    if extra == 0:
        return f * f
    return np.sum(f * f, axis=tuple(range(grid.ndim, f.ndim)))


def inner(grid, f, g):
    """L^2 inner product, contracting all component axes."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    prod = f * g
    extra = prod.ndim - grid.ndim
    if extra:
        prod = np.sum(prod, axis=tuple(range(grid.ndim, prod.ndim)))
    return integrate(grid, prod)


def lp_norm(grid, f, p=2):
    """L^p norm with pointwise Euclidean/Frobenius magnitude."""
    m2 = _sq_magnitude(grid, f)
    if np.isinf(p):
        return float(np.sqrt(np.max(m2)))
    if p == 2:
        return float(np.sqrt(integrate(grid, m2)))
    return float(integrate(grid, m2 ** (p / 2.0)) ** (1.0 / p))


def h1_norm(grid, f):
    g = grad(grid, f) if f.shape[-1:] == (3,) and f.ndim == grid.ndim + 1 else None
    if g is None:
        g = scalar_grad(grid, f)
    return float(np.sqrt(lp_norm(grid, f, 2) ** 2 + lp_norm(grid, g, 2) ** 2))


def w1p_norm(grid, f, p):
    g = grad(grid, f) if f.ndim == grid.ndim + 1 else scalar_grad(grid, f)
    return float((lp_norm(grid, f, p) ** p + lp_norm(grid, g, p) ** p) ** (1.0 / p))


def differential(grid, kind, f):
    """Rank-dispatching derivative, kind one of grad, div, curl."""
    f = np.asarray(f, dtype=float)
    extra = f.ndim - grid.ndim
    if kind == "grad":
        if extra == 0:
            return scalar_grad(grid, f)
        if extra == 1 and f.shape[-1] == 3:
            return grad(grid, f)
    elif kind == "div":
        if extra == 1 and f.shape[-1] == 3:
            return div_vec(grid, f)
        if extra == 2 and f.shape[-2:] == (3, 3):
            return div_mat(grid, f)
    elif kind == "curl":
        if extra == 1 and f.shape[-1] == 3:
            return curl(grid, f)
    else:
        raise ValueError("unknown differential kind %r" % kind)
    raise ValueError("field rank incompatible with %s" % kind)


def discrete_norm(grid, f, kind):
    """Named norms used in the regularity weights and reports."""
    table = {"L2": 2, "L3": 3, "L6": 6, "Linf": np.inf}
    if kind in table:
        return lp_norm(grid, f, table[kind])
    if kind == "H1":
        return h1_norm(grid, f)
    raise ValueError("unknown norm kind %r" % kind)


# ---------------------------------------------------------------------------
# spectral projections


def _cutoff_tuple(grid, cutoff):
    if np.isscalar(cutoff):
        return (int(cutoff),) * grid.ndim
    t = tuple(int(c) for c in cutoff)
    if len(t) != grid.ndim:
        raise ValueError("cutoff rank mismatch")
    return t


def cutoff_mask(grid, cutoff):
    """Boolean mask over fft modes keeping |m_a| <= cutoff_a on every axis."""
    cut = _cutoff_tuple(grid, cutoff)
    mask = np.ones(grid.shape, dtype=bool)
    for a, n in enumerate(grid.shape):
        m = _bcast(_mode_numbers_1d(n), a, grid.ndim)
        mask &= np.abs(m) <= cut[a]
    return mask


def spectral_truncate(grid, f, cutoff):
    """Remove all fft modes above the cutoff, componentwise."""
    _require_periodic(grid, "spectral_truncate")
    f = np.asarray(f, dtype=float)
    axes = tuple(range(grid.ndim))
    fhat = np.fft.fftn(f, axes=axes)
    mask = cutoff_mask(grid, cutoff)
    fhat *= mask.reshape(mask.shape + (1,) * (f.ndim - grid.ndim))
    return np.fft.ifftn(fhat, axes=axes).real


def leray_project(grid, v, cutoff=None):
    """Discrete Leray projection onto divergence-free fields.

    Periodic mode uses the same Nyquist-free derivative symbol as div_vec,
    so div_vec(grid, leray_project(grid, v)) vanishes to roundoff and the
    projection is exactly L2-orthogonal and idempotent. The mean mode is
    left untouched. An optional cutoff also truncates to the resolved
    velocity space. Dirichlet mode falls back to a pressure-Poisson
    correction (order-of-accuracy grade).
    """
    v = np.asarray(v, dtype=float)
    if grid.boundary == "dirichlet":
        if cutoff is not None:
            raise ValueError("spectral cutoff requires a periodic grid")
        return _leray_dirichlet(grid, v)
    axes = tuple(range(grid.ndim))
    vhat = np.fft.fftn(v, axes=axes)
    ks = [
        _bcast(_wavenumbers_1d(grid, a), a, grid.ndim) for a in range(grid.ndim)
    ]
    kk = np.zeros(grid.shape)
    for ka in ks:
        kk = kk + ka**2
    dot = np.zeros(grid.shape, dtype=complex)
    for a in range(grid.ndim):
        dot += ks[a] * vhat[..., a]
    safe = np.where(kk > 0.0, kk, 1.0)
    factor = np.where(kk > 0.0, dot / safe, 0.0)
    for a in range(grid.ndim):
        vhat[..., a] -= ks[a] * factor
    if cutoff is not None:
        vhat *= cutoff_mask(grid, cutoff)[..., None]
    return np.fft.ifftn(vhat, axes=axes).real


@dataclass(frozen=True)
class DirectorSpace:
    """Realization of the director-space projection.

    mode "collocation" is the identity (nodal space), mode "spectral"
    truncates to modes |m_a| <= cutoff.
    """

    mode: str = "collocation"
    cutoff: object = None

    def __post_init__(self):
        if self.mode not in ("collocation", "spectral"):
            raise ValueError("director space mode must be collocation or spectral")
        if self.mode == "spectral" and self.cutoff is None:
            raise ValueError("spectral director space needs a cutoff")


def director_project(grid, z, space):
    """Apply the director-space projection to a field.

    On dirichlet grids the director space consists of fields vanishing on
    the boundary (the boundary trace is carried by the extension), so
    boundary rows are zeroed; spectral truncation is periodic-only.
    """
    z = np.asarray(z, dtype=float)
    if grid.boundary == "dirichlet":
        if space is not None and space.mode == "spectral":
            raise ValueError("spectral director space requires a periodic grid")
        out = z.copy()
        out[boundary_mask(grid)] = 0.0
        return out
    if space is None or space.mode == "collocation":
        return z
    return spectral_truncate(grid, z, space.cutoff)


def unit_normalize(d, floor=1e-14):
    n = np.sqrt(np.sum(d * d, axis=-1))
    return d / np.maximum(n, floor)[..., None]


def random_band_limited(grid, rng, max_mode, ncomp=3):
    """Seeded smooth random field, modes |m_a| <= max_mode, max norm 1."""
    _require_periodic(grid, "random_band_limited")
    shape = grid.shape + ((ncomp,) if ncomp else ())
    f = rng.standard_normal(shape)
    axes = tuple(range(grid.ndim))
    fhat = np.fft.fftn(f, axes=axes)
    mask = cutoff_mask(grid, max_mode)
    fhat *= mask.reshape(mask.shape + (1,) * (len(shape) - grid.ndim))
    out = np.fft.ifftn(fhat, axes=axes).real
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out / peak
    return out


def twist_field(grid, mode=1):
    """Unit twist director varying along the last grid axis.

    Satisfies div d = 0, d . curl d = -mode * (2 pi / extent) and
    d x curl d = 0 at the continuous level.
    """
    axes = grid.axes()
    coord = axes[-1]
    wav = 2.0 * np.pi * mode / grid.extent[-1]
    phase = _bcast(wav * coord, grid.ndim - 1, grid.ndim)
    phase = np.broadcast_to(phase, grid.shape)
    d = np.zeros(grid.shape + (3,))
    if grid.ndim == 3:
        d[..., 0] = np.cos(phase)
        d[..., 1] = np.sin(phase)
    else:
        d[..., 0] = np.cos(phase)
        d[..., 2] = -np.sin(phase)
    return d


class ProjectionError(RuntimeError):
    """Raised when the dirichlet pressure solve does not converge."""


def _deriv_matrix_1d(n, h):
    """Second-order first-derivative matrix with one-sided closures."""
    m = sp.lil_matrix((n, n))
    inv = 1.0 / (2.0 * h)
    for i in range(1, n - 1):
        m[i, i - 1] = -inv
        m[i, i + 1] = inv
    m[0, 0] = -3.0 * inv
    m[0, 1] = 4.0 * inv
    m[0, 2] = -inv
    m[n - 1, n - 1] = 3.0 * inv
    m[n - 1, n - 2] = -4.0 * inv
    m[n - 1, n - 3] = inv
    return m.tocsr()


def _neumann_laplacian_1d(n, h):
    m = sp.lil_matrix((n, n))
    inv = 1.0 / h**2
    for i in range(1, n - 1):
        m[i, i - 1] = inv
        m[i, i] = -2.0 * inv
        m[i, i + 1] = inv
    m[0, 0] = -2.0 * inv
    m[0, 1] = 2.0 * inv
    m[n - 1, n - 1] = -2.0 * inv
    m[n - 1, n - 2] = 2.0 * inv
    return m.tocsr()


def _kron_identity_chain(op, slot, shape):
    mats = []
    for a, n in enumerate(shape):
        mats.append(op if a == slot else sp.identity(n, format="csr"))
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _leray_dirichlet(grid, v):
    """Pressure-Poisson projection for the dirichlet mode.

    Solves the compact Neumann Laplacian for the pressure and subtracts its
    gradient. The linear solve converges to roundoff; the divergence of the
    result is second-order small because the composed FD operators do not
    commute exactly (this mode is order-of-accuracy grade only).
    """
    lap = None
    for a, (n, h) in enumerate(zip(grid.shape, grid.spacing)):
        term = _kron_identity_chain(_neumann_laplacian_1d(n, h), a, grid.shape)
        lap = term if lap is None else lap + term
    rhs = div_vec(grid, v).ravel()
    w = quad_weights(grid).ravel()
    rhs = rhs - np.dot(w, rhs) / np.sum(w)
    res = spla.lsmr(lap, rhs, atol=1e-13, btol=1e-13, maxiter=20000)
    phi = res[0]
    istop = res[1]
    if istop not in (0, 1, 2, 4, 5):
        raise ProjectionError("pressure solve did not converge (istop %d)" % istop)
    return v - scalar_grad(grid, phi.reshape(grid.shape))


# ---------------------------------------------------------------------------
# dirichlet extension operator


def boundary_mask(grid):
    mask = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.ndim):
        sl = [slice(None)] * grid.ndim
        sl[a] = 0
        mask[tuple(sl)] = True
        sl[a] = -1
        mask[tuple(sl)] = True
    return mask


def _d2_compact(f, h, axis):
    out = np.zeros_like(f)
    c = [slice(None)] * f.ndim
    p = list(c)
    m = list(c)
    c[axis] = slice(1, -1)
    p[axis] = slice(2, None)
    m[axis] = slice(0, -2)
    out[tuple(c)] = (f[tuple(p)] - 2.0 * f[tuple(c)] + f[tuple(m)]) / h**2
    return out


def _d2_cross(f, ha, hb, a, b):
    out = np.zeros_like(f)
    c = [slice(None)] * f.ndim
    c[a] = slice(1, -1)
    c[b] = slice(1, -1)

    def sl(da, db):
        s = [slice(None)] * f.ndim
        s[a] = slice(1 + da, f.shape[a] - 1 + da)
        s[b] = slice(1 + db, f.shape[b] - 1 + db)
        return tuple(s)

    out[tuple(c)] = (
        f[sl(1, 1)] - f[sl(1, -1)] - f[sl(-1, 1)] + f[sl(-1, -1)]
    ) / (4.0 * ha * hb)
    return out


def elliptic_apply(grid, u, k1, k2):
    """Apply the compact-stencil elliptic operator of the extension.

    The operator is -k2 Lap u - (k1 - k2) grad div u assembled from compact
    second differences (3-point on the diagonal, 4-point cross terms). The
    result is zero on boundary rows; interior rows use the full stencil,
    which only ever reaches grid nodes. This exact operator is what the
    extension solve inverts, so its interior residual on an extended field
    is a solver property, not a discretization property.
    """
    if grid.boundary != "dirichlet":
        raise ValueError("elliptic_apply requires a dirichlet grid")
    u = np.asarray(u, dtype=float)
    h = grid.spacing
    lap = np.zeros_like(u)
    for a in range(grid.ndim):
        lap += _d2_compact(u, h[a], a)
    out = -k2 * lap
    for i in range(grid.ndim):
        acc = np.zeros(grid.shape)
        for j in range(grid.ndim):
            if i == j:
                acc += _d2_compact(u[..., j], h[i], i)
            else:
                acc += _d2_cross(u[..., j], h[i], h[j], i, j)
        out[..., i] -= (k1 - k2) * acc
    mask = boundary_mask(grid)
    out[mask] = 0.0
    return out


def _interior_1d_ops(n, h):
    m = n - 2
    main = np.full(m, -2.0) / h**2
    off = np.full(m - 1, 1.0) / h**2
    d2 = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    offc = np.full(m - 1, 1.0) / (2.0 * h)
    d1 = sp.diags([-offc, offc], [-1, 1], format="csr")
    return d2, d1, sp.identity(m, format="csr")


def _kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _interior_matrix(grid, k1, k2):
    dims = grid.ndim
    per_axis = [_interior_1d_ops(n, h) for n, h in zip(grid.shape, grid.spacing)]

    def spatial_op(which):
        # which maps axis index -> "d2" | "d1" | "id"
        mats = []
        for a in range(dims):
            d2, d1, ident = per_axis[a]
            mats.append({"d2": d2, "d1": d1, "id": ident}[which(a)])
        return _kron_chain(mats)

    lap = None
    for a in range(dims):
        term = spatial_op(lambda ax, a=a: "d2" if ax == a else "id")
        lap = term if lap is None else lap + term

    def second(i, j):
        if i >= dims or j >= dims:
            return None
        if i == j:
            return spatial_op(lambda ax: "d2" if ax == i else "id")
        return spatial_op(lambda ax: "d1" if ax in (i, j) else "id")

    blocks = []
    for i in range(3):
        row = []
        for j in range(3):
            blk = None
            if i == j:
                blk = -k2 * lap
            dij = second(i, j)
            if dij is not None:
                blk = (blk if blk is not None else 0) - (k1 - k2) * dij
            row.append(blk)
        blocks.append(row)
    return sp.bmat(blocks, format="csc")


class ExtensionError(RuntimeError):
    """Raised when the extension solve does not converge."""


def _cg_solve(mat, rhs):
    """Conjugate gradients on the SPD extension system, tight tolerance."""
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return np.zeros_like(rhs)
    try:
        sol, info = spla.cg(mat, rhs, rtol=1e-14, atol=0.0, maxiter=50 * rhs.size)
    except TypeError:  # older scipy spells the tolerance differently
        sol, info = spla.cg(mat, rhs, tol=1e-14, atol=0.0, maxiter=50 * rhs.size)
    if info != 0:
        raise ExtensionError("extension solve did not converge (info %d)" % info)
    return sol


def extend_dirichlet(grid, bc, k1, k2):
    """Elliptic extension of boundary data into the interior.

    Returns the field equal to bc on the boundary whose interior rows
    satisfy elliptic_apply(...) = 0. Exact on constant and affine data
    because the stencils differentiate affine fields exactly.
    """
    if grid.boundary != "dirichlet":
        raise ValueError("extend_dirichlet requires a dirichlet grid")
    bc = np.asarray(bc, dtype=float)
    if bc.shape != grid.shape + (3,):
        raise ValueError("boundary data must be a full vector field")
    mask = boundary_mask(grid)
    lifted = np.where(mask[..., None], bc, 0.0)
    rhs_full = -elliptic_apply(grid, lifted, k1, k2)
    interior = ~mask
    rhs = np.concatenate([rhs_full[..., c][interior] for c in range(3)])
    mat = _interior_matrix(grid, k1, k2)
    sol = _cg_solve(mat, rhs)
    n_int = int(interior.sum())
    out = lifted.copy()
    for c in range(3):
        comp = out[..., c]
        comp[interior] = sol[c * n_int : (c + 1) * n_int]
    return out


# ---------------------------------------------------------------------------
# snapshot IO


def write_snapshot(path, grid, field):
    """Write a field to the binary snapshot format.

    Header: magic, version, dims, boundary code, per-axis node counts,
    per-axis extents, component count (0 for a scalar field). Payload:
    row-major little-endian float64.
    """
    field = np.asarray(field, dtype=float)
    if field.shape[: grid.ndim] != grid.shape:
        raise SnapshotError("field shape does not match grid")
    trailing = field.shape[grid.ndim :]
    if trailing == ():
        ncomp = 0
    elif trailing == (3,):
        ncomp = 3
    else:
        raise SnapshotError("only scalar and 3-component fields are supported")
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(
            struct.pack(
                "<III", _SNAPSHOT_VERSION, grid.ndim, _BOUNDARY_CODES[grid.boundary]
            )
        )
        fh.write(struct.pack("<%dQ" % grid.ndim, *grid.shape))
        fh.write(struct.pack("<%dd" % grid.ndim, *grid.extent))
        fh.write(struct.pack("<Q", ncomp))
        fh.write(np.ascontiguousarray(field, dtype="<f8").tobytes())


def read_snapshot(path):
    """Read a snapshot, returning (grid, field)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _SNAPSHOT_MAGIC:
        raise SnapshotError("bad magic, not a snapshot file")
    off = 4
    version, dims, bcode = struct.unpack_from("<III", raw, off)
    off += 12
    if version != _SNAPSHOT_VERSION:
        raise SnapshotError("unsupported snapshot version %d" % version)
    if dims not in (2, 3):
        raise SnapshotError("bad dimension count %d" % dims)
    shape = struct.unpack_from("<%dQ" % dims, raw, off)
    off += 8 * dims
    extent = struct.unpack_from("<%dd" % dims, raw, off)
    off += 8 * dims
    (ncomp,) = struct.unpack_from("<Q", raw, off)
    off += 8
    boundary = {v: k for k, v in _BOUNDARY_CODES.items()}.get(bcode)
    if boundary is None:
        raise SnapshotError("bad boundary code %d" % bcode)
    grid = make_grid(shape, extent, boundary)
    count = int(np.prod(shape)) * (ncomp if ncomp else 1)
    if len(raw) - off < 8 * count:
        raise SnapshotError("truncated payload")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    full_shape = grid.shape + ((ncomp,) if ncomp else ())
    return grid, data.reshape(full_shape).astype(float)
