"""
Structured cell-centred grids, grid functions and the discrete operators
acting on them.

Cells are centred at ``x_i = (i + 1/2) h`` on every axis. Two boundary modes
are supported:

* ``NOFLUX``: even reflection through each face (ghost value equals the
  adjacent interior value). The discrete normal derivative of ``u`` and, when
  the Laplacian is applied twice, of ``Δu`` vanishes on the faces. The
  Laplacian is diagonalised by the type-II DCT.
* ``PERIODIC``: index wrap; diagonalised by the FFT.

All operators are pure: inputs are never modified.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft
import scipy.sparse as sp

from .errors import NonZeroMean

__all__ = [
    "BC",
    "Domain",
    "Field",
    "laplacian",
    "laplacian_matrix",
    "biharmonic",
    "grad_sq",
    "inv_laplacian_meanzero",
    "integrate",
    "mean",
    "norm_l2",
    "seminorm_h1",
    "norm_hm1",
]


class BC(enum.IntEnum):
    NOFLUX = 0
    PERIODIC = 1


@dataclass(frozen=True)
class Domain:
    """Uniform tensor grid on the box ``[0, L_1] x ... x [0, L_d]``."""

    cells: tuple[int, ...]
    lengths: tuple[float, ...]
    bc: BC = BC.NOFLUX

    def __post_init__(self):
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        if len(lengths) == 1 and len(cells) > 1:
            lengths = lengths * len(cells)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "bc", BC(self.bc))
        if not 1 <= len(cells) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(cells)}")
        if len(lengths) != len(cells):
            raise ValueError("cells and lengths must have the same length")
        if min(cells) < 4:
            raise ValueError(f"need at least 4 cells per axis, got {cells}")
        if min(lengths) <= 0 or not np.all(np.isfinite(lengths)):
            raise ValueError(f"lengths must be positive, got {lengths}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def periodic(self) -> bool:
        return self.bc is BC.PERIODIC

    def axes(self) -> list[np.ndarray]:
        """Cell-centre coordinates along each axis."""
        return [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]

    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def refined(self, factor: int = 2) -> "Domain":
        return Domain(tuple(n * factor for n in self.cells), self.lengths, self.bc)

    @cached_property
    def symbol(self) -> np.ndarray:
        """Eigenvalues of the discrete ``-Δ`` in transform ordering."""
        out = np.zeros(self.cells)
        for axis, (n, h) in enumerate(zip(self.cells, self.spacing)):
            k = np.arange(n)
            if self.periodic:
                lam = (2.0 * np.sin(np.pi * k / n) / h) ** 2
            else:
                lam = (2.0 * np.sin(np.pi * k / (2 * n)) / h) ** 2
            shape = [1] * self.dim
            shape[axis] = n
            out = out + lam.reshape(shape)
        return out

    @property
    def max_symbol(self) -> float:
        return float(sum(4.0 / h**2 for h in self.spacing))

    def forward(self, values: np.ndarray) -> np.ndarray:
        if self.periodic:
            return scipy.fft.fftn(values)
        return scipy.fft.dctn(values, type=2, norm="ortho")

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        if self.periodic:
            return scipy.fft.ifftn(coeffs).real
        return scipy.fft.idctn(coeffs, type=2, norm="ortho")

    def apply_multiplier(self, values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
        """Apply a function of ``-Δ`` given by its values on :attr:`symbol`."""
        return self.backward(self.forward(values) * multiplier)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.cells))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.cells, float(c)))


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar grid function, one value per cell, row-major."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.domain.shape:
            v = v.reshape(self.domain.shape)
        object.__setattr__(self, "values", v)

    def like(self, values) -> "Field":
        return Field(self.domain, values)

    def copy(self) -> "Field":
        return Field(self.domain, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        return self.like(self.values + _vals(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.values - _vals(other))

    def __rsub__(self, other):
        return self.like(_vals(other) - self.values)

    def __mul__(self, other):
        return self.like(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def __truediv__(self, other):
        return self.like(self.values / _vals(other))


def _vals(x):
    return x.values if isinstance(x, Field) else x


# ---------------------------------------------------------------------------
# array kernels (used directly by the solver hot loops)
# ---------------------------------------------------------------------------


def _shift(v: np.ndarray, axis: int, step: int, periodic: bool) -> np.ndarray:
    """Neighbour values ``v[i + step]`` along ``axis`` with ghost handling."""
    if periodic:
        return np.roll(v, -step, axis=axis)
    return np.take(v, _ghost_index(v.shape[axis], step), axis=axis)


@lru_cache(maxsize=64)
def _ghost_index(n: int, step: int) -> np.ndarray:
    idx = np.clip(np.arange(n) + step, 0, n - 1)
    idx.setflags(write=False)
    return idx


def lap_array(v: np.ndarray, domain: Domain) -> np.ndarray:
    out = None
    for axis, h in enumerate(domain.spacing):
        term = _shift(v, axis, 1, domain.periodic)
        term += _shift(v, axis, -1, domain.periodic)
        term -= 2.0 * v
        term *= 1.0 / (h * h)
        out = term if out is None else out + term
    return out


def laplacian_matrix(domain: Domain):
    """Sparse CSR matrix of the discrete Laplacian on row-major flattened fields."""
    mats = []
    for n, h in zip(domain.cells, domain.spacing):
        T = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
        if domain.periodic:
            T[0, n - 1] += 1.0
            T[n - 1, 0] += 1.0
        else:
            # replicated ghost cells
            T[0, 0] += 1.0
            T[n - 1, n - 1] += 1.0
        mats.append(sp.csr_matrix(T) / (h * h))
    size = int(np.prod(domain.cells))
    out = sp.csr_matrix((size, size))
    for axis, T in enumerate(mats):
        left = sp.identity(int(np.prod(domain.cells[:axis], dtype=int)), format="csr")
        right = sp.identity(int(np.prod(domain.cells[axis + 1 :], dtype=int)), format="csr")
        out = out + sp.kron(sp.kron(left, T), right, format="csr")
    return out.tocsr()


def face_diffs(v: np.ndarray, domain: Domain, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward one-sided differences ``(d+, d-)`` per cell."""
    h = domain.spacing[axis]
    up = _shift(v, axis, 1, domain.periodic)
    dn = _shift(v, axis, -1, domain.periodic)
    return (up - v) / h, (v - dn) / h


def grad_sq_array(v: np.ndarray, domain: Domain) -> np.ndarray:
    out = np.zeros_like(v)
    for axis in range(domain.dim):
        dp, dm = face_diffs(v, domain, axis)
        out += 0.5 * (dp * dp + dm * dm)
    return out


def weighted_div_grad(v: np.ndarray, weight: np.ndarray, domain: Domain) -> np.ndarray:
    """``∇·(ā ∇v)`` with ``ā`` the arithmetic face average of ``weight``."""
    out = np.zeros_like(v)
    for axis, h in enumerate(domain.spacing):
        dp, dm = face_diffs(v, domain, axis)
        wp = 0.5 * (weight + _shift(weight, axis, 1, domain.periodic))
        wm = 0.5 * (weight + _shift(weight, axis, -1, domain.periodic))
        out += (wp * dp - wm * dm) / h
    return out


def inv_lap_array(v: np.ndarray, domain: Domain) -> np.ndarray:
    """Mean-zero solution of ``-Δx = v`` (zero mode dropped, no checks)."""
    sym = domain.symbol
    inv = np.zeros_like(sym)
    nz = sym > 0
    inv[nz] = 1.0 / sym[nz]
    return domain.apply_multiplier(v, inv)


# ---------------------------------------------------------------------------
# public operators on Fields
# ---------------------------------------------------------------------------


def laplacian(f: Field) -> Field:
    """Second-order 3/5/7-point Laplacian ``Δf`` (note: ``+Δ``, not ``-Δ``)."""
    return f.like(lap_array(f.values, f.domain))


def biharmonic(f: Field) -> Field:
    """``Δ²f``: the Laplacian applied twice, the intermediate field mirrored too."""
    return f.like(lap_array(lap_array(f.values, f.domain), f.domain))


def grad_sq(f: Field) -> Field:
    """Per-cell squared gradient ``Σ_i ½((D+_i f)² + (D-_i f)²)``.

    The face-averaged form satisfies ``integrate(grad_sq(f)) == -<f, Δf>``
    exactly, which keeps the discrete energy and its variational derivative
    consistent.
    """
    return f.like(grad_sq_array(f.values, f.domain))


def integrate(f: Field) -> float:
    return float(np.sum(f.values) * f.domain.cell_volume)


def mean(f: Field) -> float:
    return float(np.mean(f.values))


def norm_l2(f: Field) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.domain.cell_volume))


def seminorm_h1(f: Field) -> float:
    return float(np.sqrt(integrate(grad_sq(f))))


def _require_mean_zero(f: Field) -> None:
    scale = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    m = mean(f)
    if abs(m) > 1e-12 * max(scale, np.finfo(float).tiny):
        raise NonZeroMean(f"mean {m:.3e} exceeds 1e-12 * max|f| = {1e-12 * scale:.3e}")


def inv_laplacian_meanzero(f: Field) -> Field:
    """Mean-zero ``v`` with ``-laplacian(v) = f``; requires mean-zero ``f``."""
    _require_mean_zero(f)
    return f.like(inv_lap_array(f.values, f.domain))


def norm_hm1(f: Field) -> float:
    """Dual norm ``sqrt(<f, (-Δ)^{-1} f>)`` of a mean-zero field."""
    v = inv_laplacian_meanzero(f)
    return float(np.sqrt(max(integrate(f * v), 0.0)))
