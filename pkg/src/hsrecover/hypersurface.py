"""Polynomial hypersurface fits of an observable against noise rates.

The observable is modelled as

    <A> = A_0 + sum_j g_j A_j + sum_{j<=k} g_j g_k A_jk + ...

truncated at total degree ``order``; the constant term ``A_0`` is the
noise-free estimate.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

RCOND = 1e-12

Monomial = tuple[int, ...]


class UnderdeterminedSystem(ValueError):
    """Fewer samples than polynomial terms."""


def _monomials_of_degree(m: int, k: int) -> list[Monomial]:
    if m == 1:
        return [(k,)]
    out = []
    for first in range(k, -1, -1):
        out.extend((first,) + rest for rest in _monomials_of_degree(m - 1, k - first))
    return out


def enumerate_monomials(m: int, order: int) -> list[Monomial]:
    """Exponent vectors of total degree <= ``order`` in ``m`` variables.

    Graded by degree; within a degree, descending lexicographic, so for
    ``m=2, order=2`` this gives (0,0),(1,0),(0,1),(2,0),(1,1),(0,2).
    """
    if m < 1 or order < 0:
        raise ValueError(f"need m >= 1 and order >= 0, got m={m}, order={order}")
    basis = []
    for k in range(order + 1):
        basis.extend(_monomials_of_degree(m, k))
    return basis


def degree_count(m: int, k: int) -> int:
    return comb(k + m - 1, m - 1)


def basis_size(m: int, order: int) -> int:
    return sum(degree_count(m, k) for k in range(order + 1))


@dataclass(frozen=True)
class RecoverySample:
    rates: tuple[float, ...]
    value: float

    def __post_init__(self):
        rates = tuple(float(r) for r in np.ravel(self.rates))
        if not rates or not all(np.isfinite(rates)) or not np.isfinite(self.value):
            raise ValueError("sample rates and value must be finite")
        if min(rates) < 0:
            raise ValueError("noise rates must be >= 0")
        object.__setattr__(self, "rates", rates)


def _exponents(basis: Sequence[Monomial]) -> np.ndarray:
    return np.array(basis, dtype=int).reshape(len(basis), -1)


def design_matrix(rates, basis: Sequence[Monomial], scale=None) -> np.ndarray:
    """Rows are samples, columns are monomials of the scaled rates."""
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    exps = _exponents(basis)
    if exps.shape[1] != rates.shape[1]:
        raise ValueError(f"basis has {exps.shape[1]} variables but rates have {rates.shape[1]}")
    scale = np.ones(rates.shape[1]) if scale is None else np.asarray(scale, dtype=float)
    if scale.shape != (rates.shape[1],) or np.any(scale <= 0):
        raise ValueError("scale must be one positive entry per rate dimension")
    z = rates / scale
    # integer powers keep 0**0 == 1 exact
    return np.prod(z[:, None, :] ** exps[None, :, :], axis=2)


@dataclass(frozen=True)
class HypersurfaceModel:
    order: int
    dim: int
    basis: tuple[Monomial, ...]
    coefficients: np.ndarray  # in the scaled basis
    scale: np.ndarray
    rank: int
    degenerate: bool = False

    def unscaled_coefficients(self) -> np.ndarray:
        return self.coefficients / np.prod(self.scale[None, :] ** _exponents(self.basis), axis=1)

    def extrapolate(self) -> float:
        return float(self.coefficients[0])

    def predict(self, rates) -> float | np.ndarray:
        rates = np.asarray(rates, dtype=float)
        single = rates.ndim == 1
        if rates.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} rates, got {rates.shape[-1]}")
        values = design_matrix(np.atleast_2d(rates), self.basis, self.scale) @ self.coefficients
        return float(values[0]) if single else values


def fit_scale(rates) -> np.ndarray:
    top = np.max(np.abs(np.atleast_2d(rates)), axis=0)
    return np.where(top > 0, top, 1.0)


def fit(rates, values, order: int) -> HypersurfaceModel:
    """Least-squares hypersurface of ``values`` against ``rates``.

    ``rates`` has one row per repetition.  Columns are scaled by their maximum
    before an SVD solve with relative cutoff ``RCOND``; directions below the
    cutoff get zero weight and the model is flagged ``degenerate``.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim == 1:
        rates = rates[:, None]
    values = np.asarray(values, dtype=float).ravel()
    if rates.shape[0] != values.size:
        raise ValueError(f"{rates.shape[0]} rate rows but {values.size} values")
    if not (np.all(np.isfinite(rates)) and np.all(np.isfinite(values))):
        raise ValueError("rates and values must be finite")
    m = rates.shape[1]
    basis = enumerate_monomials(m, order)
    if values.size < len(basis):
        raise UnderdeterminedSystem(
            f"order {order} in {m} rates needs {len(basis)} samples, got {values.size}")
    # canonical row order makes the solve independent of sample order
    perm = np.lexsort((values,) + tuple(rates.T[::-1]))
    rates, values = rates[perm], values[perm]
    scale = fit_scale(rates)
    a = design_matrix(rates, basis, scale)
    coef, _, rank, _ = np.linalg.lstsq(a, values, rcond=RCOND)
    scale.setflags(write=False)
    coef.setflags(write=False)
    return HypersurfaceModel(order, m, tuple(basis), coef, scale, int(rank),
                             degenerate=int(rank) < len(basis))


def fit_samples(samples: Sequence[RecoverySample], order: int) -> HypersurfaceModel:
    if not samples:
        raise UnderdeterminedSystem("no samples")
    widths = {len(s.rates) for s in samples}
    if len(widths) != 1:
        raise ValueError("samples have inconsistent rate dimensions")
    return fit([s.rates for s in samples], [s.value for s in samples], order)


def extrapolate(model: HypersurfaceModel) -> float:
    return model.extrapolate()


def predict(model: HypersurfaceModel, rates) -> float:
    return model.predict(rates)
