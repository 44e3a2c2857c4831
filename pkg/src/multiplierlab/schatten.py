"""Schatten p-norms, trace pairings and Hadamard products on dense matrices.

Matrices are plain complex numpy arrays; :func:`as_matrix` validates them.
Exponents are :class:`PNorm` values so that ``p = inf`` is an explicit tag
and conjugates of rational exponents are exact.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any

import numpy as np

ABS_TOL = 1e-12
REL_TOL = 1e-10


class MatrixError(ValueError):
    pass


class PNorm:
    """An exponent p in [1, inf] together with its conjugate q.

    Finite exponents are stored as :class:`fractions.Fraction`, so that
    ``PNorm("4/3").conjugate == PNorm(4)`` holds exactly.
    """

    __slots__ = ("value",)

    def __init__(self, p: Any):
        if isinstance(p, PNorm):
            value = p.value
        elif isinstance(p, str):
            s = p.strip().lower()
            if s in ("inf", "infinity", "oo", "∞"):
                value = math.inf
            else:
                try:
                    value = Fraction(s)
                except (ValueError, ZeroDivisionError) as exc:
                    raise ValueError(f"cannot parse exponent {p!r}") from exc
        elif isinstance(p, float) and math.isinf(p):
            value = math.inf
        elif isinstance(p, float):
            value = Fraction(p).limit_denominator(10**6)
        else:
            value = Fraction(p)
        if value != math.inf and value < 1:
            raise ValueError(f"exponent must lie in [1, inf], got {p!r}")
        self.value = value

    @property
    def is_inf(self) -> bool:
        return self.value == math.inf

    @property
    def conjugate(self) -> "PNorm":
        if self.is_inf:
            return PNorm(1)
        if self.value == 1:
            return PNorm(math.inf)
        return PNorm(self.value / (self.value - 1))

    @property
    def inverse(self) -> Fraction:
        """1/p as an exact fraction (0 for p = inf)."""
        return Fraction(0) if self.is_inf else 1 / self.value

    def is_even_integer(self) -> bool:
        return not self.is_inf and self.value.denominator == 1 and self.value.numerator % 2 == 0

    def __float__(self) -> float:
        return math.inf if self.is_inf else float(self.value)

    def __eq__(self, other: object) -> bool:
        try:
            return self.value == PNorm(other).value
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def __repr__(self) -> str:
        return f"PNorm({self})"

    def __str__(self) -> str:
        return "inf" if self.is_inf else str(self.value)


def as_pnorm(p: Any) -> PNorm:
    return p if isinstance(p, PNorm) else PNorm(p)


def as_matrix(a: Any) -> np.ndarray:
    """Return ``a`` as a 2-d complex array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or 0 in m.shape:
        raise MatrixError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixError("matrix has non-finite entries")
    return m


def singular_values(a: np.ndarray) -> np.ndarray:
    return np.linalg.svd(a, compute_uv=False)


def _norm_from_sv(s: np.ndarray, p: float) -> np.ndarray:
    """Schatten norm from singular values along the last axis (batched)."""
    top = s.max(axis=-1) if s.shape[-1] else np.zeros(s.shape[:-1])
    if math.isinf(p):
        return top
    safe = np.where(top > 0, top, 1.0)
    scaled = s / safe[..., None]
    return np.where(top > 0, safe * np.sum(scaled**p, axis=-1) ** (1.0 / p), 0.0)


def schatten_norm(a: Any, p: Any) -> float:
    """Schatten p-norm computed from singular values."""
    pn = as_pnorm(p)
    return float(_norm_from_sv(singular_values(as_matrix(a)), float(pn)))


def schatten_norm_batch(a: np.ndarray, p: float) -> np.ndarray:
    """Schatten p-norms of a stack of matrices (last two axes)."""
    return _norm_from_sv(np.linalg.svd(a, compute_uv=False), p)


def schatten_norm_trace(a: Any, p: Any) -> float:
    """Even-p route: ``Tr((A*A)^(p/2))^(1/p)`` via repeated products."""
    pn = as_pnorm(p)
    if not pn.is_even_integer():
        raise ValueError("trace route needs an even integer exponent")
    m = as_matrix(a)
    h = m.conj().T @ m
    scale = np.trace(h).real
    if scale == 0:
        return 0.0
    h = h / scale
    k = int(pn.value) // 2
    power = np.linalg.matrix_power(h, k)
    return float(np.trace(power).real ** (1.0 / float(pn.value)) * math.sqrt(scale))


def norms_close(a: float, b: float, rel: float = REL_TOL, abs_tol: float = ABS_TOL) -> bool:
    """Tolerance policy: absolute below order-one magnitudes, relative above."""
    return abs(a - b) <= max(abs_tol, rel * max(abs(a), abs(b)))


def trace_pairing(a: Any, b: Any) -> complex:
    """``sum_{s,t} A[s,t] B[t,s]``, i.e. ``Tr(AB)`` without forming the product."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.T.shape:
        raise MatrixError(f"trace pairing needs shapes (m,n) and (n,m), got {a.shape} and {b.shape}")
    return complex(np.sum(a * b.T))


def schur_product(s: Any, a: Any) -> np.ndarray:
    s = as_matrix(s)
    a = as_matrix(a)
    if s.shape != a.shape:
        raise MatrixError(f"Schur product needs equal shapes, got {s.shape} and {a.shape}")
    return s * a


def norming_dual(a: np.ndarray, p: Any) -> np.ndarray:
    """A unit vector B of S_q with ``Tr(AB) = ||A||_p``.

    For ``1 < p < inf`` this is ``V diag(sigma^(p-1)) U^*`` rescaled.  For
    ``p = inf`` the top singular pair is used (``v_1 u_1^*``), and for
    ``p = 1`` the partial isometry ``V U^*`` on the support of A.  Works on
    stacks of matrices.  Zero input gives zero output.
    """
    pf = float(as_pnorm(p))
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    top = s[..., :1]
    safe = np.where(top > 0, top, 1.0)
    if math.isinf(pf):
        w = np.zeros_like(s)
        w[..., 0] = 1.0
    elif pf == 1:
        w = (s > 1e-13 * safe).astype(float)
    else:
        r = s / safe
        nrm = np.sum(r**pf, axis=-1, keepdims=True) ** (1.0 / pf)
        w = (r / nrm) ** (pf - 1)
    w = np.where(top > 0, w, 0.0)
    return np.einsum("...ji,...j,...kj->...ik", vh.conj(), w, u.conj())


def holder_gap(a: Any, b: Any, p: Any) -> float:
    """``||A||_p ||B||_q - |Tr(AB)|``; nonnegative up to rounding by Holder."""
    pn = as_pnorm(p)
    pairing = trace_pairing(a, b)
    return schatten_norm(a, pn) * schatten_norm(b, pn.conjugate) - abs(pairing)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def matrix_to_json(a: Any) -> dict:
    """``{"shape": [r, c], "entries": [re, im, re, im, ...]}`` in row-major order."""
    m = np.asarray(a, dtype=complex)
    flat = np.empty(2 * m.size)
    flat[0::2] = m.real.ravel()
    flat[1::2] = m.imag.ravel()
    return {"shape": list(m.shape), "entries": [float(v) for v in flat]}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        shape = tuple(int(v) for v in obj["shape"])
        flat = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MatrixError(f"malformed matrix JSON: {exc}") from exc
    if flat.size != 2 * int(np.prod(shape)):
        raise MatrixError(f"matrix JSON has {flat.size} numbers, expected {2 * int(np.prod(shape))}")
    m = (flat[0::2] + 1j * flat[1::2]).reshape(shape)
    if not np.all(np.isfinite(m)):
        raise MatrixError("matrix JSON has non-finite entries")
    return m
