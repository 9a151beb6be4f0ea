"""Matrix-valued polynomials in the delay operator z^-1.

A polynomial P(z^-1) = P_0 + P_1 z^-1 + ... + P_d z^-d is stored as a
stack of real coefficient matrices indexed by ascending power of z^-1.
All operations return new objects; coefficient arrays are read-only.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "MatrixPolynomial",
    "poly_add",
    "poly_sub",
    "poly_mul",
    "poly_eval",
    "poly_eval_grid",
    "poly_shift",
    "poly_det",
    "poly_adjugate",
    "one_step_division",
]


def _as_coeff_stack(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1, 1)
    elif arr.ndim == 1:
        # scalar polynomial given as a flat coefficient list
        arr = arr.reshape(-1, 1, 1)
    elif arr.ndim != 3:
        raise ValueError(f"coefficients must have shape (d+1, rows, cols), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("coefficient list is empty")
    return arr


def _trim_exact(arr: np.ndarray) -> np.ndarray:
    """Strip trailing all-zero coefficient matrices, keeping at least one."""
    d = arr.shape[0] - 1
    while d > 0 and not arr[d].any():
        d -= 1
    return arr[: d + 1]


def _trim_relative(arr: np.ndarray, rtol: float) -> np.ndarray:
    scale = np.abs(arr).max()
    if scale == 0.0:
        return arr[:1]
    d = arr.shape[0] - 1
    while d > 0 and np.abs(arr[d]).max() <= rtol * scale:
        d -= 1
    out = arr[: d + 1].copy()
    return out


class MatrixPolynomial:
    """Real rows x cols polynomial in z^-1 with canonical (trimmed) degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        arr = _trim_exact(_as_coeff_stack(coeffs)).copy()
        if not np.isfinite(arr).all():
            raise ValueError("coefficients must be finite")
        arr.setflags(write=False)
        self.coeffs = arr

    @classmethod
    def identity(cls, n: int) -> "MatrixPolynomial":
        return cls(np.eye(n)[None, :, :])

    @classmethod
    def zero(cls, rows: int, cols: int) -> "MatrixPolynomial":
        return cls(np.zeros((1, rows, cols)))

    @classmethod
    def constant(cls, matrix) -> "MatrixPolynomial":
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(m[None, :, :])

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_zero(self) -> bool:
        return not self.coeffs.any()

    def constant_coefficient(self) -> np.ndarray:
        return self.coeffs[0]

    def is_monic(self, tol: float = 1e-12) -> bool:
        if not self.is_square:
            return False
        return np.abs(self.coeffs[0] - np.eye(self.rows)).max() <= tol

    def scalar_coefficients(self) -> np.ndarray:
        """1-D ascending coefficient vector; only valid for 1x1 polynomials."""
        if self.shape != (1, 1):
            raise ValueError(f"not a scalar polynomial: shape {self.shape}")
        return self.coeffs[:, 0, 0]

    def __add__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        return poly_add(self, other)

    def __sub__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        return poly_sub(self, other)

    def __mul__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        return poly_mul(self, other)

    def __neg__(self) -> "MatrixPolynomial":
        return MatrixPolynomial(-self.coeffs)

    def __repr__(self) -> str:
        return f"MatrixPolynomial(shape={self.shape}, degree={self.degree})"


def _pad(arr: np.ndarray, n_coeffs: int) -> np.ndarray:
    if arr.shape[0] >= n_coeffs:
        return arr
    pad = np.zeros((n_coeffs - arr.shape[0],) + arr.shape[1:])
    return np.concatenate([arr, pad], axis=0)


def poly_add(p: MatrixPolynomial, q: MatrixPolynomial) -> MatrixPolynomial:
    """Coefficient-wise sum of two polynomials of matching shape."""
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    n = max(p.degree, q.degree) + 1
    return MatrixPolynomial(_pad(p.coeffs, n) + _pad(q.coeffs, n))


def poly_sub(p: MatrixPolynomial, q: MatrixPolynomial) -> MatrixPolynomial:
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    n = max(p.degree, q.degree) + 1
    return MatrixPolynomial(_pad(p.coeffs, n) - _pad(q.coeffs, n))


def poly_mul(p: MatrixPolynomial, q: MatrixPolynomial) -> MatrixPolynomial:
    """Product polynomial via coefficient convolution.

    The inner dimensions must match; the result has degree at most
    deg p + deg q (less after canonical trimming).
    """
    if p.cols != q.rows:
        raise ValueError(f"inner dimensions mismatch: {p.shape} x {q.shape}")
    out = np.zeros((p.degree + q.degree + 1, p.rows, q.cols))
    for i in range(p.degree + 1):
        out[i : i + q.degree + 1] += p.coeffs[i] @ q.coeffs
    return MatrixPolynomial(out)


def poly_scale(p: MatrixPolynomial, s: MatrixPolynomial) -> MatrixPolynomial:
    """Multiply by a scalar (1x1) polynomial on the left."""
    sc = s.scalar_coefficients()
    out = np.zeros((p.degree + s.degree + 1, p.rows, p.cols))
    for i, c in enumerate(sc):
        out[i : i + p.degree + 1] += c * p.coeffs
    return MatrixPolynomial(out)


def poly_shift(p: MatrixPolynomial, k: int = 1) -> MatrixPolynomial:
    """Multiply by z^-k (prepend k zero coefficient matrices)."""
    if k < 0:
        raise ValueError("shift must be nonnegative")
    if p.is_zero or k == 0:
        return MatrixPolynomial(p.coeffs)
    pad = np.zeros((k, p.rows, p.cols))
    return MatrixPolynomial(np.concatenate([pad, p.coeffs], axis=0))


def poly_eval(p: MatrixPolynomial, z_inv: complex) -> np.ndarray:
    """Evaluate sum_k P_k * z_inv**k by Horner's rule."""
    res = p.coeffs[-1].astype(complex)
    for k in range(p.degree - 1, -1, -1):
        res = res * z_inv + p.coeffs[k]
    return res


def poly_eval_grid(p: MatrixPolynomial, z_inv: np.ndarray) -> np.ndarray:
    """Vectorized evaluation at many points; returns (n, rows, cols) complex."""
    z = np.asarray(z_inv, dtype=complex).ravel()
    powers = z[:, None] ** np.arange(p.degree + 1)[None, :]
    return np.einsum("nk,kij->nij", powers, p.coeffs)


def poly_det(p: MatrixPolynomial, rtol: float = 1e-12) -> MatrixPolynomial:
    """Determinant of a square matrix polynomial, as a 1x1 polynomial.

    Computed by evaluation at roots of unity followed by inverse FFT;
    near-zero trailing coefficients below rtol (relative) are trimmed.
    """
    if not p.is_square:
        raise ValueError(f"determinant requires a square polynomial, got {p.shape}")
    k = p.rows
    if k == 1:
        return MatrixPolynomial(p.coeffs)
    npts = k * p.degree + 1
    x = np.exp(-2j * np.pi * np.arange(npts) / npts)
    dets = np.linalg.det(poly_eval_grid(p, x))
    coeffs = np.fft.ifft(dets).real
    return MatrixPolynomial(_trim_relative(coeffs.reshape(-1, 1, 1), rtol))


def poly_adjugate(p: MatrixPolynomial, rtol: float = 1e-12) -> MatrixPolynomial:
    """Adjugate polynomial: p * adj(p) = det(p) * I."""
    if not p.is_square:
        raise ValueError(f"adjugate requires a square polynomial, got {p.shape}")
    k = p.rows
    if k == 1:
        return MatrixPolynomial.identity(1)
    npts = max((k - 1) * p.degree, 0) + 1
    x = np.exp(-2j * np.pi * np.arange(npts) / npts)
    vals = poly_eval_grid(p, x)
    adj = np.empty_like(vals)
    idx = np.arange(k)
    for i in range(k):
        for j in range(k):
            minor = vals[:, idx[idx != j], :][:, :, idx[idx != i]]
            adj[:, i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    coeffs = np.fft.ifft(adj, axis=0).real
    return MatrixPolynomial(_trim_relative(coeffs, rtol))


def one_step_division(c: MatrixPolynomial, a: MatrixPolynomial, tol: float = 1e-12) -> MatrixPolynomial:
    """Remainder of the one-step division c = a + z^-1 * result.

    Both polynomials must be square, of the same shape, and monic; the
    k-th result coefficient is c_{k+1} - a_{k+1} (missing terms are zero),
    so a + shift(result) reconstructs c exactly.
    """
    if c.shape != a.shape or not c.is_square:
        raise ValueError(f"operands must be square with equal shape: {c.shape} vs {a.shape}")
    if not c.is_monic(tol) or not a.is_monic(tol):
        raise ValueError("one-step division requires monic operands with equal constant coefficient")
    n = max(c.degree, a.degree) + 1
    diff = _pad(c.coeffs, n) - _pad(a.coeffs, n)
    if n == 1:
        return MatrixPolynomial.zero(c.rows, c.cols)
    return MatrixPolynomial(diff[1:])
