"""Rational transfer matrices as left matrix fractions denom(z^-1)^-1 numer(z^-1).

The denominator is square and kept monic (constant coefficient = identity),
so the induced recursion denom * y = numer * x is always well posed and
causal. Products, sums and inverses use the scalar determinant/adjugate of
the denominator to build a common left fraction, which is adequate for the
small matrix sizes and degrees this package targets.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .polymat import (
    MatrixPolynomial,
    poly_add,
    poly_adjugate,
    poly_det,
    poly_eval_grid,
    poly_mul,
    poly_scale,
    poly_sub,
)

__all__ = [
    "RationalTransferMatrix",
    "ImproperInverseError",
    "StabilityReport",
    "rtm_mul",
    "rtm_add",
    "rtm_sub",
    "rtm_inverse",
    "rtm_simplify",
    "rtm_identity",
    "rtm_from_poly",
    "rtm_vstack",
    "rtm_block_diag",
    "scalar_fraction",
    "frequency_response",
    "stability_report",
]

CANCEL_TOL = 1e-6
STABILITY_TOL = 1e-9
_GUARD_POINTS = 64
_GUARD_RTOL = 1e-10


class ImproperInverseError(ValueError):
    """The requested inverse is not causal (constant coefficient singular)."""


class RationalTransferMatrix:
    """G(z) = denom(z^-1)^-1 numer(z^-1) with monic denominator."""

    __slots__ = ("denom", "numer")

    def __init__(self, denom, numer):
        denom = denom if isinstance(denom, MatrixPolynomial) else MatrixPolynomial(denom)
        numer = numer if isinstance(numer, MatrixPolynomial) else MatrixPolynomial(numer)
        if not denom.is_square:
            raise ValueError(f"denominator must be square, got {denom.shape}")
        if numer.rows != denom.rows:
            raise ValueError(
                f"numerator rows {numer.rows} do not match denominator size {denom.rows}"
            )
        d0 = denom.constant_coefficient()
        if abs(np.linalg.det(d0)) < 1e-300:
            raise ValueError("denominator constant coefficient is singular")
        if not denom.is_monic():
            d0_inv = np.linalg.inv(d0)
            denom = MatrixPolynomial(np.einsum("ab,kbc->kac", d0_inv, denom.coeffs))
            numer = MatrixPolynomial(np.einsum("ab,kbc->kac", d0_inv, numer.coeffs))
        self.denom = denom
        self.numer = numer

    @classmethod
    def identity(cls, n: int) -> "RationalTransferMatrix":
        return cls(MatrixPolynomial.identity(n), MatrixPolynomial.identity(n))

    @classmethod
    def zero(cls, rows: int, cols: int) -> "RationalTransferMatrix":
        return cls(MatrixPolynomial.identity(rows), MatrixPolynomial.zero(rows, cols))

    @property
    def out_dim(self) -> int:
        return self.denom.rows

    @property
    def in_dim(self) -> int:
        return self.numer.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.out_dim, self.in_dim)

    @property
    def is_scalar(self) -> bool:
        return self.shape == (1, 1)

    def gain_at_infinity(self) -> np.ndarray:
        """G at z = infinity (z^-1 = 0); equals the numerator constant term."""
        return self.numer.constant_coefficient()

    def __matmul__(self, other: "RationalTransferMatrix") -> "RationalTransferMatrix":
        return rtm_mul(self, other)

    def __repr__(self) -> str:
        return (
            f"RationalTransferMatrix({self.out_dim}x{self.in_dim}, "
            f"denom degree {self.denom.degree}, numer degree {self.numer.degree})"
        )


def rtm_identity(n: int) -> RationalTransferMatrix:
    return RationalTransferMatrix.identity(n)


def rtm_from_poly(p: MatrixPolynomial) -> RationalTransferMatrix:
    """Polynomial transfer (identity denominator)."""
    return RationalTransferMatrix(MatrixPolynomial.identity(p.rows), p)


def scalar_fraction(numer, denom) -> RationalTransferMatrix:
    """1x1 transfer from ascending coefficient lists numer/denom."""
    return RationalTransferMatrix(MatrixPolynomial(denom), MatrixPolynomial(numer))


def frequency_response(g: RationalTransferMatrix, freqs: np.ndarray) -> np.ndarray:
    """Evaluate G(e^{i theta}) on a grid; returns (n, out, in) complex values."""
    x = np.exp(-1j * np.asarray(freqs, dtype=float).ravel())
    den = poly_eval_grid(g.denom, x)
    num = poly_eval_grid(g.numer, x)
    return np.linalg.solve(den, num)


def rtm_mul(
    g1: RationalTransferMatrix, g2: RationalTransferMatrix, tol: float = CANCEL_TOL
) -> RationalTransferMatrix:
    """Product of two fractions, simplified.

    Uses A1^-1 B1 A2^-1 B2 = (det(A2) A1)^-1 (B1 adj(A2) B2); the scalar
    determinant commutes with everything, so the result is a valid left
    fraction whatever the matrix sizes.
    """
    if g1.in_dim != g2.out_dim:
        raise ValueError(f"dimension mismatch: {g1.shape} times {g2.shape}")
    if g1.numer.is_zero or g2.numer.is_zero:
        return RationalTransferMatrix.zero(g1.out_dim, g2.in_dim)
    det2 = poly_det(g2.denom)
    adj2 = poly_adjugate(g2.denom)
    denom = poly_scale(g1.denom, det2)
    numer = poly_mul(poly_mul(g1.numer, adj2), g2.numer)
    return rtm_simplify(RationalTransferMatrix(denom, numer), tol)


def rtm_add(
    g1: RationalTransferMatrix, g2: RationalTransferMatrix, tol: float = CANCEL_TOL
) -> RationalTransferMatrix:
    """Sum over the common left denominator det(A2) A1."""
    if g1.shape != g2.shape:
        raise ValueError(f"shape mismatch: {g1.shape} vs {g2.shape}")
    det2 = poly_det(g2.denom)
    adj2 = poly_adjugate(g2.denom)
    denom = poly_scale(g1.denom, det2)
    numer = poly_add(
        poly_scale(g1.numer, det2),
        poly_mul(poly_mul(g1.denom, adj2), g2.numer),
    )
    return rtm_simplify(RationalTransferMatrix(denom, numer), tol)


def rtm_sub(
    g1: RationalTransferMatrix, g2: RationalTransferMatrix, tol: float = CANCEL_TOL
) -> RationalTransferMatrix:
    det2 = poly_det(g2.denom)
    adj2 = poly_adjugate(g2.denom)
    if g1.shape != g2.shape:
        raise ValueError(f"shape mismatch: {g1.shape} vs {g2.shape}")
    denom = poly_scale(g1.denom, det2)
    numer = poly_sub(
        poly_scale(g1.numer, det2),
        poly_mul(poly_mul(g1.denom, adj2), g2.numer),
    )
    return rtm_simplify(RationalTransferMatrix(denom, numer), tol)


def rtm_inverse(g: RationalTransferMatrix) -> RationalTransferMatrix:
    """Causal inverse: (A^-1 B)^-1 = B^-1 A, requiring B(0) invertible."""
    if g.out_dim != g.in_dim:
        raise ValueError(f"inverse requires a square transfer, got {g.shape}")
    n0 = g.numer.constant_coefficient()
    sv = np.linalg.svd(n0, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise ImproperInverseError(
            "numerator constant coefficient is singular; the inverse is not causal"
        )
    return RationalTransferMatrix(g.numer, g.denom)


# -- simplification -----------------------------------------------------------


def _poly_roots(coeffs_ascending: np.ndarray) -> np.ndarray:
    """Roots via the companion matrix, after stripping negligible leading terms."""
    c = np.asarray(coeffs_ascending, dtype=float)
    scale = np.abs(c).max()
    if scale == 0.0:
        return np.array([], dtype=complex)
    d = len(c) - 1
    while d > 0 and abs(c[d]) <= 1e-12 * scale:
        d -= 1
    if d == 0:
        return np.array([], dtype=complex)
    return np.roots(c[d::-1])


def _poly_from_roots(roots: np.ndarray, lead: float) -> np.ndarray:
    """Ascending real coefficients of lead * prod (x - r), imaginary parts discarded."""
    c = lead * np.atleast_1d(np.poly(roots))
    return np.real(c[::-1])


def _match_root_pairs(rn: np.ndarray, rd: np.ndarray, tol: float):
    """Greedy pairing of nearly equal roots; returns index pairs."""
    pairs = []
    used = np.zeros(len(rd), dtype=bool)
    for i, r in enumerate(rn):
        if len(rd) == 0:
            break
        dist = np.abs(rd - r)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if dist[j] < tol * max(1.0, abs(rd[j])):
            pairs.append((i, j))
            used[j] = True
    return pairs


def _response_probe(g: RationalTransferMatrix) -> np.ndarray:
    theta = np.pi * (np.arange(_GUARD_POINTS) + 0.5) / _GUARD_POINTS
    return frequency_response(g, theta)


def _simplify_scalar(g: RationalTransferMatrix, tol: float) -> RationalTransferMatrix:
    num = g.numer.scalar_coefficients()
    den = g.denom.scalar_coefficients()
    rn = _poly_roots(num)
    rd = _poly_roots(den)
    if len(rn) == 0 or len(rd) == 0:
        return g
    pairs = _match_root_pairs(rn, rd, tol)
    if not pairs:
        return g
    keep_n = np.ones(len(rn), dtype=bool)
    keep_d = np.ones(len(rd), dtype=bool)
    for i, j in pairs:
        keep_n[i] = False
        keep_d[j] = False
    # index len(roots) is the effective leading coefficient of each polynomial
    new_num = _poly_from_roots(rn[keep_n], num[len(rn)])
    new_den = _poly_from_roots(rd[keep_d], den[len(rd)])
    if abs(new_den[0]) < 1e-300:
        return g
    return RationalTransferMatrix(new_den, new_num)


def _deflate_entry(coeffs: np.ndarray, factor_desc: np.ndarray, rtol: float):
    """Divide an ascending-coefficient entry by a descending monic factor."""
    scale = np.abs(coeffs).max()
    if scale == 0.0:
        return coeffs[:1], True
    if len(coeffs) < len(factor_desc):
        return None, False
    q, r = np.polydiv(coeffs[::-1], factor_desc)
    if np.abs(r).max() > rtol * scale:
        return None, False
    return np.atleast_1d(q)[::-1], True


def _reference_entry_roots(p: MatrixPolynomial) -> np.ndarray:
    """Roots of the first nonzero entry; a common scalar factor divides it."""
    for a, b in np.ndindex(p.rows, p.cols):
        entry = p.coeffs[:, a, b]
        if entry.any():
            return _poly_roots(entry)
    return np.array([], dtype=complex)


def _simplify_matrix(g: RationalTransferMatrix, tol: float) -> RationalTransferMatrix:
    """Cancel scalar polynomial factors common to every numerator and denominator entry."""
    den = g.denom
    num = g.numer
    candidates = _reference_entry_roots(den)
    changed = False
    i = 0
    processed: list[complex] = []
    while i < len(candidates):
        r = candidates[i]
        i += 1
        if any(abs(r - p) < 1e-9 for p in processed):
            continue
        if abs(r.imag) < 1e-12:
            factor = np.array([1.0, -r.real])
            processed.append(r)
        else:
            factor = np.array([1.0, -2.0 * r.real, abs(r) ** 2])
            processed.extend([r, r.conjugate()])
        new_den = np.zeros((max(den.degree + 2 - len(factor), 1), den.rows, den.cols))
        new_num = np.zeros((max(num.degree + 2 - len(factor), 1), num.rows, num.cols))
        ok = True
        for a, b in np.ndindex(den.rows, den.cols):
            q, good = _deflate_entry(den.coeffs[:, a, b], factor, 1e-7)
            if not good:
                ok = False
                break
            new_den[: len(q), a, b] = q
        if ok:
            for a, b in np.ndindex(num.rows, num.cols):
                q, good = _deflate_entry(num.coeffs[:, a, b], factor, 1e-7)
                if not good:
                    ok = False
                    break
                new_num[: len(q), a, b] = q
        if ok and abs(np.linalg.det(new_den[0])) > 1e-12:
            den = MatrixPolynomial(new_den)
            num = MatrixPolynomial(new_num)
            changed = True
            candidates = _reference_entry_roots(den)
            processed = []
            i = 0
    if not changed:
        return g
    return RationalTransferMatrix(den, num)


def rtm_simplify(g: RationalTransferMatrix, tol: float = CANCEL_TOL) -> RationalTransferMatrix:
    """Cancel common factors between numerator and denominator.

    Scalar fractions cancel root pairs closer than tol (relative); matrix
    fractions cancel scalar factors dividing every entry exactly. Any
    cancellation that would move the frequency response by more than a
    guard tolerance on a probe grid is rejected, so simplification always
    preserves the response.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if g.numer.is_zero:
        return RationalTransferMatrix.zero(g.out_dim, g.in_dim)
    simplified = _simplify_scalar(g, tol) if g.is_scalar else _simplify_matrix(g, tol)
    if simplified is g:
        return g
    ref = _response_probe(g)
    new = _response_probe(simplified)
    scale = max(np.abs(ref).max(), 1.0)
    if np.abs(new - ref).max() > _GUARD_RTOL * scale:
        return g
    return simplified


def rtm_vstack(blocks: list[RationalTransferMatrix]) -> RationalTransferMatrix:
    """Stack fractions that share an input into one tall fraction."""
    if not blocks:
        raise ValueError("no blocks to stack")
    in_dim = blocks[0].in_dim
    if any(b.in_dim != in_dim for b in blocks):
        raise ValueError("all blocks must share the input dimension")
    rows = sum(b.out_dim for b in blocks)
    dmax = max(b.denom.degree for b in blocks)
    nmax = max(b.numer.degree for b in blocks)
    den = np.zeros((dmax + 1, rows, rows))
    num = np.zeros((nmax + 1, rows, in_dim))
    at = 0
    for b in blocks:
        r = b.out_dim
        den[: b.denom.degree + 1, at : at + r, at : at + r] = b.denom.coeffs
        num[: b.numer.degree + 1, at : at + r, :] = b.numer.coeffs
        at += r
    return RationalTransferMatrix(den, num)


def rtm_block_diag(blocks: list[RationalTransferMatrix]) -> RationalTransferMatrix:
    """Block-diagonal combination of fractions."""
    if not blocks:
        raise ValueError("no blocks to combine")
    rows = sum(b.out_dim for b in blocks)
    cols = sum(b.in_dim for b in blocks)
    dmax = max(b.denom.degree for b in blocks)
    nmax = max(b.numer.degree for b in blocks)
    den = np.zeros((dmax + 1, rows, rows))
    num = np.zeros((nmax + 1, rows, cols))
    r0 = c0 = 0
    for b in blocks:
        r, c = b.out_dim, b.in_dim
        den[: b.denom.degree + 1, r0 : r0 + r, r0 : r0 + r] = b.denom.coeffs
        num[: b.numer.degree + 1, r0 : r0 + r, c0 : c0 + c] = b.numer.coeffs
        r0 += r
        c0 += c
    return RationalTransferMatrix(den, num)


# -- stability ----------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    """Pole/zero placement summary for a transfer matrix.

    Poles live in the z plane (z = 1/x for each root x of det denom(x),
    x = z^-1); the transfer is stable when every pole modulus is below
    1 - stability_tol. Minimum phase is reported only when transmission
    zeros are well defined (square or column-of-scalars numerators).
    """

    poles: np.ndarray
    is_stable: bool
    is_minimum_phase: bool | None
    margin: float


def _x_roots_to_z(roots: np.ndarray) -> np.ndarray:
    z = np.empty(len(roots), dtype=complex)
    small = np.abs(roots) < 1e-12
    z[small] = np.inf
    z[~small] = 1.0 / roots[~small]
    return z


def _numerator_zeros(numer: MatrixPolynomial) -> np.ndarray | None:
    if numer.rows == numer.cols:
        det = poly_det(numer)
        return _x_roots_to_z(_poly_roots(det.scalar_coefficients()))
    if numer.cols == 1:
        # column of scalar channels: minimum phase channel by channel
        zeros = []
        for i in range(numer.rows):
            entry = numer.coeffs[:, i, 0]
            if not entry.any():
                continue
            zeros.append(_x_roots_to_z(_poly_roots(entry)))
        return np.concatenate(zeros) if zeros else np.array([], dtype=complex)
    return None


def stability_report(
    g: RationalTransferMatrix, stability_tol: float = STABILITY_TOL
) -> StabilityReport:
    """Poles of det(denom), stability and minimum-phase flags."""
    if not 0 < stability_tol < 0.1:
        raise ValueError("stability_tol must lie in (0, 0.1)")
    det = poly_det(g.denom)
    if det.is_zero:
        raise ValueError("degenerate denominator: det is identically zero")
    poles = _x_roots_to_z(_poly_roots(det.scalar_coefficients()))
    is_stable = bool(np.all(np.abs(poles) < 1.0 - stability_tol)) if len(poles) else True
    zeros = _numerator_zeros(g.numer)
    if zeros is None:
        is_min_phase = None
    elif len(zeros) == 0:
        is_min_phase = True
    else:
        is_min_phase = bool(np.all(np.abs(zeros) < 1.0))
    margin = float(np.min(np.abs(1.0 - np.abs(poles)))) if len(poles) else np.inf
    return StabilityReport(poles=poles, is_stable=is_stable, is_minimum_phase=is_min_phase, margin=margin)


def warn_if_unstable(g: RationalTransferMatrix, what: str) -> None:
    rep = stability_report(g)
    if not rep.is_stable:
        warnings.warn(f"{what} is not strictly stable (pole margin {rep.margin:.3g})", RuntimeWarning)
