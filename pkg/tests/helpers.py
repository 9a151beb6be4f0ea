"""Shared fixtures-by-hand: reference systems and random stable transfer generators."""
import numpy as np

from lowrankid.polymat import MatrixPolynomial
from lowrankid.transfer import RationalTransferMatrix, scalar_fraction

# Two-channel rank-1 reference system: a pair of stable all-pole spectral
# factor channels whose ratio is the deterministic channel NUM_H/DEN_H.
W1_DEN = [1.0, -0.2, -0.25, 0.05]
W2_DEN = [1.0, -0.6, 0.03, 0.01]
H_NUM = [1.0, 0.5]
H_DEN = [1.0, 0.1]


def w1():
    return scalar_fraction([1.0], W1_DEN)


def w2():
    return scalar_fraction([1.0], W2_DEN)


def h_true():
    return scalar_fraction(H_NUM, H_DEN)


def h_swapped():
    return scalar_fraction(H_DEN, H_NUM)


def stacked_factor():
    from lowrankid.transfer import rtm_vstack

    return rtm_vstack([w1(), w2()])


# Exogenous-input reference systems: a delayed FIR input path per channel and
# normalized minimum-phase noise shaping channels (shared scalar innovation).
INPUT_SYSTEM_A = {
    "f_num": [[0.0, 0.3, 0.7, 0.3], [0.0, 0.15, 0.9, -0.5]],
    "k_num": [[1.0, 0.1, 0.4], [1.0, -0.1, 0.4]],
    "k_den": [[1.0, 0.3, 0.4], [1.0, -0.2, 0.1]],
    "u_var": 2.0,
    "e_var": 1.0,
}
INPUT_SYSTEM_B = {
    "f_num": [[0.0, 1.0, 0.3, -0.1], [0.0, 2.0, -0.9, 0.06]],
    "k_num": [[1.0, -0.9, 0.2], [1.0, -0.1, 0.4]],
    "k_den": [[1.0, 0.3, 0.4], [1.0, -0.6, 0.1]],
    "u_var": 2.0,
    "e_var": 1.0,
}


def input_system(spec: dict):
    from lowrankid.transfer import rtm_vstack

    f = rtm_vstack([scalar_fraction(num, [1.0]) for num in spec["f_num"]])
    k = rtm_vstack(
        [scalar_fraction(n, d) for n, d in zip(spec["k_num"], spec["k_den"])]
    )
    return f, k


def simulate_input_system(spec: dict, length: int, seed: int):
    from lowrankid.timeseries import NoiseSpec, generate_white_noise, simulate_with_input
    from lowrankid.timeseries import INPUT_STREAM_OFFSET

    f, k = input_system(spec)
    u = generate_white_noise(NoiseSpec(1, (spec["u_var"],), seed=seed + INPUT_STREAM_OFFSET), length)
    y = simulate_with_input(f, k, u, NoiseSpec(1, (spec["e_var"],), seed=seed))
    return y, u, f, k


def poly_from_zplane_roots(zroots) -> np.ndarray:
    """Ascending x-coefficients of prod (1 - z_i x); constant term 1."""
    c = np.array([1.0])
    for z in np.atleast_1d(zroots):
        c = np.convolve(c, [1.0, -z])
    return np.real(c)


def random_stable_scalar(rng, degree=3, numer_degree=None, min_phase=False, radius=0.85):
    """Random stable 1x1 fraction; zeros inside the disc when min_phase."""
    nd = degree if numer_degree is None else numer_degree
    poles = _random_conjugate_set(rng, degree, radius)
    den = poly_from_zplane_roots(poles)
    if min_phase:
        zeros = _random_conjugate_set(rng, nd, radius)
        num = poly_from_zplane_roots(zeros)
    else:
        num = np.concatenate([[1.0], rng.uniform(-0.8, 0.8, size=nd)])
    return scalar_fraction(num, den)


def _random_conjugate_set(rng, n, radius):
    roots = []
    while len(roots) < n:
        if n - len(roots) >= 2 and rng.random() < 0.5:
            r = rng.uniform(0.1, radius)
            th = rng.uniform(0.1, np.pi - 0.1)
            roots.extend([r * np.exp(1j * th), r * np.exp(-1j * th)])
        else:
            roots.append(rng.uniform(-radius, radius))
    return np.array(roots[:n])


def random_stable_matrix(rng, n=2, degree=2, radius=0.8):
    """Random stable n x n fraction built from factors I - R_k x with rho(R_k) < radius."""
    den = np.eye(n)[None, :, :]
    for _ in range(degree):
        r = rng.normal(size=(n, n))
        r *= radius * rng.uniform(0.2, 1.0) / max(np.abs(np.linalg.eigvals(r)).max(), 1e-9)
        den = _convolve_matrix(den, np.concatenate([np.eye(n)[None], -r[None]]))
    num = rng.normal(size=(degree + 1, n, n)) * 0.5
    num[0] += np.eye(n)
    return RationalTransferMatrix(MatrixPolynomial(den), MatrixPolynomial(num))


def _convolve_matrix(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1], b.shape[2]))
    for i in range(a.shape[0]):
        out[i : i + b.shape[0]] += a[i] @ b
    return out


def random_delayed_stable(rng, degree=2, radius=0.7, n=1):
    """Random stable fraction with at least a unit input delay."""
    if n == 1:
        g = random_stable_scalar(rng, degree=degree, radius=radius)
        num = np.concatenate([[0.0], rng.uniform(-0.6, 0.6, size=degree)])
        return scalar_fraction(num, g.denom.scalar_coefficients())
    g = random_stable_matrix(rng, n=n, degree=degree, radius=radius)
    num = g.numer.coeffs.copy()
    num[0] = 0.0
    if num.shape[0] == 1:
        num = np.concatenate([num, 0.3 * rng.normal(size=(1, n, n))])
    return RationalTransferMatrix(g.denom, MatrixPolynomial(num))
