"""
Matrix fractions in the delay operator
=======================================

The package represents every transfer function as a left matrix fraction
denom(z^-1)^-1 numer(z^-1) with a monic denominator. This script walks
through the polynomial algebra, pole/zero cancellation, and stability
reporting that the rest of the toolkit builds on.
"""
# %%
# Polynomials are stacks of coefficient matrices in ascending powers of z^-1.
import numpy as np

from lowrankid import (
    MatrixPolynomial,
    poly_mul,
    one_step_division,
    scalar_fraction,
    rtm_mul,
    rtm_inverse,
    rtm_simplify,
    stability_report,
    frequency_response,
)

p = MatrixPolynomial([1.0, 0.5])          # 1 + 0.5 z^-1
q = MatrixPolynomial([1.0, -0.7, 0.1])    # 1 - 0.7 z^-1 + 0.1 z^-2
print("product coefficients:", poly_mul(p, q).scalar_coefficients())

# %%
# The one-step division c = a + z^-1 c1 extracts the predictor numerator
# used by the ARMAX machinery.
c = MatrixPolynomial([1.0, 0.2588, 0.4005, 0.4596])
a = MatrixPolynomial([1.0, 0.0009619, 0.04707, 0.02051])
print("one-step remainder:", one_step_division(c, a).scalar_coefficients())

# %%
# Fractions multiply through a common denominator and simplify themselves:
# here a shared cubic factor cancels, leaving a first-order channel.
h = scalar_fraction([1.0, 0.5], [1.0, 0.1])
w1 = scalar_fraction([1.0], [1.0, -0.2, -0.25, 0.05])
w2 = rtm_mul(h, w1)
print("h * w1 denominator:", w2.denom.scalar_coefficients())

big = scalar_fraction([1.0, -0.2, -0.25, 0.05], [1.0, -0.6, 0.03, 0.01])
small = rtm_simplify(big)
print("cancelled fraction:", small.numer.scalar_coefficients(),
      "/", small.denom.scalar_coefficients())

# %%
# Stability lives in the z plane: poles are reciprocals of the denominator
# roots in x = z^-1, and a strict margin separates stable from unstable.
rep = stability_report(w1)
print("poles:", np.round(rep.poles, 4))
print("stable:", rep.is_stable, " minimum phase:", rep.is_minimum_phase)
print("unstable example:", stability_report(scalar_fraction([1.0], [1.0, -2.0])).poles)

# %%
# Inverses swap the fraction members (requires an invertible feedthrough);
# the product with the original is the identity on the whole unit circle.
grid = np.pi * (np.arange(256) + 0.5) / 256
prod = rtm_mul(h, rtm_inverse(h))
err = np.abs(frequency_response(prod, grid) - 1.0).max()
print("max |h * h^-1 - 1| on the grid:", err)
