#!/usr/bin/env python3
"""Regenerate the degree-12 least-squares (L2, uniform weight) fit of exp(y) on [-1, 1].

The L2-optimal polynomial is the truncated Legendre series, so each coefficient is
(2k+1)/2 * integral_{-1}^{1} exp(y) P_k(y) dy, evaluated here with mpmath at 60
digits and converted to the monomial basis. Paste the output into
crates/core/src/approx/coeffs.rs.
"""
import mpmath as mp

mp.mp.dps = 60
DEGREE = 12


def legendre_coeffs(k):
    # monomial coefficients of P_k via the three-term recurrence
    p0, p1 = [mp.mpf(1)], [mp.mpf(0), mp.mpf(1)]
    if k == 0:
        return p0
    for n in range(1, k):
        nxt = [mp.mpf(0)] * (n + 2)
        for i, c in enumerate(p1):
            nxt[i + 1] += (2 * n + 1) * c / (n + 1)
        for i, c in enumerate(p0):
            nxt[i] -= n * c / (n + 1)
        p0, p1 = p1, nxt
    return p1


mono = [mp.mpf(0)] * (DEGREE + 1)
for k in range(DEGREE + 1):
    proj = (2 * k + 1) / mp.mpf(2) * mp.quad(lambda y: mp.exp(y) * mp.legendre(k, y), [-1, 1])
    for i, c in enumerate(legendre_coeffs(k)):
        mono[i] += proj * c

print("pub(crate) const EXP_UNIT_COEFFS: [f64; %d] = [" % (DEGREE + 1))
for c in mono:
    print("    %r," % float(c))  # shortest round-trip f64 literal
print("];")
err = max(abs(mp.exp(y) - mp.polyval(mono[::-1], y)) for y in mp.linspace(-1, 1, 2001))
print("// max |exp(y) - p(y)| on [-1, 1] (2001-point grid):", mp.nstr(err, 5))
