"""Reference values frozen into the C++ tests.

Every quantity here is computed by a route independent of the library:
scipy's wofz, direct quadrature of the Doppler-convolved dispersion, the
conserved-F_z projection for the narrow-noise fraction, brentq roots, and a
straight transcription of the Philox4x32-10 round function.
"""
import math

import numpy as np
from scipy import integrate, optimize, special

C = 299792458.0
R_E = 2.8179403262e-15
K_B = 1.380649e-23
AMU = 1.66053906660e-27
M_RB87 = 86.909180527 * AMU
LAMBDA = 794.978851156e-9
W_GROUND = 6.8347e9
W_EXCITED = 0.8166e9
F_OSC = 0.34
GAMMA_L = 5.75e6
I_NUC = 1.5
T_CELL = 381.35


def doppler_fwhm(t):
    nu0 = C / LAMBDA
    return nu0 * math.sqrt(8 * K_B * t * math.log(2) / (M_RB87 * C * C))


GAMMA_D = doppler_fwhm(T_CELL)
AA = 3 / 8 * W_EXCITED - 3 / 8 * W_GROUND
AB = -5 / 8 * W_EXCITED - 3 / 8 * W_GROUND
BA = 3 / 8 * W_EXCITED + 5 / 8 * W_GROUND
BB = -5 / 8 * W_EXCITED + 5 / 8 * W_GROUND


def dispersion_wofz(delta, gl, gd):
    sigma = gd / (2 * math.sqrt(2 * math.log(2)))
    z = complex(delta, gl / 2) / (sigma * math.sqrt(2))
    return special.wofz(z).imag / (sigma * math.sqrt(2 * math.pi))


def dispersion_quad(delta, gl, gd):
    """Gaussian-weighted Lorentzian dispersion, integrated directly."""
    sigma = gd / (2 * math.sqrt(2 * math.log(2)))
    half = gl / 2

    def integrand(x):
        g = math.exp(-x * x / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
        d = delta - x
        return g * d / (math.pi * (d * d + half * half))

    pts = sorted({-8 * sigma, delta - 50 * gl, delta, delta + 50 * gl, 8 * sigma})
    pts = [p for p in pts if -12 * sigma <= p <= 12 * sigma]
    total, _ = integrate.quad(integrand, -12 * sigma, 12 * sigma, points=pts, limit=2000,
                              epsabs=0, epsrel=1e-13)
    return total


def chi(nu):
    k = math.pi * R_E * C * F_OSC / (2 * I_NUC + 1)
    l = lambda c: dispersion_wofz(nu - c, GAMMA_L, GAMMA_D)
    chi_a = k * (0.25 * l(AA) + 0.75 * l(AB))
    chi_b = -k * (1.25 * l(BA) - 0.25 * l(BB))
    return chi_a, chi_b


def xi_plus(nu):
    """Fraction of <Phi^2> carried by the projection onto conserved F_z."""
    a, b = chi(nu)
    var_fza, var_fzb, var_fz = 5 / 4, 1 / 4, 3 / 2
    cov = a * var_fza + b * var_fzb
    return cov * cov / var_fz / (a * a * var_fza + b * b * var_fzb)


def philox4x32_10(ctr, key):
    m0, m1 = 0xD2511F53, 0xCD9E8D57
    w0, w1 = 0x9E3779B9, 0xBB67AE85
    c = list(ctr)
    k = list(key)
    for r in range(10):
        p0 = m0 * c[0]
        p1 = m1 * c[2]
        c = [((p1 >> 32) ^ c[1] ^ k[0]) & 0xFFFFFFFF, p1 & 0xFFFFFFFF,
             ((p0 >> 32) ^ c[3] ^ k[1]) & 0xFFFFFFFF, p0 & 0xFFFFFFFF]
        k = [(k[0] + w0) & 0xFFFFFFFF, (k[1] + w1) & 0xFFFFFFFF]
    return c


def main():
    print("doppler_fwhm_hz", repr(GAMMA_D))
    print("# wofz")
    for z in [0.5 + 0.5j, 2 + 1e-3j, 10 + 5j, 1e-3 + 1e-3j, 3 + 0.1j, -1.5 + 2j, 100 + 1j]:
        w = special.wofz(z)
        print(f"{{{z.real!r}, {z.imag!r}, {w.real!r}, {w.imag!r}}},")
    print("# dispersion: delta, wofz route, quadrature route")
    for delta in [0.0, 1e6, 1e8, 3e8, 1e9, 5e9, 2e10]:
        print(f"{{{delta!r}, {dispersion_wofz(delta, GAMMA_L, GAMMA_D)!r}, "
              f"{dispersion_quad(delta, GAMMA_L, GAMMA_D)!r}}},")
    print("# xi_plus(nu)")
    for nu in [AB - 14.1e9, 60e9, -60e9, 1e13, -1e13, 0.0, 2e9]:
        print(f"{{{nu!r}, {xi_plus(nu)!r}}},")
    f_plus = lambda nu: chi(nu)[0] - chi(nu)[1]
    f_minus = lambda nu: 5 * chi(nu)[0] + chi(nu)[1]
    print("root_plus_hz", repr(optimize.brentq(f_plus, 0.5e9, 2e9, xtol=1e-4)))
    print("root_minus_hz", repr(optimize.brentq(f_minus, 5.5e9, 8e9, xtol=1e-4)))
    print("# philox")
    for ctr, key in [([0, 0, 0, 0], [0, 0]),
                     ([0xFFFFFFFF] * 4, [0xFFFFFFFF] * 2),
                     ([0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], [0xA4093822, 0x299F31D0]),
                     ([7, 0, 2, 0], [12345, 0])]:
        print(" ".join(f"{v:08x}" for v in philox4x32_10(ctr, key)))


if __name__ == "__main__":
    main()
