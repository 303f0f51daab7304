"""
Closed-form values of the main term used as test oracles
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import special


def gaussian_main_term(x: Tuple[float, float], lam: float, width: float = 1.0) -> complex:
    """
    T^lambda of exp(-|z|^2 / width^2) at x

    Per axis the main term is a Gauss-Fresnel integral with value
    sqrt(pi / (1 -+ i lam)); rescaling z by width maps lam to lam * width^2.
    """
    lw = lam * width ** 2
    x1, x2 = x[0] / width, x[1] / width
    denom = 1.0 + lw ** 2
    return complex(lw / np.sqrt(denom)
                   * np.exp((1j * lw - lw ** 2) * x1 ** 2 / denom)
                   * np.exp((-1j * lw - lw ** 2) * x2 ** 2 / denom))


def disc_center_main_term(lam: float, radius: float = 1.0) -> float:
    """
    T^lambda of the disc indicator at its center: the integral of J0 over [0, lam radius^2]
    """
    return float(integral_j0(lam * radius ** 2))


def integral_j0(x: float) -> float:
    """
    Integral of J0 over [0, x] in Struve form

    x J0(x) + (pi x / 2) (J1(x) H0(x) - J0(x) H1(x))
    """
    x = float(x)
    j0, j1 = special.j0(x), special.j1(x)
    h0, h1 = special.struve(0, x), special.struve(1, x)
    return float(x * j0 + 0.5 * np.pi * x * (j1 * h0 - j0 * h1))


@lru_cache(maxsize=8)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def radial_main_term_at_center(profile, lam: float, r_max: float, n: int = 2000) -> complex:
    """
    T^lambda[f](0) for a radial f given as a callable of r

    In polar form the angular integral is 2 pi J0(lam r^2), leaving
    2 lam * integral of f(r) J0(lam r^2) r dr, evaluated with Gauss-Legendre nodes.
    """
    nodes, weights = _legendre(int(n))
    r = 0.5 * r_max * (nodes + 1.0)
    w = 0.5 * r_max * weights
    return complex(2.0 * lam * np.sum(w * profile(r) * special.j0(lam * r ** 2) * r))
