"""Complete elliptic integral, elliptic nome and the quartic-well parameters.

Negative parameters are mapped onto ``mu = m/(m-1)`` in ``(0, 1)`` through the
imaginary-modulus transformation

    K(m) = K(mu) / sqrt(1 - m),        q(m) = -q(mu),

so all evaluations happen in the standard domain and the nome stays real with
``|q| < 1`` (it is negative for ``m < 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

__all__ = [
    "EllipticParams",
    "QuarticParams",
    "agm",
    "elliptic_K",
    "elliptic_K_quadrature",
    "elliptic_params",
    "nome",
    "quartic_params",
]


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two positive numbers."""
    if a <= 0 or b <= 0:
        raise ValueError("agm needs positive arguments")
    for _ in range(64):
        if abs(a - b) <= 1e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def _K_standard(m: float) -> float:
    # m in [0, 1)
    return math.pi / (2.0 * agm(1.0, math.sqrt(1.0 - m)))


def elliptic_K(m: float) -> float:
    """Complete elliptic integral of the first kind, ``K(m)`` for ``m < 1``."""
    if not m < 1:
        raise ValueError(f"elliptic_K: parameter m={m!r} outside the domain m < 1")
    if m >= 0:
        return _K_standard(m)
    return _K_standard(m / (m - 1.0)) / math.sqrt(1.0 - m)


def elliptic_K_quadrature(m: float) -> float:
    """``K(m)`` by adaptive quadrature of ``1/sqrt(1 - m sin^2 theta)``.

    Independent cross-check for :func:`elliptic_K`; the substitution
    ``t = sin(theta)`` removes the endpoint singularity of the defining integral.
    """
    if not m < 1:
        raise ValueError(f"elliptic_K_quadrature: m={m!r} outside m < 1")
    val, _ = integrate.quad(lambda th: 1.0 / math.sqrt(1.0 - m * math.sin(th) ** 2),
                            0.0, math.pi / 2, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def nome(m: float) -> float:
    """Elliptic nome ``q(m) = exp(-pi K(1-m)/K(m))``, continued to ``m < 0`` as ``-q(mu)``."""
    if not m < 1:
        raise ValueError(f"nome: parameter m={m!r} outside the domain m < 1")
    if m == 0:
        return 0.0
    if m < 0:
        return -nome(m / (m - 1.0))
    return math.exp(-math.pi * _K_standard(1.0 - m) / _K_standard(m))


@dataclass(frozen=True)
class EllipticParams:
    """Quarter periods and nome for parameter ``m``.

    For ``m < 0`` the complementary period is the real one inherited from the
    transformed parameter, ``K_comp = K(1 - mu)/sqrt(1 - m)``, so that
    ``|q| = exp(-pi K_comp / K)`` holds on both sides of zero.
    """

    m: float
    K: float
    K_comp: float
    q: float

    @property
    def mu(self) -> float:
        return self.m if self.m >= 0 else self.m / (self.m - 1.0)


def elliptic_params(m: float) -> EllipticParams:
    if not m < 1:
        raise ValueError(f"parameter m={m!r} outside the domain m < 1")
    if m == 0:
        return EllipticParams(0.0, math.pi / 2, math.inf, 0.0)
    if m > 0:
        return EllipticParams(m, _K_standard(m), _K_standard(1.0 - m), nome(m))
    mu = m / (m - 1.0)
    scale = 1.0 / math.sqrt(1.0 - m)
    return EllipticParams(m, _K_standard(mu) * scale, _K_standard(1.0 - mu) * scale, nome(m))


@dataclass(frozen=True)
class QuarticParams:
    """Classical-motion data of the well ``v(x) = x^2 + g x^4`` at ``2 mu_F = 1``.

    ``L`` is a quarter of the classical period, ``Lambda`` the turning point,
    and ``x[q] = Lambda sn(sqrt(1 + sqrt(1 + 2g)) q | m)``.
    """

    g: float
    m: float
    L: float
    Lambda: float
    elliptic: EllipticParams

    @property
    def q(self) -> float:
        return self.elliptic.q

    @property
    def K(self) -> float:
        return self.elliptic.K

    @property
    def omega_c(self) -> float:
        return math.pi / (2.0 * self.L)


def quartic_params(g: float) -> QuarticParams:
    if not g > 0:
        raise ValueError(f"quartic_params needs g > 0 (got {g!r}); use the quadratic model for g = 0")
    s = math.sqrt(1.0 + 2.0 * g)
    # Rationalized forms of (-(1+g)+s)/g and sqrt((s-1)/(2g)); no cancellation at small g.
    m = -g / (1.0 + g + s)
    lam = 1.0 / math.sqrt(1.0 + s)
    ep = elliptic_params(m)
    return QuarticParams(g=g, m=m, L=lam * ep.K, Lambda=lam, elliptic=ep)
