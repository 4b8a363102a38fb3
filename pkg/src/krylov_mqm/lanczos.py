"""Lanczos coefficients of a spectral measure.

Three routes produce the same tridiagonal representation of the Liouvillian:

* :func:`lanczos_even` -- the Delta recursion on even moments (``a_n = 0``);
* :func:`lanczos_general` -- the joint ``(a_n, b_n)`` recursion on all moments;
* :func:`lanczos_direct` -- Lanczos with full reorthogonalization on
  ``L = diag(-omega_j)`` with start vector ``sqrt(rho_j)``, in double precision.

Both moment recursions run in the precision of the :class:`MomentSequence`
they are fed; the direct route is the numerically stable oracle.  Signs follow
``M_n = sum rho (-omega)**n``: the Jacobi matrix is that of the measure placed
at ``-omega_j``, so ``a_n`` is negative for positive-frequency spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .spectral import (MomentSequence, SpectralMeasure, make_context, moments,
                       required_precision)

__all__ = [
    "HankelReport",
    "LanczosData",
    "LinearFit",
    "NotPositiveDefiniteError",
    "branch_fits",
    "hankel_check",
    "lanczos_coefficients",
    "lanczos_direct",
    "lanczos_even",
    "lanczos_general",
    "linear_fit",
    "read_lanczos_table",
    "write_lanczos_table",
]

# b_n^2 below this times max(1, b_1^2) terminates the moment recursions.
TERMINATION_REL = 1e-30
# In double precision the direct route stops once b_n < DIRECT_TERMINATION * b_1.
DIRECT_TERMINATION = 1e-10


class NotPositiveDefiniteError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LanczosData:
    """``a_0..a_{K-1}`` and ``b_1..b_{K-1}``; ``b[0]`` is ``b_1``.

    ``K`` is the Krylov dimension when ``terminated`` is true; otherwise the
    recursion ran out of input before the chain closed and ``K`` is None.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]
    terminated: bool
    K: int | None
    metadata: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.terminated and self.K != len(self.a):
            raise ValueError("terminated data needs K == len(a)")
        if len(self.b) not in (len(self.a) - 1, len(self.a)):
            raise ValueError("b must have len(a) - 1 entries (or len(a) if not terminated)")
        if any(not bn > 0 for bn in self.b):
            raise ValueError("stored b_n must be positive")

    @property
    def dimension(self) -> int:
        return len(self.a)

    def truncated(self, K: int) -> "LanczosData":
        """First ``K`` sites of the chain, treated as a closed chain."""
        if K < 1 or K > len(self.a):
            raise ValueError(f"truncation index must lie in [1, {len(self.a)}]")
        return LanczosData(self.a[:K], self.b[:K - 1], True, K,
                           {**self.metadata, "truncated_at": K})


# -- moment recursions ------------------------------------------------------

def _threshold(ctx, b1sq):
    return ctx.mpf(TERMINATION_REL) * max(ctx.one, abs(b1sq))


def lanczos_even(moments: MomentSequence) -> LanczosData:
    """Delta recursion for an even correlator.

    With ``M^(0)_2k = M_2k``, ``M^(-1) = 0`` and ``Delta_{-1} = Delta_0 = 1``:

        M^(n)_2k = M^(n-1)_2k / Delta_{n-1} - M^(n-2)_{2k-2} / Delta_{n-2},
        Delta_n  = M^(n)_2n = b_n^2.
    """
    if not moments.odd_vanish():
        raise ValueError("lanczos_even needs a sequence with vanishing odd moments")
    ctx = make_context(moments.precision_bits)
    even = [ctx.mpf(v) for v in moments.values[0::2]]
    kmax = len(even) - 1
    prev2 = [ctx.zero] * (kmax + 1)          # M^(n-2)
    prev1 = list(even)                        # M^(n-1)
    d_prev2, d_prev1 = ctx.one, ctx.one       # Delta_{n-2}, Delta_{n-1}
    bsq = []
    terminated = False
    thresh = None
    for n in range(1, kmax + 1):
        cur = [ctx.zero] * (kmax + 1)
        for k in range(n, kmax + 1):
            cur[k] = prev1[k] / d_prev1 - prev2[k - 1] / d_prev2
        delta = cur[n]
        if thresh is None:
            thresh = _threshold(ctx, delta)
        if abs(delta) <= thresh:
            terminated = True
            break
        if delta < 0:
            raise NotPositiveDefiniteError(
                f"Delta_{n} = {ctx.nstr(delta, 5)} < 0: moment sequence not positive-definite "
                "or precision exhausted")
        bsq.append(delta)
        prev2, prev1 = prev1, cur
        d_prev2, d_prev1 = d_prev1, delta
    b = tuple(float(ctx.sqrt(v)) for v in bsq)
    K = len(b) + 1 if terminated else None
    return LanczosData((0.0,) * (len(b) + 1), b, terminated, K,
                       {"route": "even", "precision_bits": moments.precision_bits,
                        "b_squared": tuple(bsq)})


def lanczos_general(moments: MomentSequence) -> LanczosData:
    """Joint ``(a_n, b_n)`` recursion.

    ``M^(0)_k = (-1)^k M_k`` and ``L^(0)_k = (-1)^(k+1) M_{k+1}``, then

        M^(n)_k = L^(n-1)_k - L^(n-1)_{n-1} M^(n-1)_k / M^(n-1)_{n-1},
        L^(n)_k = M^(n)_{k+1} / M^(n)_n - M^(n-1)_k / M^(n-1)_{n-1},

    giving ``b_n = sqrt(M^(n)_n)`` and ``a_n = -L^(n)_n``.  Moments up to
    ``M_{2K}`` determine ``a_0..a_{K-1}`` and ``b_1..b_K``.
    """
    ctx = make_context(moments.precision_bits)
    mu = [ctx.mpf(v) for v in moments.values]
    N = len(mu) - 1
    if N < 1:
        raise ValueError("need at least M_0 and M_1")
    Mcur = [(-1) ** k * mu[k] for k in range(N + 1)]
    Lcur = [(-1) ** (k + 1) * mu[k + 1] for k in range(N)]
    a = [-Lcur[0]]
    bsq = []
    terminated = False
    thresh = None
    n = 0
    while True:
        n += 1
        if n > N - n:           # M^(n)_n needs index n <= N - n
            break
        Mprev, Lprev = Mcur, Lcur
        pivot = Mprev[n - 1]
        lead = Lprev[n - 1]
        Mcur = [None] * (N - n + 1)
        for k in range(n, N - n + 1):
            Mcur[k] = Lprev[k] - lead * Mprev[k] / pivot
        bn2 = Mcur[n]
        if thresh is None:
            thresh = _threshold(ctx, bn2)
        if abs(bn2) <= thresh:
            terminated = True
            break
        if bn2 < 0:
            raise NotPositiveDefiniteError(
                f"b_{n}^2 = {ctx.nstr(bn2, 5)} < 0: moment sequence not positive-definite "
                "or precision exhausted")
        bsq.append(bn2)
        if n > N - n - 1:       # L^(n)_n needs index n <= N - n - 1
            break
        Lcur = [None] * (N - n)
        for k in range(n, N - n):
            Lcur[k] = Mcur[k + 1] / Mcur[n] - Mprev[k] / pivot
        a.append(-Lcur[n])
    b = tuple(float(ctx.sqrt(v)) for v in bsq)
    a_f = tuple(float(v) for v in a)
    return LanczosData(a_f, b, terminated, len(a_f) if terminated else None,
                       {"route": "general", "precision_bits": moments.precision_bits,
                        "a_exact": tuple(a), "b_squared": tuple(bsq)})


def lanczos_coefficients(measure: SpectralMeasure, max_dim: int | None = None,
                         precision_bits: int | None = None, verify: bool = True,
                         max_doublings: int = 4) -> LanczosData:
    """Moments plus recursion with an automatic precision choice.

    The default precision adds the dynamic range of the weights to
    :func:`required_precision`.  With ``verify`` the recursion is repeated at
    twice the precision and doubled again until both runs agree on every
    coefficient to ``1e-20`` and on the Krylov dimension.
    """
    dim = max_dim if max_dim is not None else measure.support_size()
    n_max = 2 * dim + 1
    w = measure.weights[measure.weights > 0]
    spread = float(np.log2(w.max()) - np.log2(w.min())) if w.size else 0.0
    bits = precision_bits or required_precision(measure, n_max) + int(2 * spread) + 64
    bits = max(bits, required_precision(measure, n_max))
    kms = measure.inner_product.is_kms
    route = lanczos_even if kms else lanczos_general

    def run(p):
        return route(moments(measure, n_max, p))

    data = run(bits)
    if verify:
        for _ in range(max_doublings):
            finer = run(2 * bits)
            if _agree(data, finer, 1e-20):
                break
            bits *= 2
            data = finer
        else:
            raise ArithmeticError(f"Lanczos coefficients did not stabilize up to {2 * bits} bits")
    if max_dim is not None and not data.terminated and len(data.a) >= max_dim:
        data = LanczosData(data.a[:max_dim], data.b[:max_dim], False, None, data.metadata)
    return data


def _agree(x: LanczosData, y: LanczosData, rtol: float) -> bool:
    if x.terminated != y.terminated or len(x.a) != len(y.a) or len(x.b) != len(y.b):
        return False
    scale = max([1.0] + [abs(v) for v in x.a] + list(x.b))
    return (all(abs(u - v) <= rtol * scale for u, v in zip(x.a, y.a))
            and all(abs(u - v) <= rtol * max(abs(u), 1e-300) for u, v in zip(x.b, y.b)))


# -- Hankel determinant identity --------------------------------------------

@dataclass(frozen=True)
class HankelReport:
    """``residuals[n-1]`` compares ``det H_n`` with ``prod_k b_k^(2(n+1-k))``.

    ``terminal_det`` is the scale-free determinant at the termination index,
    ``det H_K / (det H_{K-1} M_2K)``, which vanishes for a closed chain.
    """

    residuals: tuple[float, ...]
    max_residual: float
    terminal_det: float | None


def hankel_check(moments: MomentSequence, data: LanczosData) -> HankelReport:
    """Check ``b_1^(2n) b_2^(2(n-1)) ... b_n^2 = det(M_{i+j})_{0<=i,j<=n}``."""
    ctx = make_context(moments.precision_bits)
    mu = [ctx.mpf(v) for v in moments.values]
    bsq = [ctx.mpf(v) for v in data.metadata.get("b_squared", ())] or \
          [ctx.mpf(v) ** 2 for v in data.b]
    top = len(bsq)
    if data.terminated:
        top = data.K
    top = min(top, (len(mu) - 1) // 2)

    def det(n):
        return ctx.det(ctx.matrix([[mu[i + j] for j in range(n + 1)] for i in range(n + 1)]))

    residuals = []
    dets = {0: ctx.one}
    for n in range(1, top + 1):
        dets[n] = det(n)
        if n <= len(bsq):
            prod = ctx.fprod(bsq[k - 1] ** (n + 1 - k) for k in range(1, n + 1))
            residuals.append(float(abs(dets[n] - prod) / prod))
    terminal = None
    if data.terminated and data.K in dets and data.K >= 1:
        K = data.K
        terminal = float(abs(dets[K]) / (abs(dets[K - 1]) * mu[2 * K]))
    return HankelReport(tuple(residuals), max(residuals, default=0.0), terminal)


# -- direct orthogonalization -------------------------------------------------

def lanczos_direct(measure: SpectralMeasure, n_max: int | None = None) -> LanczosData:
    """Lanczos on ``diag(-omega_j)`` with full (twice-applied) reorthogonalization."""
    if not measure.normalized:
        raise ValueError("lanczos_direct requires a normalized measure")
    keep = measure.weights > 0
    diag = -measure.frequencies[keep]
    v = np.sqrt(measure.weights[keep])
    v = v / np.linalg.norm(v)
    dim = diag.size
    n_max = dim if n_max is None else min(n_max, dim)
    Q = np.zeros((n_max, dim))
    Q[0] = v
    a = [float(v @ (diag * v))]
    b: list[float] = []
    spread = float(np.ptp(diag)) if dim else 0.0
    terminated = False
    while True:
        n = len(a)
        if n == dim:
            terminated = True
            break
        w = (diag - a[-1]) * Q[n - 1]
        if n >= 2:
            w -= b[-1] * Q[n - 2]
        for _ in range(2):
            w -= Q[:n].T @ (Q[:n] @ w)
        bn = float(np.linalg.norm(w))
        if bn <= DIRECT_TERMINATION * (b[0] if b else spread):
            terminated = True
            break
        b.append(bn)
        if n == n_max:
            break
        Q[n] = w / bn
        a.append(float(Q[n] @ (diag * Q[n])))
    if terminated:
        return LanczosData(tuple(a), tuple(b), True, len(a), {"route": "direct"})
    return LanczosData(tuple(a), tuple(b), False, None, {"route": "direct"})


# -- shape fits ----------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    n: tuple[int, ...]


def linear_fit(n: Sequence[float], y: Sequence[float]) -> LinearFit:
    x = np.asarray(n, dtype=float)
    yv = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("a linear fit needs at least three points")
    slope, intercept = np.polyfit(x, yv, 1)
    resid = yv - (slope * x + intercept)
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2, tuple(int(k) for k in x))


def branch_fits(b: Sequence[float], n_lo: int, n_hi: int) -> tuple[LinearFit, LinearFit]:
    """Separate linear fits of ``b_n`` over even and odd ``n`` in ``[n_lo, n_hi]``.

    ``b[0]`` is ``b_1``, matching :class:`LanczosData`.
    """
    idx = range(max(1, n_lo), min(n_hi, len(b)) + 1)
    even = [n for n in idx if n % 2 == 0]
    odd = [n for n in idx if n % 2 == 1]
    return (linear_fit(even, [b[n - 1] for n in even]),
            linear_fit(odd, [b[n - 1] for n in odd]))


# -- text table ----------------------------------------------------------------

def write_lanczos_table(data: LanczosData, path: str | Path,
                        header: Mapping[str, object] | None = None) -> None:
    """Rows ``n,a_n,b_n`` (``b_0`` written as 0) with ``#`` metadata lines."""
    lines = ["# krylov-mqm lanczos table v1"]
    for key, value in {**(header or {}),
                       "precision_bits": data.metadata.get("precision_bits"),
                       "terminated": data.terminated, "K": data.K}.items():
        if value is not None:
            lines.append(f"# {key}: {value}")
    lines.append("n,a_n,b_n")
    for n, an in enumerate(data.a):
        bn = data.b[n - 1] if n >= 1 else 0.0
        lines.append(f"{n},{an:.17g},{bn:.17g}")
    if not data.terminated and len(data.b) == len(data.a):
        lines.append(f"{len(data.a)},,{data.b[-1]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_lanczos_table(path: str | Path) -> LanczosData:
    a, b = [], []
    terminated, K = True, None
    meta: dict[str, object] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("n,"):
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        n_s, a_s, b_s = (s.strip() for s in line.split(","))
        n = int(n_s)
        if n != len(a) and not (a_s == "" and n == len(a)):
            raise ValueError(f"rows out of order at n={n}")
        if a_s:
            a.append(float(a_s))
        if n >= 1:
            b.append(float(b_s))
    if "terminated" in meta:
        terminated = meta["terminated"] == "True"
    if terminated:
        K = len(a)
    return LanczosData(tuple(a), tuple(b), terminated, K, meta)
