"""Closed-form performance metrics over ME-distributed effective channels:
outage probability and capacity, ARQ / truncated-HARQ / persistent-HARQ
throughput, bidirectional-relaying sum-throughput, effective capacity,
BER/PEP for the standard binary modulations, diversity gain, and parametric
rate optimization.

Threshold conventions: every entry point takes an explicit decoding
threshold.  Use :func:`theta_absolute` (``e^R - 1``, channel as-is) or
:func:`theta_unit_mean` (``(e^R - 1)/S`` against the unit-mean channel);
mixing them up silently is the classic factor-of-S bug, hence no implicit
derivation anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc

from . import algebra, matfun
from .medist import MEDist, RationalLT, to_rational_lt

__all__ = [
    "LinkParams",
    "MetricResult",
    "Optimum",
    "arq_throughput",
    "ber_coherent",
    "ber_noncoherent",
    "diversity_gain",
    "diversity_gain_numeric",
    "eff_capacity_me_rate",
    "eff_capacity_shannon",
    "ergodic_capacity",
    "harq_persistent_throughput",
    "harq_persistent_erlang_shifted",
    "harq_truncated_throughput",
    "lambert_w0",
    "mimo_high_snr_outage",
    "ncbr_throughput",
    "optimize_rate",
    "outage",
    "outage_capacity",
    "pep",
    "theta_absolute",
    "theta_unit_mean",
]


def theta_absolute(R: float) -> float:
    """Decoding threshold e^R - 1 for a channel used at its natural scale."""
    return math.expm1(R)


def theta_unit_mean(R: float, S: float) -> float:
    """Decoding threshold (e^R - 1)/S for the unit-mean channel convention."""
    return math.expm1(R) / S


@dataclass(frozen=True)
class LinkParams:
    """Link-level parameters shared by the metric entry points."""

    R: float = 1.0
    S: float = 1.0
    K: int = 1
    theta: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if self.R <= 0 or self.S <= 0 or self.theta <= 0:
            raise ValueError("R, S and theta must be positive")
        if self.K < 1 or self.K != int(self.K):
            raise ValueError("K must be a positive integer")

    def theta_abs(self) -> float:
        return theta_absolute(self.R)

    def theta_um(self) -> float:
        return theta_unit_mean(self.R, self.S)


@dataclass(frozen=True)
class MetricResult:
    """Metric value plus the evaluation path and numeric diagnostics."""

    value: float
    path: str
    imag_residual: float = 0.0
    quad_error: float | None = None
    notes: tuple[str, ...] = ()

    def __float__(self):
        return self.value


def _result(value, path, quad_error=None, notes=(), rtol=1e-8):
    value = complex(value)
    resid = abs(value.imag)
    if resid > rtol * max(abs(value), 1e-12):
        raise ValueError(
            f"{path}: imaginary residual {resid:.3e} too large for value {value}")
    return MetricResult(value=value.real, path=path, imag_residual=resid,
                        quad_error=quad_error, notes=tuple(notes))


def _dist(channel) -> MEDist:
    if isinstance(channel, algebra.EffectiveChannel):
        return channel.dist
    return channel


# -- outage ----------------------------------------------------------------


def outage(channel, theta: float) -> MetricResult:
    """Outage probability P(Z <= theta) from the first row of one augmented
    matrix exponential (valid for singular generators)."""
    d = _dist(channel)
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    E = matfun.expm(theta * d.augmented_generator())
    return _result(E[0, 1:] @ d.z, "closed_form")


def outage_capacity(channel, q_target: float, tol: float = 1e-12) -> MetricResult:
    """Rate C with P(ln(1 + Z) < C) = q_target, by monotone bisection with a
    secant polish on the closed-form outage."""
    d = _dist(channel)
    if not 0.0 < q_target < 1.0:
        raise ValueError("q_target must lie strictly between 0 and 1")
    f = lambda C: outage(d, math.expm1(C)).value - q_target
    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("outage capacity target unattainable")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    # secant polish
    c0, c1 = lo, hi
    f0, f1 = f(c0), f(c1)
    for _ in range(8):
        if f1 == f0:
            break
        c2 = c1 - f1 * (c1 - c0) / (f1 - f0)
        if not lo <= c2 <= hi:
            break
        c0, f0, c1, f1 = c1, f1, c2, f(c2)
    return _result(c1, "closed_form")


# -- ARQ / HARQ ------------------------------------------------------------


def arq_throughput(channel, R: float, theta: float,
                   method: str = "augmented") -> MetricResult:
    """ARQ throughput R (1 - P(Z <= theta)).

    ``augmented`` shares the outage exponential; ``resolvent`` evaluates the
    success probability directly as -p e^{theta Q} Q^{-1} r (nonsingular Q).
    """
    d = _dist(channel)
    if R <= 0:
        raise ValueError("R must be positive")
    if method == "augmented":
        return _result(R * (1.0 - outage(d, theta).value), "closed_form")
    if method == "resolvent":
        succ = -d.x @ matfun.expm(theta * d.Y) @ np.linalg.solve(d.Y, d.z)
        return _result(R * succ, "closed_form")
    raise ValueError(f"unknown method {method!r}")


def harq_truncated_throughput(channel, R: float, K: int,
                              theta: float) -> MetricResult:
    """Truncated-HARQ throughput with at most K transmissions and mutual-
    information accumulation:

        R (1 - F_K(theta)) / (1 + sum_{k<K} F_k(theta)),

    with all partial-sum cdfs F_k taken from one block exponential.
    """
    d = _dist(channel)
    if R <= 0:
        raise ValueError("R must be positive")
    block = algebra.kfold_block(d, K)
    F = block.partial_cdfs(theta)
    denom = 1.0 + float(np.sum(F[:-1]))
    return _result(R * (1.0 - F[-1]) / denom, "closed_form")


def _as_rational(channel) -> RationalLT:
    if isinstance(channel, RationalLT):
        return channel
    return to_rational_lt(_dist(channel))


def _pad(p, d):
    out = np.zeros(d)
    out[:len(p)] = p
    return out


def _poly_power(coeffs_with_leading, N):
    out = np.array([1.0])
    for _ in range(N):
        out = np.convolve(out, coeffs_with_leading)
    return out


def _persistent_core(p, q, theta):
    """Mean transmission count 1 + E for 1/(1 - p(s)/q(s)) via the
    companion form of p(s)/(q(s) - p(s))."""
    d = len(q)
    pp = _pad(p, d)
    Y = np.diag(np.ones(d - 1), 1)
    Y[-1, :] -= np.asarray(q, dtype=float) - pp
    QI = np.zeros((d + 1, d + 1))
    QI[0, 1:] = pp
    QI[1:, 1:] = Y
    return 1.0 + matfun.expm(theta * QI)[0, -1], QI


def harq_persistent_throughput(channel, R: float, theta: float,
                               diversity: int = 1,
                               method: str = "companion") -> MetricResult:
    """Persistent-HARQ (no retransmission limit) throughput R / N(theta),
    N(theta) the mean transmission count.

    ``channel`` is a rational transform (or a distribution, converted to
    one); with ``diversity`` N > 1 the effective transform is (p/q)^N.
    ``companion`` expands (p^N, q^N) into a single companion form;
    ``roots_of_unity`` factors q^N - p^N over the complex N-th roots of
    unity into N coupled companion blocks and must give a real result.
    """
    lt = _as_rational(channel)
    if R <= 0:
        raise ValueError("R must be positive")
    N = int(diversity)
    if N < 1:
        raise ValueError("diversity must be a positive integer")
    p = np.asarray(lt.p, dtype=float)
    q = np.asarray(lt.q, dtype=float)
    # q(s) - p(s) keeps its monic degree-d term whenever deg p < deg q, so
    # the compensated denominator never vanishes identically for a proper
    # transform; no degeneracy guard is reachable here.
    if method == "companion":
        if N == 1:
            pn, qn = p, q
        else:
            qn_full = _poly_power(np.concatenate([q, [1.0]]), N)
            pn = _poly_power(p, N)
            qn = qn_full[:-1]
        mean_tx, _ = _persistent_core(pn, qn, theta)
        return _result(R / mean_tx, "closed_form")
    if method == "roots_of_unity":
        d = len(q)
        pp = _pad(p, d).astype(complex)
        qq = q.astype(complex)
        S = np.diag(np.ones(d - 1), 1).astype(complex)
        r = np.zeros((d, 1), dtype=complex)
        r[-1, 0] = 1.0
        D = d * N
        Q = np.zeros((D, D), dtype=complex)
        coupling = r @ pp[None, :]
        for n in range(N):
            w = np.exp(2j * np.pi * n / N)
            Q[n * d:(n + 1) * d, n * d:(n + 1) * d] = S - r @ (qq - pp * w)[None, :]
            if n + 1 < N:
                Q[n * d:(n + 1) * d, (n + 1) * d:(n + 2) * d] = coupling
        QI = np.zeros((D + 1, D + 1), dtype=complex)
        QI[0, 1:1 + d] = pp
        QI[1:, 1:] = Q
        E = matfun.expm(theta * QI)[0, -1]
        mean_tx = matfun.assert_real(1.0 + E, context="roots-of-unity path")
        return MetricResult(R / mean_tx, "eigen", imag_residual=abs(E.imag))
    raise ValueError(f"unknown method {method!r}")


def harq_persistent_erlang_shifted(N: int, R: float, theta: float) -> MetricResult:
    """Persistent-HARQ throughput for the transform 1/(1+s)^N via the
    frequency-shift reduction: the mean transmission count is the last
    diagonal entry of e^{theta (Y - I)} with Y the companion matrix of
    s^{N+1} - s^N - s + 1."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be a positive integer")
    d = N + 1
    q = np.zeros(d)
    q[0] = 1.0
    q[1] += -1.0
    q[-1] += -1.0
    Y = np.diag(np.ones(d - 1), 1)
    Y[-1, :] -= q
    E = matfun.expm(theta * (Y - np.eye(d)))
    return _result(R / E[-1, -1], "closed_form")


def ncbr_throughput(links: dict, R12: float, R21: float) -> MetricResult:
    """End-to-end sum-throughput of 3-phase network-coded bidirectional
    relaying.  ``links`` maps the hop keys "13", "32", "23", "31" to
    effective-channel distributions; each direction succeeds when both its
    hops clear the threshold e^R - 1."""
    need = {"13", "32", "23", "31"}
    if set(links) != need:
        raise ValueError(f"links must have keys {sorted(need)}")
    th12 = theta_absolute(R12)
    th21 = theta_absolute(R21)
    E13 = outage(links["13"], th12).value
    E32 = outage(links["32"], th12).value
    E23 = outage(links["23"], th21).value
    E31 = outage(links["31"], th21).value
    Q12 = 1.0 - (1.0 - E13) * (1.0 - E32)
    Q21 = 1.0 - (1.0 - E23) * (1.0 - E31)
    T = (R12 * (1.0 - Q12) + R21 * (1.0 - Q21)) / 3.0
    return _result(T, "closed_form")


# -- effective capacity ------------------------------------------------------


def eff_capacity_me_rate(channel, theta: float) -> MetricResult:
    """Effective capacity -(1/theta) ln E{e^{-theta zeta}} for an
    ME-distributed service rate zeta: the log-transform at s = theta."""
    d = _dist(channel)
    if theta <= 0:
        raise ValueError("theta must be positive")
    val = d.lt(theta)
    return _result(-math.log(val) / theta, "closed_form")


def _shannon_expectation_quad(d: MEDist, theta: float, tol=1e-12):
    """E{(1+Z)^{-theta}} via the gamma-kernel integral
    int u^{theta-1} e^{-u} F(u) du / Gamma(theta).

    The kernel's u^{theta-1} endpoint singularity is peeled off
    analytically (it integrates to 1/theta against h(0) = 1), which keeps
    the evaluation stable down to theta ~ 1e-5 where the raw integral
    suffers catastrophic cancellation.
    """
    def h(u):
        return math.exp(-u) * d.lt(u)

    inner, e1 = matfun.quad(lambda u: u ** (theta - 1.0) * (h(u) - 1.0),
                            0.0, 1.0, tol=tol)
    outer, e2 = matfun.quad(lambda u: u ** (theta - 1.0) * h(u),
                            1.0, np.inf, tol=tol)
    E = 1.0 / gamma_fn(theta + 1.0) + (inner + outer) / gamma_fn(theta)
    return E, e1 + e2


def eff_capacity_shannon(channel, theta: float,
                         method: str = "quadrature") -> MetricResult:
    """Effective capacity when the service rate is the Shannon rate
    ln(1 + Z) of an ME-distributed SNR Z.

    ``quadrature`` (default) integrates the gamma-kernel form.  ``eigen``
    uses the spectral closed form xi_j = (-l_j)^{theta-1} e^{-l_j}
    Gamma(1-theta, -l_j) and requires a diagonalizable generator with real
    negative eigenvalues and 0 < theta < 1; otherwise it falls back to
    quadrature with a diagnostic note.
    """
    d = _dist(channel)
    if theta <= 0:
        raise ValueError("theta must be positive")
    if method == "eigen":
        dec = matfun.eig_decomp(d.Y)
        lam = dec.eigenvalues
        # rates beyond ~700 overflow the e^{-lambda} factor in double
        # precision before the incomplete-gamma factor can compensate
        eligible = (dec.diagonalizable
                    and np.all(np.abs(lam.imag) <= 1e-12 * np.max(np.abs(lam)))
                    and np.all(lam.real < 0)
                    and np.max(-lam.real) < 700.0
                    and 0.0 < theta < 1.0)
        if not eligible:
            res = eff_capacity_shannon(d, theta, method="quadrature")
            return MetricResult(res.value, "quadrature", res.imag_residual,
                                res.quad_error,
                                res.notes + ("eigen path unavailable "
                                             "(defective, complex or theta >= 1)",))
        lr = lam.real
        xi = (-lr) ** (theta - 1.0) * np.exp(-lr) \
            * gammaincc(1.0 - theta, -lr) * gamma_fn(1.0 - theta)
        V = dec.vectors
        E = complex(d.x @ (V @ np.diag(xi.astype(complex)) @ np.linalg.inv(V)) @ d.z)
        val = matfun.assert_real(E, context="eff_capacity_shannon eigen")
        return _result(-math.log(val) / theta, "eigen")
    if method == "quadrature":
        E, err = _shannon_expectation_quad(d, theta)
        return _result(-math.log(E) / theta, "quadrature", quad_error=err)
    raise ValueError(f"unknown method {method!r}")


def ergodic_capacity(channel) -> MetricResult:
    """Ergodic capacity E{ln(1+Z)} as the theta -> 0 limit of the Shannon
    effective capacity, Richardson-extrapolated from theta in
    {1e-4, 5e-5, 1e-5}."""
    d = _dist(channel)
    ths = np.array([1e-4, 5e-5, 1e-5])
    vals = np.array([eff_capacity_shannon(d, t).value for t in ths])
    coef = np.polyfit(ths, vals, 2)
    return _result(float(np.polyval(coef, 0.0)), "quadrature")


# -- BER / PEP ---------------------------------------------------------------


def ber_noncoherent(channel, a: float) -> MetricResult:
    """BER for DBPSK (a=1) / noncoherent FSK (a=1/2) under symbol-rate
    fading: (1/2) x (aI - Y)^{-1} z = F(a)/2."""
    d = _dist(channel)
    if a <= 0:
        raise ValueError("a must be positive")
    return _result(0.5 * d.lt(a), "closed_form")


def _craig_product(branches, t):
    s2 = math.sin(t) ** 2
    out = 1.0
    for d, a in branches:
        out *= d.lt(a / s2)
    return out


def ber_coherent(channel, a: float, method: str = "closed_form") -> MetricResult:
    """BER for coherent BPSK (a=1) / FSK (a=1/2) under symbol-rate fading:

        (1/2) (1 + x Y^{-1} (I - Y/a)^{-1/2} z),

    with a Craig-representation quadrature fallback when the principal
    inverse square root is unavailable.
    """
    d = _dist(channel)
    if a <= 0:
        raise ValueError("a must be positive")
    if method == "closed_form":
        try:
            W = matfun.mat_frac_power(np.eye(d.d) - d.Y / a, -0.5)
        except matfun.BranchCutError as exc:
            res = ber_coherent(d, a, method="quadrature")
            return MetricResult(res.value, "quadrature", res.imag_residual,
                                res.quad_error, res.notes + (str(exc),))
        val = 0.5 * (1.0 + d.x @ np.linalg.solve(d.Y, W @ d.z))
        return _result(val, "closed_form")
    if method == "quadrature":
        val, err = matfun.quad(lambda t: _craig_product([(d, a)], t),
                               0.0, math.pi / 2.0)
        return _result(val / math.pi, "quadrature", quad_error=err)
    raise ValueError(f"unknown method {method!r}")


def pep(branches) -> MetricResult:
    """Pairwise error probability Q(sqrt(2 sum a_n Z_n)) averaged over
    independent ME-distributed branch SNRs, by the Craig representation:

        (1/pi) int_0^{pi/2} prod_n F_n(a_n / sin^2 t) dt.
    """
    branches = [( _dist(d), float(a)) for d, a in branches]
    if not branches:
        raise ValueError("branch list must not be empty")
    val, err = matfun.quad(lambda t: _craig_product(branches, t),
                           0.0, math.pi / 2.0)
    return _result(val / math.pi, "quadrature", quad_error=err)


def diversity_gain(channel) -> int:
    """High-SNR BER slope: the denominator degree of the effective-channel
    transform (assumes a minimal representation)."""
    return _dist(channel).d


def diversity_gain_numeric(channel_um, detection: str = "noncoherent",
                           a: float = 1.0,
                           S_lo: float = 1e3, S_hi: float = 1e5) -> float:
    """Numeric -ln BER / ln S slope between two high SNR points for a
    unit-mean channel (cross-check of :func:`diversity_gain`)."""
    d = _dist(channel_um)
    f = {"noncoherent": ber_noncoherent, "coherent": ber_coherent}[detection]
    b_lo = f(d.scale_mean(S_lo), a).value
    b_hi = f(d.scale_mean(S_hi), a).value
    return (math.log(b_lo) - math.log(b_hi)) / (math.log(S_hi) - math.log(S_lo))


# -- parametric rate optimization -------------------------------------------


def lambert_w0(v: float, tol: float = 1e-13) -> float:
    """Principal-branch Lambert W by Halley iteration; requires
    v >= -1/e.  The residual |W e^W - v| is driven below ~1e-12."""
    if v < -math.exp(-1.0) - 1e-15:
        raise ValueError(f"lambert_w0 requires v >= -1/e, got {v}")
    if v == 0.0:
        return 0.0
    if v < -math.exp(-1.0) + 1e-15:
        return -1.0
    w = v * math.exp(-v) if v > -0.25 else -1.0 + math.sqrt(2.0 * (1.0 + math.e * v))
    for _ in range(100):
        ew = math.exp(w)
        fw = w * ew - v
        if abs(fw) <= tol * max(abs(v), 1e-30):
            break
        denom = ew * (w + 1.0) - (w + 2.0) * fw / (2.0 * w + 2.0)
        w -= fw / denom
    return w


@dataclass(frozen=True)
class Optimum:
    """One point of the parametric optimal-rate curve."""

    theta: float
    g: float
    R_opt: float
    T_opt: float
    S: float
    boundary: bool
    notes: tuple[str, ...] = ()


def _optimum_from_g(theta, g, f_value):
    """Map the auxiliary ratio g = f/(theta f') to the optimal rate
    R* = g + W0(-g e^{-g}); g <= 1 has no interior optimum (R* = 0)."""
    if g <= 1.0 + 1e-12:
        return Optimum(theta, g, 0.0, 0.0, 0.0, boundary=True,
                       notes=("no interior optimum (g <= 1)",))
    R = g + lambert_w0(-g * math.exp(-g))
    S = math.expm1(R) / theta
    return Optimum(theta, g, R, R / f_value, S, boundary=False)


def optimize_rate(metric: str, channel, thetas, **kwargs) -> list[Optimum]:
    """Parametric throughput optimization over the auxiliary threshold
    parameter, for a unit-mean channel with theta = (e^R - 1)/S.

    Supported metrics: ``arq`` (channel: unit-mean distribution),
    ``harq_persistent`` (channel: rational transform; ``diversity`` kwarg),
    ``arq_interference`` (channel: interference scenario with unit-mean
    signal; handled in the bivariate module and dispatched here).
    Rows where the auxiliary ratio g <= 1 are flagged as boundary points.
    """
    out = []
    if metric == "arq":
        d = _dist(channel)
        if abs(d.mean - 1.0) > 1e-8:
            raise ValueError("optimize_rate expects a unit-mean channel")
        for th in thetas:
            E = outage(d, th).value
            fprime_density = d.pdf(th)
            f = 1.0 / (1.0 - E)
            g = (1.0 - E) / (th * fprime_density)
            out.append(_optimum_from_g(th, g, f))
        return out
    if metric == "harq_persistent":
        lt = _as_rational(channel)
        N = int(kwargs.get("diversity", 1))
        for th in thetas:
            if N == 1:
                pn = np.asarray(lt.p, float)
                qn = np.asarray(lt.q, float)
            else:
                pn = _poly_power(np.asarray(lt.p, float), N)
                qn = _poly_power(np.concatenate([lt.q, [1.0]]), N)[:-1]
            mean_tx, QI = _persistent_core(pn, qn, th)
            # f' = density of the compensated block: drop the augmented row
            d_ = len(qn)
            x_ = QI[0, 1:]
            Y_ = QI[1:, 1:]
            z_ = np.zeros(d_)
            z_[-1] = 1.0
            fprime = float(x_ @ matfun.expm(th * Y_) @ z_)
            g = mean_tx / (th * fprime)
            out.append(_optimum_from_g(th, g, mean_tx))
        return out
    if metric == "arq_interference":
        from . import bivariate
        for th in thetas:
            g, P = bivariate.interference_g_theta(channel, th)
            out.append(_optimum_from_g(th, g, 1.0 / P))
        return out
    raise ValueError(f"unknown optimization metric {metric!r}")


# -- high-SNR MIMO outage asymptote ------------------------------------------


def mimo_high_snr_outage(N: int, R: float, t: float) -> MetricResult:
    """High-SNR outage asymptote for an N x N MIMO channel capacity.

    The asymptotic capacity transform is rational with positive poles:
    t^{-N^2} prod_{n<N} n! * prod_{n=1..N} (s-n)^{-n}
    prod_{n=N+1..2N-1} (s-n)^{-(2N-n)}; the outage is its integral over
    (0, R), one augmented exponential of the upper-bidiagonal pole matrix.
    """
    N = int(N)
    if N < 2:
        raise ValueError("N must be at least 2")
    if R < 0:
        raise ValueError("R must be nonnegative")
    poles = []
    for n in range(1, N + 1):
        poles.extend([float(n)] * n)
    for n in range(N + 1, 2 * N):
        poles.extend([float(n)] * (2 * N - n))
    m = len(poles)  # == N^2
    scale = 1.0
    for n in range(N):
        scale *= math.factorial(n)
    Y = np.diag(poles) + np.diag(np.ones(m - 1), 1)
    QI = np.zeros((m + 1, m + 1))
    QI[0, 1] = 1.0
    QI[1:, 1:] = Y
    E = matfun.expm(R * QI)
    return _result(t ** (-m) * scale * E[0, -1], "closed_form")


def mimo_asymptote_generator(N: int) -> np.ndarray:
    """The augmented pole matrix used by :func:`mimo_high_snr_outage`."""
    N = int(N)
    poles = []
    for n in range(1, N + 1):
        poles.extend([float(n)] * n)
    for n in range(N + 1, 2 * N):
        poles.extend([float(n)] * (2 * N - n))
    m = len(poles)
    QI = np.zeros((m + 1, m + 1))
    QI[0, 1] = 1.0
    QI[1:, 1:] = np.diag(poles) + np.diag(np.ones(m - 1), 1)
    return QI
