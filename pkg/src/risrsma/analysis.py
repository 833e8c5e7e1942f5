"""Closed-form ergodic rates and the quadratic-form reduction of the private SINR.

Two families of closed forms are provided, both built from the long-term
channel statistics (LoS geometry, Rician factors, path losses) for a given
reflection vector theta:

* MGF forms: the exact ergodic rate written as a one-dimensional integral
  over products of moment generating functions, evaluated with
  Gauss-Laguerre quadrature.  The effective-channel power ||g||^2 is modeled
  as Gamma(N, nu) where nu is the per-antenna power scale; the zero-forcing
  SINR scale 1/[(G G^H)^{-1}]_kk is modeled as Gamma(N-K+1, rate Psi_k)
  via a moment-matched central Wishart.  A "printed" variant with shape N/2
  and scale 2*nu is kept behind a flag; it fails the Monte Carlo oracle and
  exists for comparison only.

* Jensen forms: log2(1 + ratio of means).  The private form equals
  log2(1 + (N-K-1) P_p / (Psi_k sigma^2)) and is exactly a ratio of two
  Hermitian quadratic forms in theta, which is what the phase optimizer
  maximizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy.linalg import cho_factor, cho_solve

from .channel import LosComponents
from .errors import (
    DimensionMismatch,
    OrderUnsupported,
    QuadratureDiverged,
    SingularStatistics,
)
from .rsma import PowerSplit, split_power
from .scenario import Scenario

__all__ = [
    "Quadrature",
    "gauss_laguerre",
    "MomentHelpers",
    "moment_helpers",
    "ergodic_common_rate_mgf",
    "ergodic_private_rate_mgf",
    "ergodic_common_rate_jensen",
    "ergodic_private_rate_jensen",
    "QuadraticForms",
    "quadratic_forms",
    "private_sinr_ratio",
    "selection_embedded_sinr",
    "ergodic_sum_rate",
    "bs_jensen_rates",
    "bs_mgf_rates",
    "nors_jensen_rate",
]

LN2 = math.log(2.0)
COND_LIMIT = 1e10


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)


def gauss_laguerre(n: int) -> Quadrature:
    """Order-n Gauss-Laguerre rule: exact for z^d e^{-z}, d <= 2n-1."""
    if not 1 <= n <= 128:
        raise OrderUnsupported(f"order must be in [1, 128], got {n}")
    nodes, weights = laggauss(n)
    return Quadrature(nodes=nodes, weights=weights)


# ---------------------------------------------------------------------------
# Moment helpers
# ---------------------------------------------------------------------------

def _hermitian_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with a conditioning guard (no explicit inversion)."""
    eigs = np.linalg.eigvalsh(matrix)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise SingularStatistics(
            f"statistics matrix condition number {eigs[-1] / max(eigs[0], 1e-300):.2e} too high"
        )
    return cho_solve(cho_factor(matrix, lower=True), rhs)


@dataclass(frozen=True)
class MomentHelpers:
    """Scalar statistics of one (BS, user, theta) triple.

    nu: per-antenna power scale of the cascaded channel, so the mean of
    ||g||^2 is N*nu.  psi: diagonal element of the inverse of the
    moment-matched column covariance of G (drives the ZF SINR).  f_k is the
    aligned LoS inner product h^H diag(theta) a_ris; delta = kappa/(1+kappa).
    a1/a2/eta only feed the literal printed variant of the common Jensen
    numerator.
    """

    nu: float
    psi: float
    f_k: complex
    delta: float
    a1: float
    a2: float
    eta: float
    nu_printed: float
    c_nlos: float
    a_los: float
    num_antennas: int
    num_users: int


def moment_helpers(
    los: LosComponents, theta: np.ndarray, scenario: Scenario, s: int, k: int
) -> MomentHelpers:
    conf = scenario.bs_conf(s)
    n_ant, k_users = conf.num_antennas, conf.num_users
    if n_ant < k_users + 2:
        raise DimensionMismatch("closed forms need N >= K + 2")
    kappa = conf.rician_factor
    delta = kappa / (1.0 + kappa)
    l_s = float(scenario.bs_ris_gain[s])
    h_bar = los.h_bar_users[s][:, k]
    a_m = los.a_ris[s]

    f_k = complex((h_bar.conj() * theta) @ a_m)
    norm_h2 = float(np.real(h_bar.conj() @ h_bar))
    c_nlos = l_s**2 * (1.0 - delta) * norm_h2
    a_los = l_s**2 * delta * abs(f_k) ** 2
    nu = c_nlos + a_los
    nu_printed = c_nlos + n_ant * a_los

    h_r = los.h_bar_users[s]
    lam = l_s**2 * (1.0 - delta) * (h_r.conj().T @ h_r)
    w = (h_r.conj().T * theta[np.newaxis, :]) @ a_m   # entries h_j^H diag(theta) a_m
    a3 = lam + l_s**2 * delta * np.outer(w, w.conj())
    e_k = np.zeros(k_users, dtype=complex)
    e_k[k] = 1.0
    psi = float(np.real(_hermitian_solve(a3, e_k)[k]))

    los_quad = n_ant * abs(f_k) ** 2          # h^H Theta Hbar Hbar^H Theta^H h
    a1 = los_quad**2
    a2 = los_quad * n_ant * norm_h2
    eta = 1.0 / (k_users * n_ant * nu) if nu > 0 else math.inf
    return MomentHelpers(
        nu=nu,
        psi=psi,
        f_k=f_k,
        delta=delta,
        a1=a1,
        a2=a2,
        eta=eta,
        nu_printed=nu_printed,
        c_nlos=c_nlos,
        a_los=a_los,
        num_antennas=n_ant,
        num_users=k_users,
    )


# ---------------------------------------------------------------------------
# MGF rates
# ---------------------------------------------------------------------------

_HEAD_SPLIT = 4.0  # boundary between the clustered head rule and the Laguerre tail


def _common_quadrature_sum(
    helpers: MomentHelpers,
    split: PowerSplit,
    noise_variance: float,
    quad: Quadrature,
    form: str,
) -> float:
    # The integrand (1/z)(1 - M_x(z)) M_y(z) e^{-z} concentrates below
    # z ~ sigma^2 Psi / P_p at medium/high SNR, far under the smallest
    # Laguerre node, so a single-scale rule loses essentially all the mass.
    # Composite rule: Gauss-Legendre on [0, T] under z = T v^2 (nodes cluster
    # toward 0) plus a shifted Gauss-Laguerre tail for [T, inf).
    n_ant, k_users = helpers.num_antennas, helpers.num_users
    if form == "resolved":
        exp_x = float(n_ant)
        scale_x = helpers.nu * split.common_w / noise_variance
    elif form == "printed":
        exp_x = n_ant / 2.0
        scale_x = 2.0 * helpers.nu_printed * split.common_w / noise_variance
    else:
        raise ValueError(f"unknown form {form!r}")
    exp_y = n_ant - k_users + 1
    scale_y = split.private_w / (noise_variance * helpers.psi)

    def integrand_over_z(z: np.ndarray) -> np.ndarray:
        ramp = -np.expm1(-exp_x * np.log1p(scale_x * z))   # 1 - M_x
        mgf_y = np.exp(-exp_y * np.log1p(scale_y * z))
        return ramp * mgf_y / z

    from scipy.special import roots_legendre

    # Head: substitute z = e^u so the decades between the ramp scale
    # 1/(exp_x scale_x) and the decay scale 1/(exp_y scale_y) are sampled
    # uniformly in log; below z_low the integrand is flat (value exp_x*scale_x)
    # and a midpoint term suffices.
    z_low = 0.3 * min(1.0, 1.0 / (1.0 + scale_x * exp_x), 1.0 / (1.0 + scale_y * exp_y))
    u_nodes, u_weights = roots_legendre(quad.order)
    lo, hi = math.log(z_low), math.log(_HEAD_SPLIT)
    u = 0.5 * (u_nodes + 1.0) * (hi - lo) + lo
    z_head = np.exp(u)
    head = 0.5 * (hi - lo) * np.sum(
        u_weights * integrand_over_z(z_head) * np.exp(-z_head) * z_head
    )
    head += z_low * integrand_over_z(np.array([z_low / 2.0]))[0] * math.exp(-z_low / 2.0)
    z_tail = _HEAD_SPLIT + quad.nodes
    tail = math.exp(-_HEAD_SPLIT) * np.sum(quad.weights * integrand_over_z(z_tail))
    return float((head + tail) / LN2)


def ergodic_common_rate_mgf(
    helpers: MomentHelpers,
    split: PowerSplit,
    noise_variance: float,
    quadrature: Quadrature | None = None,
    form: str = "resolved",
    check_convergence: bool = True,
    convergence_tol: float = 1e-2,
) -> float:
    """Ergodic common rate from the MGF integral, bits/s/Hz.

    When ``check_convergence`` is set the rule order is doubled and a
    relative change above ``convergence_tol`` raises QuadratureDiverged.
    """
    if split.common_w == 0.0:
        return 0.0
    quad = quadrature or gauss_laguerre(32)
    value = _common_quadrature_sum(helpers, split, noise_variance, quad, form)
    if check_convergence and 2 * quad.order <= 128:
        refined = _common_quadrature_sum(
            helpers, split, noise_variance, gauss_laguerre(2 * quad.order), form
        )
        if abs(refined - value) > convergence_tol * max(abs(refined), 1e-12):
            raise QuadratureDiverged(
                f"order {quad.order}->{2 * quad.order} changed the rate "
                f"{value:.6g}->{refined:.6g}"
            )
        value = refined
    return value


def _private_quadrature_sum(
    helpers: MomentHelpers, split: PowerSplit, noise_variance: float, quad: Quadrature
) -> float:
    # E log2(1 + P_p y / sigma^2) with y ~ Gamma(N-K+1, rate Psi); substitute
    # t = Psi*y so the Laguerre weight absorbs the exponential factor.
    n_ant, k_users = helpers.num_antennas, helpers.num_users
    shape = n_ant - k_users + 1
    t = quad.nodes
    log_density = (shape - 1) * np.log(t) - math.lgamma(shape)
    rate_at_t = np.log1p(split.private_w * t / (noise_variance * helpers.psi)) / LN2
    return float(np.sum(quad.weights * np.exp(log_density) * rate_at_t))


def ergodic_private_rate_mgf(
    helpers: MomentHelpers,
    split: PowerSplit,
    noise_variance: float,
    quadrature: Quadrature | None = None,
    check_convergence: bool = True,
    convergence_tol: float = 1e-2,
) -> float:
    """Ergodic private rate averaged over the ZF SINR distribution, bits/s/Hz."""
    if split.private_w == 0.0 or split.fraction_private == 0.0:
        return 0.0
    quad = quadrature or gauss_laguerre(32)
    value = _private_quadrature_sum(helpers, split, noise_variance, quad)
    if check_convergence and 2 * quad.order <= 128:
        refined = _private_quadrature_sum(
            helpers, split, noise_variance, gauss_laguerre(2 * quad.order)
        )
        if abs(refined - value) > convergence_tol * max(abs(refined), 1e-12):
            raise QuadratureDiverged(
                f"order {quad.order}->{2 * quad.order} changed the rate "
                f"{value:.6g}->{refined:.6g}"
            )
        value = refined
    return value


# ---------------------------------------------------------------------------
# Jensen rates
# ---------------------------------------------------------------------------

def _mean_g4(helpers: MomentHelpers) -> float:
    """E ||g||^4 for i.i.d. CN(mean, c) entries with |mean|^2 = a_los."""
    n, a, c = helpers.num_antennas, helpers.a_los, helpers.c_nlos
    return n**2 * (a + c) ** 2 + n * c**2 + 2.0 * n * c * a


def ergodic_common_rate_jensen(
    helpers: MomentHelpers,
    split: PowerSplit,
    noise_variance: float,
    numerator_form: str = "mean_power",
) -> float:
    """Common rate approximation log2(1 + E{num}/E{den}).

    ``mean_power`` (default) uses the exact means on both sides: numerator
    P_c * N * nu and interference P_p * (N-K+1) / Psi (the mean of the
    Gamma(N-K+1, Psi) interference scale).  The literal transcription of the
    source derivation is available as ``printed`` (numerator P_c * E||g||^4,
    dimensionally inflated, interference with N-K-1 degrees of freedom) and
    ``printed_eta`` (the same with the eta normalization folded in); both
    kept only for comparison, neither passes the Monte Carlo oracle.
    """
    if split.common_w == 0.0:
        return 0.0
    n_ant, k_users = helpers.num_antennas, helpers.num_users
    if numerator_form == "mean_power":
        numerator = split.common_w * n_ant * helpers.nu
        dof = n_ant - k_users + 1
    elif numerator_form == "printed":
        numerator = split.common_w * _mean_g4(helpers)
        dof = n_ant - k_users - 1
    elif numerator_form == "printed_eta":
        numerator = split.common_w * helpers.eta * _mean_g4(helpers)
        dof = n_ant - k_users - 1
    else:
        raise ValueError(f"unknown numerator_form {numerator_form!r}")
    interference = split.private_w * dof / helpers.psi
    return float(np.log2(1.0 + numerator / (interference + noise_variance)))


def ergodic_private_rate_jensen(
    helpers: MomentHelpers, split: PowerSplit, noise_variance: float
) -> float:
    """Private rate approximation log2(1 + (N-K-1) P_p / (Psi sigma^2))."""
    if split.private_w == 0.0 or split.fraction_private == 0.0:
        return 0.0
    n_ant, k_users = helpers.num_antennas, helpers.num_users
    sinr = split.private_w * (n_ant - k_users - 1) / (helpers.psi * noise_variance)
    return float(np.log2(1.0 + sinr))


# ---------------------------------------------------------------------------
# Quadratic-form reduction of the private SINR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticForms:
    """Matrices re-expressing 1/Psi_k as a ratio of quadratic forms in theta.

    For any unit-modulus theta:
      [ (Lambda + delta_eff * P theta theta^H P^H)^{-1} ]_kk
          = (theta^H A theta) / (theta^H B theta),
    with B = I/M + delta_eff * P^H Lambda^{-1} P and
    A = [Lambda^{-1}]_kk * B - delta_eff * s s^H.  B is Hermitian PSD; A is
    Hermitian and theta^H A theta > 0 on the unit-modulus sphere.
    """

    b_mat: np.ndarray
    a_mat: np.ndarray
    s_vec: np.ndarray
    lam_inv_kk: float
    delta_eff: float
    user: int

    @property
    def c_mat(self) -> np.ndarray:
        return self.a_mat + self.b_mat

    def scaled(self, factor: float) -> "QuadraticForms":
        """Scale the numerator form so the ratio becomes factor/Psi."""
        return QuadraticForms(
            b_mat=factor * self.b_mat,
            a_mat=self.a_mat,
            s_vec=self.s_vec,
            lam_inv_kk=self.lam_inv_kk,
            delta_eff=self.delta_eff,
            user=self.user,
        )


def quadratic_forms(
    los: LosComponents, scenario: Scenario, s: int, k: int
) -> QuadraticForms:
    conf = scenario.bs_conf(s)
    kappa = conf.rician_factor
    delta = kappa / (1.0 + kappa)
    l_s = float(scenario.bs_ris_gain[s])
    h_r = los.h_bar_users[s]
    a_m = los.a_ris[s]
    m_elems = a_m.shape[0]
    k_users = conf.num_users

    lam = l_s**2 * (1.0 - delta) * (h_r.conj().T @ h_r)
    p_mat = h_r.conj().T * a_m[np.newaxis, :]          # K x M, rows h_j^H diag(a_m)
    lam_inv_p = _hermitian_solve(lam, p_mat)           # Lambda^{-1} P
    delta_eff = l_s**2 * delta
    b_mat = np.eye(m_elems, dtype=complex) / m_elems + delta_eff * (
        p_mat.conj().T @ lam_inv_p
    )
    e_k = np.zeros(k_users, dtype=complex)
    e_k[k] = 1.0
    lam_inv_kk = float(np.real(_hermitian_solve(lam, e_k)[k]))
    s_vec = lam_inv_p[k].conj()                        # P^H Lambda^{-1} e_k
    a_mat = lam_inv_kk * b_mat - delta_eff * np.outer(s_vec, s_vec.conj())
    return QuadraticForms(
        b_mat=b_mat,
        a_mat=a_mat,
        s_vec=s_vec,
        lam_inv_kk=lam_inv_kk,
        delta_eff=delta_eff,
        user=k,
    )


def quad_form(theta: np.ndarray, matrix: np.ndarray) -> float:
    return float(np.real(theta.conj() @ matrix @ theta))


def private_sinr_ratio(
    theta: np.ndarray,
    qf: QuadraticForms,
    split: PowerSplit,
    noise_variance: float,
    num_antennas: int,
) -> float:
    """(N-K-1) P_p (theta^H B theta) / ((theta^H A theta) sigma^2)."""
    n_minus = num_antennas - split.num_users - 1
    return (
        n_minus
        * split.private_w
        * quad_form(theta, qf.b_mat)
        / (quad_form(theta, qf.a_mat) * noise_variance)
    )


def selection_embedded_sinr(phi: np.ndarray, v: np.ndarray, qf: QuadraticForms) -> float:
    """Quadratic-form ratio with the selection folded in through b = 1 + v*(e^{j phi}-1).

    For binary v this equals the ratio at theta = exp(j*phi*v); fractional v
    interpolates along the chord and is what the relaxed selection search
    optimizes.
    """
    b = 1.0 + np.asarray(v) * (np.exp(1j * np.asarray(phi, dtype=float)) - 1.0)
    return quad_form(b, qf.b_mat) / quad_form(b, qf.a_mat)


def ergodic_sum_rate(common_rates: np.ndarray, private_rates: np.ndarray) -> float:
    """BS sum rate: worst-user common rate plus all private rates."""
    common_rates = np.asarray(common_rates, dtype=float)
    private_rates = np.asarray(private_rates, dtype=float)
    if common_rates.shape != private_rates.shape:
        raise DimensionMismatch("common/private rate vectors must have equal length")
    return float(np.min(common_rates) + np.sum(private_rates))


# ---------------------------------------------------------------------------
# Per-BS convenience wrappers used by the optimizer and the CLI
# ---------------------------------------------------------------------------

def bs_jensen_rates(
    los: LosComponents,
    scenario: Scenario,
    s: int,
    theta: np.ndarray,
    t: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-user (common, private) Jensen rates of BS s at private fraction t."""
    conf = scenario.bs_conf(s)
    split = split_power(conf.total_power_w, t, conf.num_users)
    commons, privates = [], []
    for k in range(conf.num_users):
        helpers = moment_helpers(los, theta, scenario, s, k)
        sigma2 = scenario.noise_variance(s, k)
        commons.append(ergodic_common_rate_jensen(helpers, split, sigma2))
        privates.append(ergodic_private_rate_jensen(helpers, split, sigma2))
    return np.array(commons), np.array(privates)


def bs_mgf_rates(
    los: LosComponents,
    scenario: Scenario,
    s: int,
    theta: np.ndarray,
    t: float,
    quadrature: Quadrature | None = None,
    form: str = "resolved",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-user (common, private) MGF rates of BS s at private fraction t."""
    conf = scenario.bs_conf(s)
    split = split_power(conf.total_power_w, t, conf.num_users)
    commons, privates = [], []
    for k in range(conf.num_users):
        helpers = moment_helpers(los, theta, scenario, s, k)
        sigma2 = scenario.noise_variance(s, k)
        commons.append(
            ergodic_common_rate_mgf(helpers, split, sigma2, quadrature, form=form)
        )
        privates.append(ergodic_private_rate_mgf(helpers, split, sigma2, quadrature))
    return np.array(commons), np.array(privates)


def nors_jensen_rate(
    los: LosComponents, scenario: Scenario, s: int, theta: np.ndarray
) -> float:
    """Closed-form baseline without rate splitting: ZF with per-user power P/K."""
    conf = scenario.bs_conf(s)
    per_user = conf.total_power_w / conf.num_users
    total = 0.0
    for k in range(conf.num_users):
        helpers = moment_helpers(los, theta, scenario, s, k)
        sigma2 = scenario.noise_variance(s, k)
        sinr = per_user * (conf.num_antennas - conf.num_users - 1) / (helpers.psi * sigma2)
        total += math.log2(1.0 + sinr)
    return total
