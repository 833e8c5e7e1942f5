"""Steering vectors, line-of-sight components and Rician channel sampling.

Conventions: the BS->RIS matrix of BS s is M x N_s (RIS side first), its
rank-one LoS part is the outer product of the RIS-side and BS-side steering
vectors, and the RIS->user links are column vectors of length M.  All
large-scale gains are amplitude-domain factors already folded in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .scenario import RngStream, Scenario

__all__ = [
    "steering_vector",
    "LosComponents",
    "los_components",
    "ChannelSet",
    "sample_channels",
    "cascaded_channel",
]


def steering_vector(
    n: int, azimuth: float, elevation: float = 0.0, geometry_kind: str = "uniform-linear"
) -> np.ndarray:
    """Array response of an n-element half-wavelength uniform linear array.

    Entry i is ``exp(j*pi*i*sin(azimuth)*cos(elevation))``; entry 0 is 1 and
    every entry has unit modulus.
    """
    if n < 1:
        raise DimensionMismatch("steering vector needs n >= 1")
    if geometry_kind != "uniform-linear":
        raise DimensionMismatch(f"unsupported array geometry {geometry_kind!r}")
    phase = np.pi * np.arange(n) * np.sin(azimuth) * np.cos(elevation)
    return np.exp(1j * phase)


@dataclass(frozen=True)
class LosComponents:
    """Deterministic channel parts for every BS and user.

    ``h_bar_bs_ris[s]``: M x N_s rank-one LoS matrix of BS s (unit-modulus
    entries, no path loss; the l_s factor is applied when composing H_s).
    ``a_ris[s]``: the RIS-side steering column of that outer product.
    ``h_bar_users[s]``: M x K_s matrix whose columns are the LoS RIS->user
    vectors including their path-loss factors l_k.
    """

    h_bar_bs_ris: tuple[np.ndarray, ...]
    a_ris: tuple[np.ndarray, ...]
    a_bs: tuple[np.ndarray, ...]
    h_bar_users: tuple[np.ndarray, ...]


def los_components(scenario: Scenario) -> LosComponents:
    geo = scenario.geometry
    M = scenario.ris_elements
    h_bar_bs, a_ris_list, a_bs_list, h_bar_users = [], [], [], []
    for s in range(scenario.num_bs):
        a_m = steering_vector(M, geo.phi_r_az[s], geo.phi_r_el[s])
        a_n = steering_vector(scenario.bs_conf(s).num_antennas, geo.phi_t_az[s], geo.phi_t_el[s])
        h_bar_bs.append(np.outer(a_m, a_n.conj()))
        a_ris_list.append(a_m)
        a_bs_list.append(a_n)
        cols = []
        for k in range(scenario.bs_conf(s).num_users):
            a_u = steering_vector(M, geo.phi_ir_az[s][k], geo.phi_ir_el[s][k])
            cols.append(scenario.ris_user_gain[s][k] * a_u)
        h_bar_users.append(np.stack(cols, axis=1))
    return LosComponents(
        h_bar_bs_ris=tuple(h_bar_bs),
        a_ris=tuple(a_ris_list),
        a_bs=tuple(a_bs_list),
        h_bar_users=tuple(h_bar_users),
    )


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all links, with the LoS parts kept alongside."""

    bs_ris: tuple[np.ndarray, ...]      # H_s, M x N_s, path loss included
    users: tuple[np.ndarray, ...]       # M x K_s, path loss included
    los: LosComponents
    realization_id: int = 0


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries, unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_channels(
    scenario: Scenario,
    rng: RngStream | np.random.Generator,
    los: LosComponents | None = None,
    realization_id: int = 0,
) -> ChannelSet:
    """Draw one Rician realization of every BS->RIS and RIS->user link.

    ``H_s = l_s (sqrt(kappa/(1+kappa)) Hbar_s + sqrt(1/(1+kappa)) Htilde_s)``
    with i.i.d. unit-variance complex Gaussian scatter.  The user links use
    the per-BS user-side Rician factor; an infinite factor reproduces the
    LoS columns exactly.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if los is None:
        los = los_components(scenario)
    bs_ris, users = [], []
    for s in range(scenario.num_bs):
        conf = scenario.bs_conf(s)
        kappa = conf.rician_factor
        l_s = scenario.bs_ris_gain[s]
        shape = (scenario.ris_elements, conf.num_antennas)
        h_tilde = _cn(gen, shape)
        w_los = np.sqrt(kappa / (kappa + 1.0))
        w_nlos = np.sqrt(1.0 / (kappa + 1.0))
        bs_ris.append(l_s * (w_los * los.h_bar_bs_ris[s] + w_nlos * h_tilde))

        kappa_u = scenario.user_rician_factor(s)
        h_bar = los.h_bar_users[s]
        if np.isinf(kappa_u):
            users.append(h_bar.copy())
        else:
            tilde = _cn(gen, h_bar.shape) * scenario.ris_user_gain[s][np.newaxis, :]
            wu_los = np.sqrt(kappa_u / (kappa_u + 1.0))
            wu_nlos = np.sqrt(1.0 / (kappa_u + 1.0))
            users.append(wu_los * h_bar + wu_nlos * tilde)
    return ChannelSet(
        bs_ris=tuple(bs_ris), users=tuple(users), los=los, realization_id=realization_id
    )


def cascaded_channel(h_user: np.ndarray, theta: np.ndarray, h_bs: np.ndarray) -> np.ndarray:
    """Effective BS->user row vector through the RIS: ``h^H diag(theta) H``."""
    h_user = np.asarray(h_user)
    theta = np.asarray(theta)
    h_bs = np.asarray(h_bs)
    if h_user.ndim != 1 or theta.ndim != 1 or h_bs.ndim != 2:
        raise DimensionMismatch("expected (M,), (M,), (M, N) inputs")
    if not (h_user.shape[0] == theta.shape[0] == h_bs.shape[0]):
        raise DimensionMismatch(
            f"incompatible shapes {h_user.shape}, {theta.shape}, {h_bs.shape}"
        )
    return (h_user.conj() * theta) @ h_bs
