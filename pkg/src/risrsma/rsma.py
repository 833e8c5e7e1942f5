"""Rate-splitting transmit model: power split, precoders, SINRs and rates.

The common message uses a maximum-ratio precoder, the private messages use
zero forcing.  Because the users cancel the common stream before decoding
their private stream, the private SINR sees only residual inter-user
interference, which zero forcing nulls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, cascaded_channel
from .errors import DimensionMismatch, OutOfRange, RankDeficient, ZeroChannel

__all__ = [
    "PowerSplit",
    "split_power",
    "PrecoderSet",
    "zf_precoders",
    "mrt_common_precoder",
    "common_sinr",
    "private_sinr",
    "RatePoint",
    "instantaneous_rates",
    "nors_rate",
    "gram_inverse_diagonal",
]

COND_LIMIT = 1e10  # Gram-matrix condition number above which ZF refuses to invert


@dataclass(frozen=True)
class PowerSplit:
    """Common/private power partition of one BS's budget."""

    fraction_private: float   # t in (0, 1]
    total_w: float
    num_users: int

    @property
    def common_w(self) -> float:
        return (1.0 - self.fraction_private) * self.total_w

    @property
    def private_w(self) -> float:
        """Per-stream private power t*P/K."""
        return self.fraction_private * self.total_w / self.num_users


def split_power(total_w: float, t: float, num_users: int) -> PowerSplit:
    if total_w <= 0:
        raise OutOfRange(f"total power must be > 0, got {total_w}")
    if not 0.0 < t <= 1.0:
        raise OutOfRange(f"private fraction must lie in (0, 1], got {t}")
    if num_users < 1:
        raise OutOfRange("need at least one user")
    return PowerSplit(fraction_private=t, total_w=total_w, num_users=num_users)


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-norm common and private precoders for one BS."""

    w_common: np.ndarray    # (N,)
    w_private: np.ndarray   # (N, K), unit-norm columns
    zf_basis: np.ndarray    # F = G^H (G G^H)^{-1} before normalization


def gram_inverse_diagonal(g_matrix: np.ndarray) -> np.ndarray:
    """Diagonal of (G G^H)^{-1} via a Hermitian solve.

    Raises RankDeficient when the Gram matrix condition number exceeds
    COND_LIMIT; zero forcing over such a channel is numerically meaningless.
    """
    gram = g_matrix @ g_matrix.conj().T
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise RankDeficient(
            f"Gram matrix condition number {eigs[-1] / max(eigs[0], 1e-300):.2e} too high"
        )
    inv = np.linalg.solve(gram, np.eye(gram.shape[0], dtype=complex))
    return np.real(np.diag(inv))


def zf_precoders(g_matrix: np.ndarray) -> PrecoderSet:
    """Zero-forcing private precoders from the K x N effective channel.

    Column k of the returned private matrix is f_k / ||f_k|| with
    F = G^H (G G^H)^{-1}; the common precoder slot is filled by the caller.
    """
    g_matrix = np.asarray(g_matrix)
    if g_matrix.ndim != 2 or g_matrix.shape[0] > g_matrix.shape[1]:
        raise DimensionMismatch(f"expected K x N with N >= K, got {g_matrix.shape}")
    gram = g_matrix @ g_matrix.conj().T
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise RankDeficient(
            f"Gram matrix condition number {eigs[-1] / max(eigs[0], 1e-300):.2e} too high"
        )
    f = g_matrix.conj().T @ np.linalg.solve(gram, np.eye(gram.shape[0], dtype=complex))
    norms = np.linalg.norm(f, axis=0)
    w_private = f / norms[np.newaxis, :]
    return PrecoderSet(
        w_common=np.zeros(g_matrix.shape[1], dtype=complex),
        w_private=w_private,
        zf_basis=f,
    )


def mrt_common_precoder(g_row: np.ndarray) -> np.ndarray:
    """Maximum-ratio unit vector g^H / ||g|| for a 1 x N effective channel."""
    g_row = np.asarray(g_row).ravel()
    norm = np.linalg.norm(g_row)
    if norm == 0:
        raise ZeroChannel("cannot aim a precoder at a zero channel")
    return g_row.conj() / norm


def common_sinr(
    g_row: np.ndarray,
    w_common: np.ndarray,
    w_private: np.ndarray,
    split: PowerSplit,
    noise_variance: float,
) -> float:
    """Common-stream SINR: every private stream acts as interference."""
    signal = split.common_w * np.abs(g_row @ w_common) ** 2
    interference = split.private_w * np.sum(np.abs(g_row @ w_private) ** 2)
    return float(signal / (interference + noise_variance))


def private_sinr(
    g_row: np.ndarray,
    w_private: np.ndarray,
    split: PowerSplit,
    noise_variance: float,
    k: int,
) -> float:
    """Private-stream SINR of user k after common-stream cancellation."""
    gains = np.abs(g_row @ w_private) ** 2
    signal = split.private_w * gains[k]
    interference = split.private_w * (np.sum(gains) - gains[k])
    return float(signal / (interference + noise_variance))


@dataclass(frozen=True)
class RatePoint:
    """Instantaneous per-user rates of one BS for one channel realization."""

    common_rate: np.ndarray
    private_rate: np.ndarray
    sinr_common: np.ndarray
    sinr_private: np.ndarray

    @property
    def sum_rate(self) -> float:
        return float(np.min(self.common_rate) + np.sum(self.private_rate))


def _effective_channel(channels: ChannelSet, theta: np.ndarray, s: int) -> np.ndarray:
    h_users = channels.users[s]
    rows = [cascaded_channel(h_users[:, k], theta, channels.bs_ris[s]) for k in range(h_users.shape[1])]
    return np.stack(rows, axis=0)


def instantaneous_rates(
    channels: ChannelSet,
    theta: np.ndarray,
    split: PowerSplit,
    noise_variance: float,
    s: int = 0,
    common_mode: str = "min_norm",
) -> RatePoint:
    """Per-user instantaneous rates of BS s for one realization.

    ``common_mode`` picks the common precoder target: "min_norm" aims at the
    user with the weakest cascaded channel (the common rate is limited by
    the worst user), "per_user" evaluates each user's common SINR with a
    precoder aimed at that user, matching the per-user closed forms.
    """
    g = _effective_channel(channels, theta, s)
    k_count = g.shape[0]
    pre = zf_precoders(g)
    if common_mode == "min_norm":
        target = int(np.argmin(np.linalg.norm(g, axis=1)))
        w_c = mrt_common_precoder(g[target])
        sinr_c = np.array(
            [common_sinr(g[k], w_c, pre.w_private, split, noise_variance) for k in range(k_count)]
        )
    elif common_mode == "per_user":
        sinr_c = np.array(
            [
                common_sinr(g[k], mrt_common_precoder(g[k]), pre.w_private, split, noise_variance)
                for k in range(k_count)
            ]
        )
    else:
        raise OutOfRange(f"unknown common_mode {common_mode!r}")
    sinr_p = np.array(
        [private_sinr(g[k], pre.w_private, split, noise_variance, k) for k in range(k_count)]
    )
    return RatePoint(
        common_rate=np.log2(1.0 + sinr_c) if split.common_w > 0 else np.zeros(k_count),
        private_rate=np.log2(1.0 + sinr_p),
        sinr_common=sinr_c if split.common_w > 0 else np.zeros(k_count),
        sinr_private=sinr_p,
    )


def nors_rate(
    channels: ChannelSet, theta: np.ndarray, total_power_w: float, noise_variance: float, s: int = 0
) -> float:
    """Baseline without rate splitting: ZF only, per-user power P/K."""
    g = _effective_channel(channels, theta, s)
    k_count = g.shape[0]
    pre = zf_precoders(g)
    per_user = total_power_w / k_count
    rate = 0.0
    for k in range(k_count):
        gains = np.abs(g[k] @ pre.w_private) ** 2
        interference = per_user * (np.sum(gains) - gains[k])
        rate += np.log2(1.0 + per_user * gains[k] / (interference + noise_variance))
    return float(rate)
