"""Empirical ergodic-rate estimation and closed-form comparison.

Trials are keyed to per-trial RNG substreams, so the estimate is invariant
to batching or parallel execution order.  Numerically degenerate draws
(Gram matrix beyond the ZF conditioning limit) are discarded and counted;
they must stay extremely rare for the estimate to be quotable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import LosComponents, los_components, sample_channels
from .errors import OutOfRange, RankDeficient, ShapeMismatch
from .ris import ReflectionDesign
from .rsma import COND_LIMIT, PowerSplit
from .scenario import RngStream, Scenario

__all__ = ["MonteCarloReport", "empirical_ergodic_rates", "ComparisonVerdict", "compare"]


@dataclass(frozen=True)
class MonteCarloReport:
    """Sample means and standard errors of the per-user rates of every BS."""

    common_mean: tuple[np.ndarray, ...]
    private_mean: tuple[np.ndarray, ...]
    common_stderr: tuple[np.ndarray, ...]
    private_stderr: tuple[np.ndarray, ...]
    trials: int
    discarded: int
    seed: int
    elapsed_s: float

    def bs_sum_rate(self, s: int) -> float:
        return float(np.min(self.common_mean[s]) + np.sum(self.private_mean[s]))

    @property
    def total_sum_rate(self) -> float:
        return sum(self.bs_sum_rate(s) for s in range(len(self.common_mean)))


def _resolve_thetas(
    reflection: ReflectionDesign | Sequence[np.ndarray], num_bs: int
) -> list[np.ndarray]:
    if isinstance(reflection, ReflectionDesign):
        return [reflection.theta(s) for s in range(num_bs)]
    thetas = [np.asarray(t) for t in reflection]
    if len(thetas) != num_bs:
        raise ShapeMismatch(f"expected {num_bs} reflection vectors, got {len(thetas)}")
    return thetas


def empirical_ergodic_rates(
    scenario: Scenario,
    reflection: ReflectionDesign | Sequence[np.ndarray],
    splits: Sequence[PowerSplit],
    trials: int,
    rng: RngStream,
    los: LosComponents | None = None,
    common_mode: str = "per_user",
) -> MonteCarloReport:
    """Average per-user rates over i.i.d. channel realizations.

    ``common_mode`` "per_user" evaluates each user's common SINR with the
    maximum-ratio precoder aimed at that user (the convention matched by the
    closed forms); "min_norm" transmits one common beam aimed at the weakest
    user.  The private SINRs always use zero forcing, for which the
    interference term collapses to P_p / [(G G^H)^{-1}]_kk.
    """
    if trials < 100:
        raise OutOfRange("need at least 100 trials for a quotable estimate")
    if common_mode not in ("per_user", "min_norm"):
        raise OutOfRange(f"unknown common_mode {common_mode!r}")
    t0 = time.time()
    if los is None:
        los = los_components(scenario)
    num_bs = scenario.num_bs
    thetas = _resolve_thetas(reflection, num_bs)
    if len(splits) != num_bs:
        raise ShapeMismatch(f"expected {num_bs} power splits, got {len(splits)}")

    sums_c = [np.zeros(scenario.bs_conf(s).num_users) for s in range(num_bs)]
    sums_c2 = [np.zeros(scenario.bs_conf(s).num_users) for s in range(num_bs)]
    sums_p = [np.zeros(scenario.bs_conf(s).num_users) for s in range(num_bs)]
    sums_p2 = [np.zeros(scenario.bs_conf(s).num_users) for s in range(num_bs)]
    kept = 0
    discarded = 0

    batch_size = 512
    for start in range(0, trials, batch_size):
        count = min(batch_size, trials - start)
        # Draws stay keyed to the trial index; only the linear algebra is
        # batched, so the estimate is independent of the batch size.
        batch = [
            sample_channels(scenario, rng.substream(start + i), los=los, realization_id=start + i)
            for i in range(count)
        ]
        valid = np.ones(count, dtype=bool)
        per_bs = []
        for s in range(num_bs):
            theta = thetas[s]
            h_users = np.stack([b.users[s] for b in batch])          # (B, M, K)
            h_bs = np.stack([b.bs_ris[s] for b in batch])            # (B, M, N)
            eff = h_users.conj() * theta[np.newaxis, :, np.newaxis]  # (B, M, K)
            g = np.einsum("bmk,bmn->bkn", eff, h_bs)                 # (B, K, N)
            gram = np.einsum("bkn,bjn->bkj", g, g.conj())
            eigs = np.linalg.eigvalsh(gram)
            good = (eigs[:, 0] > 0) & (eigs[:, -1] <= COND_LIMIT * eigs[:, 0])
            valid &= good
            k_users = gram.shape[1]
            inv_diag = np.full((count, k_users), np.nan)
            if np.any(good):
                inv = np.linalg.inv(gram[good])
                inv_diag[good] = np.real(np.einsum("bkk->bk", inv))
            norms2 = np.real(np.einsum("bkn,bkn->bk", g, g.conj()))
            per_bs.append((g, inv_diag, norms2))
        discarded += int(np.sum(~valid))
        if not np.any(valid):
            continue
        kept += int(np.sum(valid))
        for s, (g, inv_diag, norms2) in enumerate(per_bs):
            split = splits[s]
            sigma = _sigmas(scenario, s)[np.newaxis, :]
            g = g[valid]
            inv_diag = inv_diag[valid]
            norms2 = norms2[valid]
            interference = split.private_w / inv_diag
            if split.common_w > 0:
                if common_mode == "per_user":
                    signal = split.common_w * norms2
                else:
                    idx = np.argmin(norms2, axis=1)
                    rows = np.arange(g.shape[0])
                    beam = g[rows, idx].conj() / np.sqrt(norms2[rows, idx])[:, np.newaxis]
                    signal = split.common_w * np.abs(
                        np.einsum("bkn,bn->bk", g, beam)
                    ) ** 2
                rate_c = np.log2(1.0 + signal / (interference + sigma))
            else:
                rate_c = np.zeros_like(norms2)
            rate_p = np.log2(1.0 + split.private_w / (sigma * inv_diag))
            sums_c[s] += rate_c.sum(axis=0)
            sums_c2[s] += (rate_c**2).sum(axis=0)
            sums_p[s] += rate_p.sum(axis=0)
            sums_p2[s] += (rate_p**2).sum(axis=0)

    if kept == 0:
        raise RankDeficient("every trial was discarded; the scenario is degenerate")
    if discarded > 0.001 * trials:
        raise RankDeficient(
            f"{discarded}/{trials} trials discarded; exceeding the 0.1% budget"
        )

    def finalize(sums, sums2):
        mean = tuple(v / kept for v in sums)
        std = tuple(
            np.sqrt(np.maximum(v2 / kept - m**2, 0.0) / kept)
            for v2, m in zip(sums2, mean)
        )
        return mean, std

    common_mean, common_stderr = finalize(sums_c, sums_c2)
    private_mean, private_stderr = finalize(sums_p, sums_p2)
    return MonteCarloReport(
        common_mean=common_mean,
        private_mean=private_mean,
        common_stderr=common_stderr,
        private_stderr=private_stderr,
        trials=kept,
        discarded=discarded,
        seed=rng.seed,
        elapsed_s=time.time() - t0,
    )


def _sigmas(scenario: Scenario, s: int) -> np.ndarray:
    return np.array(
        [scenario.noise_variance(s, k) for k in range(scenario.bs_conf(s).num_users)]
    )


@dataclass(frozen=True)
class ComparisonVerdict:
    passed: bool
    max_relative_error: float
    worst_label: str
    per_user_error: dict[str, float]


def compare(
    closed_common: Sequence[np.ndarray],
    closed_private: Sequence[np.ndarray],
    empirical: MonteCarloReport,
    tolerance: float,
) -> ComparisonVerdict:
    """Per-user relative error of closed-form rates against the MC estimate."""
    if len(closed_common) != len(empirical.common_mean):
        raise ShapeMismatch("BS count differs between report and closed forms")
    errors: dict[str, float] = {}
    for s, (cc, cp) in enumerate(zip(closed_common, closed_private)):
        cc = np.asarray(cc, dtype=float)
        cp = np.asarray(cp, dtype=float)
        if cc.shape != empirical.common_mean[s].shape:
            raise ShapeMismatch(f"user count differs for BS {s}")
        for k in range(cc.shape[0]):
            ref_c = empirical.common_mean[s][k]
            ref_p = empirical.private_mean[s][k]
            errors[f"bs{s}/user{k}/common"] = abs(cc[k] - ref_c) / max(abs(ref_c), 1e-12)
            errors[f"bs{s}/user{k}/private"] = abs(cp[k] - ref_p) / max(abs(ref_p), 1e-12)
    worst_label = max(errors, key=errors.get)
    worst = errors[worst_label]
    return ComparisonVerdict(
        passed=worst <= tolerance,
        max_relative_error=worst,
        worst_label=worst_label,
        per_user_error=errors,
    )
