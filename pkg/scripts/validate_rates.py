"""Quick closed-form vs Monte Carlo sanity sweep.

Run this after touching the analysis module.  Prints MGF/Jensen per-user
rates against a brute-force sampled estimate for a grid of (N, M, SNR,
kappa) settings at K = 3.
"""

import sys
import time

import numpy as np

from risrsma.analysis import (
    bs_jensen_rates,
    bs_mgf_rates,
)
from risrsma.channel import los_components, sample_channels
from risrsma.rsma import gram_inverse_diagonal, split_power
from risrsma.scenario import RngStream, ring_scenario


def brute_rates(scenario, los, theta, t, trials, seed):
    conf = scenario.bs_conf(0)
    split = split_power(conf.total_power_w, t, conf.num_users)
    sigma2 = scenario.noise_variance(0, 0)
    stream = RngStream(seed=seed, stream_id=0)
    commons = np.zeros(conf.num_users)
    privates = np.zeros(conf.num_users)
    for trial in range(trials):
        ch = sample_channels(scenario, stream.substream(trial), los=los)
        g = (ch.users[0].conj().T * theta[np.newaxis, :]) @ ch.bs_ris[0]
        inv_diag = gram_inverse_diagonal(g)
        norms2 = np.sum(np.abs(g) ** 2, axis=1)
        gamma_c = split.common_w * norms2 / (split.private_w / inv_diag + sigma2)
        gamma_p = split.private_w / (sigma2 * inv_diag)
        commons += np.log2(1.0 + gamma_c)
        privates += np.log2(1.0 + gamma_p)
    return commons / trials, privates / trials


def main():
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    t = 0.5
    for kappa in (1.0, 3.0, 10.0):
        for n_ant, m_elems in ((10, 5), (30, 10)):
            for snr_db in (20.0, 40.0):
                power = 10 ** (snr_db / 10.0)
                sc = ring_scenario(
                    1, n_ant, 3, m_elems, total_power_w=power, rician_factor=kappa
                )
                los = los_components(sc)
                rng = np.random.default_rng(7)
                theta = np.exp(2j * np.pi * rng.random(m_elems))
                t0 = time.time()
                mc_c, mc_p = brute_rates(sc, los, theta, t, trials, seed=123)
                dt = time.time() - t0
                mgf_c, mgf_p = bs_mgf_rates(los, sc, 0, theta, t)
                jen_c, jen_p = bs_jensen_rates(los, sc, 0, theta, t)
                err = lambda a, b: np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12))
                print(
                    f"kappa={kappa:5.1f} N={n_ant:3d} M={m_elems:3d} snr={snr_db:4.1f} "
                    f"mgf_c_err={err(mgf_c, mc_c):6.3%} mgf_p_err={err(mgf_p, mc_p):6.3%} "
                    f"jen_c_err={err(jen_c, mc_c):6.3%} jen_p_err={err(jen_p, mc_p):6.3%} "
                    f"({dt:.1f}s MC)"
                )


if __name__ == "__main__":
    main()
