"""Closed-form MMSE receivers on the bundled paper scene.

The uplink and sensing filters are Q^{-1} g: they maximize a generalized
Rayleigh quotient, so their SINR equals the largest generalized eigenvalue.
"""
import numpy as np
import scipy.linalg as sla

from nfisac.ao import initialize
from nfisac.channel import build_channel_set
from nfisac.config import load_bundled
from nfisac.metrics import transmit_covariance
from nfisac.receive import (RxDesignInputs, optimal_sensing_rx, optimal_uplink_rx, sensing_inn_matrix,
                            uplink_inn_matrix)
from nfisac.transmit import DesignInputs

sc = load_bundled("paper_fig5").scenario
ch = build_channel_set(sc)
bf = initialize(DesignInputs.from_scenario(sc, ch))     # matched-filter start at 30 dBm
rx = RxDesignInputs(ch, transmit_covariance(bf), sc.powers)

for l in range(sc.L):
    w = optimal_uplink_rx(l, rx)
    h = ch.uplink[l]
    num = sc.powers.uplink_tx[l] * np.outer(h, h.conj())
    q = uplink_inn_matrix(l, rx)
    sinr = np.vdot(w, num @ w).real / np.vdot(w, q @ w).real
    lam = sla.eigh(num, q, eigvals_only=True)[-1]
    mf = h / np.linalg.norm(h)
    sinr_mf = np.vdot(mf, num @ mf).real / np.vdot(mf, q @ mf).real
    print(f"uplink {l}: MMSE {10 * np.log10(sinr):6.2f} dB (eigen {10 * np.log10(lam):6.2f}),"
          f" matched filter {10 * np.log10(sinr_mf):6.2f} dB")

for m in range(sc.M):
    u = optimal_sensing_rx(m, rx)
    g = ch.targets[m]
    num = g @ rx.r_x @ g.conj().T
    q = sensing_inn_matrix(m, rx)
    sinr = np.vdot(u, num @ u).real / np.vdot(u, q @ u).real
    print(f"target {m}: sensing SINR {10 * np.log10(sinr):6.2f} dB")
