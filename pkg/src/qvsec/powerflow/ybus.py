"""Bus admittance matrix assembly (pi-model branches, off-nominal taps, phase shift)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..network import Network


@dataclass(frozen=True)
class YbusMatrix:
    bus_ids: tuple[int, ...]
    matrix: sp.csr_matrix
    yf: sp.csr_matrix  # branch-from currents = yf @ V
    yt: sp.csr_matrix  # branch-to currents = yt @ V

    @property
    def dimension(self) -> int:
        return len(self.bus_ids)

    def entry(self, i: int, k: int) -> complex:
        idx = {b: n for n, b in enumerate(self.bus_ids)}
        return complex(self.matrix[idx[i], idx[k]])

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_ybus(network: Network) -> YbusMatrix:
    """Assemble Ybus on the network MVA base.

    HVDC links contribute nothing here; they enter the power flow as bus
    injections. Out-of-service branches are omitted.
    """
    n = len(network.buses)
    index = network.bus_index
    nbr = len(network.branches)
    f = np.array([index[b.from_bus] for b in network.branches], dtype=int)
    t = np.array([index[b.to_bus] for b in network.branches], dtype=int)
    status = np.array([b.in_service for b in network.branches], dtype=float)
    r = np.array([b.r for b in network.branches], dtype=float)
    x = np.array([b.x for b in network.branches], dtype=float)
    charging = np.array([b.b for b in network.branches], dtype=float)
    tap = np.array([b.tap for b in network.branches], dtype=float)
    shift = np.array([b.shift for b in network.branches], dtype=float)

    ys = status / (r + 1j * x) if nbr else np.zeros(0, complex)
    bc = status * charging
    ratio = tap * np.exp(1j * shift)
    ytt = ys + 0.5j * bc
    yff = ytt / (tap * tap)
    yft = -ys / np.conj(ratio)
    ytf = -ys / ratio

    rows = np.arange(nbr)
    yf = sp.csr_matrix((np.r_[yff, yft], (np.r_[rows, rows], np.r_[f, t])), shape=(nbr, n))
    yt = sp.csr_matrix((np.r_[ytf, ytt], (np.r_[rows, rows], np.r_[f, t])), shape=(nbr, n))
    ysh = np.array([b.g_shunt + 1j * b.b_shunt for b in network.buses], dtype=complex)
    cf = sp.csr_matrix((np.ones(nbr), (rows, f)), shape=(nbr, n))
    ct = sp.csr_matrix((np.ones(nbr), (rows, t)), shape=(nbr, n))
    y = (cf.T @ yf + ct.T @ yt + sp.diags(ysh)).tocsr()
    y.sum_duplicates()
    return YbusMatrix(bus_ids=network.bus_ids, matrix=y, yf=yf.tocsr(), yt=yt.tocsr())
