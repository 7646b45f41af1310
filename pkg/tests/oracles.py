"""Independent reference computations used only by the test-suite.

Nothing here imports the solver internals: the Gauss-Seidel oracle assembles
its own dense admittance matrix straight from the parsed case records.
"""

from __future__ import annotations

import cmath
import itertools
import math

import numpy as np


def dense_ybus(net) -> np.ndarray:
    idx = {b.id: i for i, b in enumerate(net.buses)}
    y = np.zeros((len(net.buses), len(net.buses)), dtype=complex)
    for br in net.branches:
        if not br.in_service:
            continue
        i, k = idx[br.from_bus], idx[br.to_bus]
        ys = 1 / complex(br.r, br.x)
        a = br.tap * cmath.exp(1j * br.shift)
        y[i, i] += (ys + 1j * br.b / 2) / (br.tap ** 2)
        y[k, k] += ys + 1j * br.b / 2
        y[i, k] += -ys / a.conjugate()
        y[k, i] += -ys / a
    for b in net.buses:
        y[idx[b.id], idx[b.id]] += complex(b.g_shunt, b.b_shunt)
    return y


def gauss_seidel(net, tol=1e-10, max_sweeps=200000, accel=1.0):
    """Plain Gauss-Seidel power flow (no reactive limits).

    Returns (v_mag, v_ang) ordered like ``net.buses``.
    """
    y = dense_ybus(net)
    n = len(net.buses)
    idx = {b.id: i for i, b in enumerate(net.buses)}
    base = net.mva_base
    p = np.array([-b.p_load for b in net.buses]) / base
    q = np.array([-b.q_load for b in net.buses]) / base
    vset = {}
    for g in net.generators:
        if g.in_service:
            p[idx[g.bus]] += g.p_set / base
            vset[idx[g.bus]] = g.v_set
    slack = next(i for i, b in enumerate(net.buses) if b.kind == "slack")
    v = np.ones(n, dtype=complex) * cmath.exp(1j * net.buses[slack].v_ang)
    for i, vs in vset.items():
        v[i] = vs * v[i] / abs(v[i])
    for sweep in range(max_sweeps):
        v_old = v.copy()
        for i in range(n):
            if i == slack:
                continue
            qi = q[i]
            if i in vset:
                qi = -(np.conj(v[i]) * (y[i] @ v)).imag
            s_conj = p[i] - 1j * qi
            new = (s_conj / np.conj(v[i]) - (y[i] @ v - y[i, i] * v[i])) / y[i, i]
            if i in vset:
                new = vset[i] * new / abs(new)
            else:
                new = v[i] + accel * (new - v[i])
            v[i] = new
        if np.max(np.abs(v - v_old)) < tol:
            return np.abs(v), np.angle(v), sweep
    raise RuntimeError("Gauss-Seidel did not converge")


def two_bus_lossless(p_load: float, x: float, v1: float = 1.0):
    """Closed form for a lossless line feeding a pure real load."""
    delta = 0.5 * math.asin(2 * p_load * x / v1 ** 2)
    return v1 * math.cos(delta), -delta


def two_bus_qv(v2: float, x: float, b_shunt: float = 0.0, v1: float = 1.0) -> float:
    """Fictitious-source reactive output at bus 2 of a lossless unloaded line."""
    return v2 * v2 * (1 / x - b_shunt) - v1 * v2 / x


def best_two_partition_1d(values):
    """Exhaustive search over all 2-partitions; returns (inertia, labels)."""
    vals = np.asarray(values, dtype=float)
    best = (math.inf, None)
    for labels in itertools.product((0, 1), repeat=len(vals)):
        if len(set(labels)) < 2 or labels[0] != 0:
            continue
        lab = np.array(labels)
        inertia = sum(((vals[lab == c] - vals[lab == c].mean()) ** 2).sum() for c in (0, 1))
        if inertia < best[0]:
            best = (inertia, labels)
    return best


def finite_difference_jacobian(func, x, h=1e-6):
    f0 = func(x)
    jac = np.zeros((len(f0), len(x)))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = h
        jac[:, j] = (func(x + e) - func(x - e)) / (2 * h)
    return jac
