"""Reference computations written without touching the qvote package.

Everything here works on flat numpy arrays with explicit index arithmetic, so
a shared bug between the library and its tests is unlikely.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def candidate_bitstrings(kind: str, K: int) -> tuple[list[str], list[str]]:
    """(bitstring flipped per candidate, support of the candidate state)."""
    if kind == "bell-pair":
        return ["11", "00"], ["00", "11"]
    if kind == "w-state":
        m = K - 1
        labels = ["0" * m] + [format(1 << (k - 1), f"0{m}b") for k in range(1, K)]
        return labels, sorted(labels)
    m = max(1, math.ceil(math.log2(K)))
    labels = [format(k, f"0{m}b") for k in range(K)]
    return labels, labels


def classical_shares(choices, K):
    cast = [c for c in choices if c is not None]
    V = len(cast)
    return V, [cast.count(k) / V if V else 0.0 for k in range(K)]


def brute_force_tally(choices, K, kind):
    """Exact (P(control=1), candidate shares) by direct state evolution.

    Register: id (n bits) | control | candidates (m bits), first is most significant.
    """
    N = len(choices)
    labels, support = candidate_bitstrings(kind, K)
    m = len(labels[0])
    n = max(1, (N - 1).bit_length())
    dim = 2 ** (n + 1 + m)
    psi = np.zeros(dim, dtype=complex)
    amp = 1 / math.sqrt(N * 2 * len(support))
    for j in range(N):
        for c in (0, 1):
            for s in support:
                psi[(j << (m + 1)) | (c << m) | int(s, 2)] = amp
    for idx in range(dim):
        j = idx >> (m + 1)
        c = (idx >> m) & 1
        s = idx & ((1 << m) - 1)
        if c == 1 and j < N and choices[j] is not None and s == int(labels[choices[j]], 2):
            psi[idx] *= -1
    # Hadamard on the control bit
    out = psi.copy()
    for idx in range(dim):
        if (idx >> m) & 1 == 0:
            a0, a1 = psi[idx], psi[idx | (1 << m)]
            out[idx] = (a0 + a1) / math.sqrt(2)
            out[idx | (1 << m)] = (a0 - a1) / math.sqrt(2)
    probs = np.abs(out) ** 2
    p1 = sum(probs[i] for i in range(dim) if (i >> m) & 1)
    shares = [0.0] * K
    if p1 > 1e-12:
        for i in range(dim):
            if (i >> m) & 1:
                lab = format(i & ((1 << m) - 1), f"0{m}b")
                if lab in labels:
                    shares[labels.index(lab)] += probs[i] / p1
    return float(p1), shares


def all_choice_vectors(N, K):
    return itertools.product([None, *range(K)], repeat=N)


def dense_unitary_controlled(num_qubits, controls, target, gate):
    """Full 2^n x 2^n matrix of a controlled single-qubit gate, built column by column."""
    dim = 2**num_qubits
    U = np.zeros((dim, dim), dtype=complex)
    shift = lambda q: num_qubits - 1 - q
    for col in range(dim):
        fires = all(((col >> shift(q)) & 1) == b for q, b in controls)
        if not fires:
            U[col, col] = 1
            continue
        t = (col >> shift(target)) & 1
        base = col & ~(1 << shift(target))
        for out_bit in (0, 1):
            U[base | (out_bit << shift(target)), col] += gate[out_bit, t]
    return U


def binomial_band_hits(p, shots, estimate, sigmas=3.0):
    se = math.sqrt(p * (1 - p) / shots)
    return abs(estimate - p) <= sigmas * se + 1e-15
