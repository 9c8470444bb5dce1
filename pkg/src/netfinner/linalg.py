"""Small dense linear-algebra helpers shared by the quantum modules."""

from __future__ import annotations

from typing import Sequence

import numpy as np

EIG_FLOOR = 1e-12


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def psd_power(a: np.ndarray, power: float, floor: float = EIG_FLOOR) -> np.ndarray:
    """``a**power`` for Hermitian PSD ``a``; eigenvalues below ``floor`` map to 0.

    Negative powers therefore give the pseudo-inverse power on the support.
    """
    w, v = np.linalg.eigh(hermitian_part(a))
    keep = w > floor
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** power
    return (v * wp) @ dagger(v)


def support_projector(a: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(a))
    vs = v[:, w > floor]
    return vs @ dagger(vs)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def permute_subsystems(op: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square operator on ``dims``.

    Factor ``perm[k]`` of the input becomes factor ``k`` of the output.
    """
    n = len(dims)
    t = op.reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def permute_vector(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    return vec.reshape(tuple(dims)).transpose(list(perm)).reshape(-1)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_povm(d: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random ``k``-outcome POVM on dimension ``d`` (normalized Wishart elements)."""
    raw = []
    for _ in range(k):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        raw.append(g @ dagger(g))
    s = psd_power(sum(raw), -0.5, floor=0.0)
    return [hermitian_part(s @ r @ s) for r in raw]
