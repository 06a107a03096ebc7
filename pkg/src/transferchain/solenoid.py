"""Circle-solenoid structures: backward path prefixes of t -> Nt mod 1,
the shift and its inverse, the line embedding, the positive-definite
function on the N-adic rationals, and coordinate distributions.

A prefix (t_0, .., t_K) satisfies N t_{k+1} = t_k (mod 1); extending it is
one move of the filter's Markov chain, so ensembles of solenoid paths are
ordinary path ensembles of a circle branch system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grids import DiscreteMeasure, Grid, GridFunction
from .operators import RadonNikodymWeight
from .chains import PathEnsemble, PathFunctional, ScalingCheckResult, apply_scaling_check
from .wavelets import HarmonicSequence, WaveletFilter

__all__ = [
    "SolenoidPrefix",
    "FilterProduct",
    "extend_prefix",
    "extension_probabilities",
    "shift_hat",
    "shift_inverse",
    "embed_line",
    "apply_scaling_U",
    "filter_product",
    "pd_value",
    "pd_gram",
    "pi_k_distribution",
]


@dataclass(frozen=True)
class SolenoidPrefix:
    """Angles (t_0, .., t_K) in [0,1) with N t_{k+1} = t_k (mod 1)."""

    N: int
    angles: np.ndarray

    def __post_init__(self):
        a = np.mod(np.asarray(self.angles, dtype=float), 1.0)
        a.flags.writeable = False
        object.__setattr__(self, "angles", a)
        if a.size == 0:
            raise ValueError("prefix needs at least one angle")
        if self.invariant_violation() > 1e-12:
            raise ValueError("angles violate the solenoid constraint")

    def invariant_violation(self) -> float:
        a = self.angles
        if a.size < 2:
            return 0.0
        d = np.abs(np.mod(self.N * a[1:], 1.0) - a[:-1])
        return float(np.max(np.minimum(d, 1.0 - d)))

    def __len__(self) -> int:
        return self.angles.size


def extension_probabilities(p: SolenoidPrefix, filt: WaveletFilter, h) -> np.ndarray:
    """Branch law of the next angle: (1/N) |m0(w)|^2 h(w) / h(t_K) over the
    N preimages w = (t_K + j)/N.  Sums to 1 when h is harmonic."""
    t = p.angles[-1]
    pre = (t + np.arange(p.N)) / p.N
    h_t = float(np.asarray(h.eval(np.array([t])))[0])
    probs = filt.m0_sq(pre) * np.asarray(h.eval(pre)) / (p.N * h_t)
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(
            f"extension probabilities sum to {total!r}; h is not harmonic"
        )
    return probs / total


def extend_prefix(p: SolenoidPrefix, filt: WaveletFilter, h,
                  rng: np.random.Generator) -> SolenoidPrefix:
    """Append the next angle drawn from the filter's Markov move."""
    probs = extension_probabilities(p, filt, h)
    j = int(np.searchsorted(np.cumsum(probs), rng.random(), side="left"))
    j = min(j, p.N - 1)
    nxt = (p.angles[-1] + j) / p.N
    return SolenoidPrefix(p.N, np.concatenate((p.angles, [nxt])))


def shift_hat(p: SolenoidPrefix) -> SolenoidPrefix:
    """sigma-hat: prepend N t_0 mod 1 (path gets one angle longer)."""
    first = np.mod(p.N * p.angles[0], 1.0)
    return SolenoidPrefix(p.N, np.concatenate(([first], p.angles)))


def shift_inverse(p: SolenoidPrefix) -> SolenoidPrefix:
    """sigma-hat^{-1}: drop the leading angle."""
    if len(p) < 2:
        raise ValueError("cannot shift a single-angle prefix back")
    return SolenoidPrefix(p.N, p.angles[1:])


def embed_line(N: int, t: float, K: int) -> SolenoidPrefix:
    """gamma_N: the real number t as the prefix (t, t/N, .., t/N^K) mod 1."""
    if K < 0:
        raise ValueError("K must be >= 0")
    angles = np.mod(t / float(N) ** np.arange(K + 1), 1.0)
    return SolenoidPrefix(N, angles)


def apply_scaling_U(pe: PathEnsemble, psi: PathFunctional,
                    W: RadonNikodymWeight) -> ScalingCheckResult:
    """Monte Carlo unitarity check of U psi = sqrt(W o pi_0) (psi o sigma-hat)."""
    return apply_scaling_check(pe, psi, W)


# ---------------------------------------------------------------------------
# coefficient-space machinery for |m^(k)|^2 and the positive-definite function
# ---------------------------------------------------------------------------

def _conv_dict(a: dict, b: dict) -> dict:
    out: dict = {}
    for i, u in a.items():
        for j, v in b.items():
            k = i + j
            out[k] = out.get(k, 0.0) + u * v
    return out


def _autocorr_dict(filt: WaveletFilter, stride: int = 1) -> dict:
    c = filt.autocorr
    out = {0: complex(c[0])}
    for j in range(1, len(c)):
        if c[j] != 0.0:
            out[j * stride] = complex(c[j])
            out[-j * stride] = complex(c[j])
    return out


def _harmonic_dict(h: HarmonicSequence) -> dict:
    r = h.coeffs
    out = {0: complex(r[0])}
    for n in range(1, len(r)):
        if r[n] != 0.0:
            out[n] = complex(r[n])
            out[-n] = complex(r[n])
    return out


def _ruelle_step_dict(g: dict, c: dict, N: int) -> dict:
    """(R g)^(p) = (c * g)(N p) for coefficient dictionaries."""
    out: dict = {}
    for q, v in g.items():
        for l, w in c.items():
            m = q + l
            if m % N == 0:
                p = m // N
                out[p] = out.get(p, 0.0) + v * w
    return out


def _eval_dict(g: dict, t: float) -> complex:
    return complex(sum(v * np.exp(2j * np.pi * k * t) for k, v in g.items()))


def pd_value(filt: WaveletFilter, h: HarmonicSequence, n: int, k: int,
             z_angle: float) -> complex:
    """L(n / N^k) = (R^k (e_n h))(z) with everything in coefficient space."""
    if k < 0:
        raise ValueError("k must be >= 0")
    c = _autocorr_dict(filt)
    g = {key + n: val for key, val in _harmonic_dict(h).items()}
    for _ in range(k):
        g = _ruelle_step_dict(g, c, filt.N)
    return _eval_dict(g, z_angle)


def pd_gram(filt: WaveletFilter, h: HarmonicSequence,
            points: Sequence[tuple], z_angle: float) -> np.ndarray:
    """Gram matrix G[u, v] = L(n_u/N^{k_u} - n_v/N^{k_v}) on the N-adic
    rationals, assembled after common-denominator reduction."""
    N = filt.N
    ks = [k for (_, k) in points]
    if any(k < 0 for k in ks):
        raise ValueError("denominators N^k need k >= 0")
    K = max(ks)
    nums = [n * N ** (K - k) for (n, k) in points]
    m = len(points)
    G = np.empty((m, m), dtype=complex)
    cache: dict = {}
    for u in range(m):
        for v in range(m):
            d = nums[u] - nums[v]
            if d not in cache:
                cache[d] = pd_value(filt, h, d, K, z_angle)
            G[u, v] = cache[d]
    herm_defect = float(np.max(np.abs(G - G.conj().T)))
    if herm_defect > 1e-8:
        raise ArithmeticError(f"Gram matrix not Hermitian (defect {herm_defect:.2e})")
    return G


@dataclass(frozen=True)
class FilterProduct:
    """|m^(k)(t)|^2 = prod_{j<k} |m0(N^j t)|^2 as an exact trig polynomial."""

    filt: WaveletFilter
    k: int
    coeffs: dict  # lag -> complex coefficient

    def values(self, grid: Grid) -> GridFunction:
        t = (grid.nodes - grid.lower) / grid.width
        vals = np.array([_eval_dict(self.coeffs, ti).real for ti in t])
        return GridFunction(grid, vals)


def filter_product(filt: WaveletFilter, k: int) -> FilterProduct:
    coeffs = {0: complex(1.0)}
    for j in range(k):
        coeffs = _conv_dict(coeffs, _autocorr_dict(filt, stride=filt.N**j))
    return FilterProduct(filt=filt, k=k, coeffs=coeffs)


def pi_k_distribution(filt: WaveletFilter, h: HarmonicSequence, k: int,
                      grid: Grid) -> DiscreteMeasure:
    """Law of the k-th solenoid coordinate: density |m^(k)|^2 h on the circle.

    Cell masses are exact integrals of the trigonometric polynomial, so the
    total mass equals the constant coefficient (1 for a harmonic h of unit
    mean) to round-off.
    """
    if grid.domain_kind != "circle":
        raise ValueError("coordinate laws live on circle grids")
    dens = _conv_dict(filter_product(filt, k).coeffs, _harmonic_dict(h))
    edges = (grid.edges - grid.lower) / grid.width
    masses = np.full(grid.n, float(np.real(dens.get(0, 0.0))) * grid.dx / grid.width)
    for m, coef in dens.items():
        if m == 0:
            continue
        prim = (np.exp(2j * np.pi * m * edges[1:]) -
                np.exp(2j * np.pi * m * edges[:-1])) / (2j * np.pi * m)
        masses += np.real(coef * prim)
    total = masses.sum()
    if abs(total - 1.0) > 1e-8:
        raise ArithmeticError(f"coordinate density mass {total!r} differs from 1")
    return DiscreteMeasure(grid, np.clip(masses, 0.0, None) / total, normalized=True)
