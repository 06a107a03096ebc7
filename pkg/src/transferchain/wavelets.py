"""Wavelet filters on the circle and their scaling functions.

Everything that can be done in coefficient space is done there: |m0|^2 is
the autocorrelation trigonometric polynomial of the filter taps, and the
weighted Ruelle operator acts on Fourier coefficients by convolution with
that autocorrelation followed by index decimation.  This makes the fixed
point identity for the harmonic function an exact (round-off level) check
instead of a quadrature-limited one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, GridFunction

__all__ = [
    "WaveletFilter",
    "ScalingFunction",
    "HarmonicSequence",
    "haar_filter",
    "stretched_box_filter",
    "box_scaling_function",
    "cascade",
    "autocorrelation",
    "verify_ruelle_fixed",
    "slanted_toeplitz",
    "intertwine_check",
]


@dataclass(frozen=True)
class WaveletFilter:
    """Low-pass filter m0(t) = sum_k a_k e^{2 pi i k t} with real taps.

    ``coeffs[k]`` is the tap at integer offset ``offset + k``.  |m0|^2 is
    carried as the real autocorrelation sequence c_j = sum_k a_k a_{k+j},
    an exact trigonometric polynomial independent of the offset.
    """

    N: int
    coeffs: np.ndarray
    offset: int = 0
    name: str = ""

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("branching factor N must be >= 2")
        a = np.asarray(self.coeffs, dtype=float).copy()
        a.flags.writeable = False
        object.__setattr__(self, "coeffs", a)

    @property
    def autocorr(self) -> np.ndarray:
        """c_j for j = 0 .. len(coeffs)-1 (c_{-j} = c_j)."""
        a = self.coeffs
        full = np.correlate(a, a, mode="full")
        return full[len(a) - 1 :]

    def m0_sq(self, t):
        """|m0(t)|^2 evaluated exactly from the autocorrelation."""
        t = np.asarray(t, dtype=float)
        c = self.autocorr
        out = np.full(t.shape, c[0])
        for j in range(1, len(c)):
            out = out + 2.0 * c[j] * np.cos(2 * np.pi * j * t)
        return out

    @property
    def is_normalized(self) -> bool:
        """QMF condition (1/N) sum_k |m0((t+k)/N)|^2 = 1, i.e. c_{jN} = delta_j."""
        c = self.autocorr
        if abs(c[0] - 1.0) > 1e-12:
            return False
        lags = np.arange(self.N, len(c), self.N)
        return bool(np.all(np.abs(c[lags]) <= 1e-12)) if lags.size else True

    def normalization_residual(self, grid: Grid) -> float:
        t = grid.nodes
        s = np.zeros_like(t)
        for k in range(self.N):
            s += self.m0_sq((t + k) / self.N)
        return float(np.max(np.abs(s / self.N - 1.0)))


def haar_filter() -> WaveletFilter:
    return WaveletFilter(N=2, coeffs=np.array([1.0, 1.0]) / np.sqrt(2), name="haar")


def stretched_box_filter(m: int) -> WaveletFilter:
    """Two equal taps at offsets 0 and 2m+1; scaling function is the box
    (2m+1)^{-1/2} on [0, 2m+1] and the harmonic function is a Fejer kernel."""
    if m < 1:
        raise ValueError("m must be >= 1")
    a = np.zeros(2 * m + 2)
    a[0] = a[-1] = 1.0 / np.sqrt(2)
    return WaveletFilter(N=2, coeffs=a, name=f"box-{m}")


@dataclass(frozen=True)
class ScalingFunction:
    """Samples of phi0 at step N^-J over [0, extent].

    samples[i] is the value on the half-open cell [i*step, (i+1)*step); this
    convention makes integrals of the shipped box-type fixed points exact.
    """

    N: int
    J: int
    samples: np.ndarray
    sup_delta: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def step(self) -> float:
        return float(self.N) ** (-self.J)

    @property
    def cells_per_unit(self) -> int:
        return self.N**self.J

    @property
    def integral(self) -> float:
        return float(self.samples.sum() * self.step)

    def value_at_cells(self, idx: np.ndarray) -> np.ndarray:
        """phi0 at sample cells idx (0 outside the stored support)."""
        idx = np.asarray(idx)
        out = np.zeros(idx.shape, dtype=float)
        ok = (idx >= 0) & (idx < self.samples.size)
        out[ok] = self.samples[idx[ok]]
        return out


def cascade(filt: WaveletFilter, J: int, iters: int,
            start: "ScalingFunction | None" = None) -> ScalingFunction:
    """Iterate phi <- sqrt(N) sum_k a_k phi(N . - k), by default from the
    unit box; ``start`` substitutes another initial profile (e.g. to verify
    that a directly constructed scaling function is refinement-invariant).

    The refinement only ever reads phi at points of its own sample grid, so
    no interpolation enters; box-type fixed points are reproduced exactly.
    """
    if iters < 1:
        raise ValueError("need at least one cascade iteration")
    N, cpu = filt.N, filt.N**J
    k_max = filt.offset + len(filt.coeffs) - 1
    if filt.offset < 0:
        raise ValueError("cascade assumes nonnegative tap offsets")
    extent = max(1, int(np.ceil(k_max / (N - 1))) if N > 1 else 1)
    size = extent * cpu
    phi = np.zeros(size)
    if start is not None:
        if start.N != N or start.J != J:
            raise ValueError("start profile must share N and J")
        m = min(size, start.samples.size)
        phi[:m] = start.samples[:m]
    else:
        phi[:cpu] = 1.0  # unit box on [0, 1)
    root_n = np.sqrt(N)
    idx = np.arange(size) * N
    delta = np.inf
    for _ in range(iters):
        new = np.zeros(size)
        for k, a_k in enumerate(filt.coeffs):
            if a_k == 0.0:
                continue
            src = idx - (filt.offset + k) * cpu
            ok = (src >= 0) & (src < size)
            new[ok] += root_n * a_k * phi[src[ok]]
        delta = float(np.max(np.abs(new - phi)))
        phi = new
        if np.max(np.abs(phi)) > 1e6:
            raise ArithmeticError("cascade iteration diverged")
    return ScalingFunction(N=N, J=J, samples=phi, sup_delta=delta)


def box_scaling_function(m: int, J: int) -> ScalingFunction:
    """(2m+1)^{-1/2} * indicator of [0, 2m+1], sampled at step 2^-J."""
    cpu = 2**J
    samples = np.full((2 * m + 1) * cpu, 1.0 / np.sqrt(2 * m + 1))
    return ScalingFunction(N=2, J=J, samples=samples, sup_delta=0.0)


@dataclass(frozen=True)
class HarmonicSequence:
    """Autocorrelation r_n of phi0 and the harmonic function h(t) it spans.

    h(t) = sum_n r_n e^{2 pi i n t} = r_0 + 2 sum_{n>0} r_n cos(2 pi n t).
    """

    coeffs: np.ndarray  # r_0 .. r_M, with r_{-n} = r_n

    def __post_init__(self):
        r = np.asarray(self.coeffs, dtype=float).copy()
        r.flags.writeable = False
        object.__setattr__(self, "coeffs", r)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        r = self.coeffs
        out = np.full(t.shape, r[0])
        for n in range(1, len(r)):
            out = out + 2.0 * r[n] * np.cos(2 * np.pi * n * t)
        return out

    def __call__(self, t):
        return self.eval(t)

    def as_grid_function(self, grid: Grid) -> GridFunction:
        if grid.domain_kind != "circle":
            raise ValueError("harmonic functions live on circle grids")
        return GridFunction(grid, self.eval(grid.nodes))

    @property
    def full_coeffs(self) -> np.ndarray:
        """Symmetric coefficient array for lags -M..M."""
        r = self.coeffs
        return np.concatenate((r[:0:-1], r))


def autocorrelation(phi: ScalingFunction) -> HarmonicSequence:
    """r_n = int phi0(x+n) phi0(x) dx on the sample grid (exact for boxes)."""
    s, cpu, step = phi.samples, phi.cells_per_unit, phi.step
    max_shift = (s.size - 1) // cpu
    r = np.empty(max_shift + 1)
    for n in range(max_shift + 1):
        r[n] = step * float(np.dot(s[n * cpu :], s[: s.size - n * cpu]))
    while len(r) > 1 and abs(r[-1]) < 1e-15:
        r = r[:-1]
    return HarmonicSequence(coeffs=r)


def _ruelle_coeffs(filt: WaveletFilter, h: HarmonicSequence) -> np.ndarray:
    """Coefficients of R h where (Rf)(t) = (1/N) sum_k (|m0|^2 f)((t+k)/N).

    Multiplication by |m0|^2 is convolution with the autocorrelation of the
    taps; averaging over the N preimages keeps every N-th coefficient.
    """
    c = filt.autocorr
    c_full = np.concatenate((c[:0:-1], c))  # lags -(L-1)..(L-1)
    r_full = h.full_coeffs
    conv = np.convolve(c_full, r_full)  # lags -(L-1+M)..(L-1+M)
    mid = (len(conv) - 1) // 2
    max_p = mid // filt.N
    return np.array([conv[mid + filt.N * p] for p in range(max_p + 1)])


def verify_ruelle_fixed(filt: WaveletFilter, h: HarmonicSequence, grid_n: int = 1024) -> float:
    """Max node residual of R h - h, both sides from coefficient arithmetic."""
    rh = _ruelle_coeffs(filt, h)
    m = max(len(rh), len(h.coeffs))
    a = np.zeros(m)
    a[: len(rh)] = rh
    b = np.zeros(m)
    b[: len(h.coeffs)] = h.coeffs
    resid = HarmonicSequence(coeffs=a - b)
    grid = Grid(0.0, 1.0, grid_n, "circle")
    return float(np.max(np.abs(resid.eval(grid.nodes))))


def slanted_toeplitz(filt: WaveletFilter, size: int) -> np.ndarray:
    """Finite section of (S xi)_n = sum_j a_{n - jN} xi_j on [-size, size]^2."""
    k_max = filt.offset + len(filt.coeffs) - 1
    if size < k_max:
        raise ValueError("size must cover the filter support")
    rng = np.arange(-size, size + 1)
    S = np.zeros((rng.size, rng.size))
    for col, j in enumerate(rng):
        for row, n in enumerate(rng):
            k = n - j * filt.N - filt.offset
            if 0 <= k < len(filt.coeffs):
                S[row, col] = filt.coeffs[k]
    return S


def apply_slanted(filt: WaveletFilter, xi: dict) -> dict:
    """(S xi)_n = sum_j a_{n-jN} xi_j for a sparse sequence {index: value}."""
    out: dict = {}
    for j, xj in xi.items():
        for k, a_k in enumerate(filt.coeffs):
            n = filt.offset + k + j * filt.N
            out[n] = out.get(n, 0.0) + a_k * xj
    return out


def intertwine_check(filt: WaveletFilter, phi: ScalingFunction, xi: dict) -> float:
    """Sup over the coarse sample mesh of |K(S xi)(x) - (U K xi)(x)|.

    (K xi)(x) = sum_n xi_n phi0(x - n); (U g)(x) = N^{-1/2} g(x/N).  The mesh
    is the set of sample points whose image under x -> x/N is again a sample
    point, so both sides evaluate by exact indexing.
    """
    if not xi:
        return 0.0
    N, cpu = phi.N, phi.cells_per_unit
    sxi = apply_slanted(filt, xi)
    lo = min(min(xi), min(sxi)) - 1
    hi = max(max(xi), max(sxi)) + (phi.samples.size // cpu) + 2
    # coarse mesh: x = i * N * step
    i_cells = np.arange(lo * cpu // N, hi * cpu // N + 1) * N
    lhs = np.zeros(i_cells.size)
    for n, v in sxi.items():
        lhs += v * phi.value_at_cells(i_cells - n * cpu)
    rhs = np.zeros(i_cells.size)
    for j, v in xi.items():
        rhs += v * phi.value_at_cells(i_cells // N - j * cpu)
    rhs /= np.sqrt(N)
    return float(np.max(np.abs(lhs - rhs)))
