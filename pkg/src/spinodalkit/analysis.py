"""Microstructure descriptors for two-phase composition fields.

Four families of diagnostics:

* spectral — a characteristic domain length from the first moment of the
  power spectrum (in-house radix-2 FFT; grids must be powers of two);
* clustering — connected components of a thresholded phase map under
  4-connectivity (run-based union-find), with spanning tests;
* percolation — a Monte Carlo site-percolation threshold estimate;
* transport — effective sheet resistance of the composite from a
  Kirchhoff/Laplace solve with harmonic-mean bond conductances.

Clustering and spanning use non-periodic boundaries (electrodes break
periodicity) even though the underlying composition field is periodic;
the mismatch is deliberate and only affects edge-touching clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fields import GridSpec, ScalarField2D

__all__ = [
    "NoStructureError",
    "LinearSolveError",
    "Phase",
    "PhaseMap",
    "ClusterLabeling",
    "ConductivityMap",
    "AnalysisRow",
    "fft2",
    "characteristic_length",
    "label_clusters",
    "spans",
    "percolation_threshold_mc",
    "effective_sheet_resistance",
    "dense_sheet_resistance",
    "analyze_field",
    "write_report_csv",
    "REPORT_HEADER",
]

REPORT_HEADER = ("time,char_length,ti_fraction,n_clusters,largest_cluster,"
                 "spans_x,spans_y,R_eff_x,R_eff_y")


class NoStructureError(ValueError):
    """The field is constant; no length scale can be extracted."""


class LinearSolveError(RuntimeError):
    """Conjugate gradient failed to reach the target residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# Spectral length scale
# ---------------------------------------------------------------------------

def _bit_reversed(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def _fft_last_axis(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey along the last axis (forward,
    unnormalized, e^{-2*pi*i*jk/n} convention)."""
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ValueError(f"transform length must be a power of two, got {n}")
    if n == 1:
        return x.astype(np.complex128, copy=True)
    shape = x.shape
    x = x[..., _bit_reversed(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        w = np.exp((-2j * np.pi / size) * np.arange(half))
        blocks = x.reshape(shape[:-1] + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * w
        x = np.concatenate((even + odd, even - odd), axis=-1).reshape(shape)
        size *= 2
    return x


def fft2(a: np.ndarray) -> np.ndarray:
    """2D forward DFT via row-column decomposition; both sides must be
    powers of two."""
    a = np.asarray(a)
    out = _fft_last_axis(a)
    out = _fft_last_axis(out.swapaxes(-1, -2)).swapaxes(-1, -2)
    return out


def _wavenumbers(n: int, h: float) -> np.ndarray:
    """Signed angular wavenumbers 2*pi*m/(n*h), m = 0..n/2-1, -n/2..-1."""
    m = (np.arange(n) + n // 2) % n - n // 2
    return (2.0 * np.pi / (n * h)) * m


def characteristic_length(f: ScalarField2D) -> float:
    """First-moment length L = 2*pi * sum S(k) / sum |k| S(k), k != 0,
    where S is the power spectrum of the mean-subtracted field.

    A pure sinusoid of wavelength lam gives L = lam exactly; white noise
    gives a few cell spacings.  Invariant under cyclic shifts and x -> 1-x.
    """
    nx, ny = f.spec.nx, f.spec.ny
    if nx & (nx - 1) or ny & (ny - 1):
        raise ValueError(f"spectral analysis needs power-of-two grids, got {nx}x{ny}")
    v = f.values
    if float(v.max()) == float(v.min()):
        raise NoStructureError("constant field has no structure")
    spectrum = np.abs(fft2(v - v.mean())) ** 2
    kx = _wavenumbers(nx, f.spec.h)
    ky = _wavenumbers(ny, f.spec.h)
    kmag = np.hypot(ky[:, None], kx[None, :])
    mask = kmag > 0.0
    s = spectrum[mask]
    return float(2.0 * np.pi * s.sum() / (kmag[mask] * s).sum())


# ---------------------------------------------------------------------------
# Phase maps and cluster labeling
# ---------------------------------------------------------------------------

class Phase(Enum):
    TI_RICH = "ti-rich"
    AL_RICH = "al-rich"


@dataclass(frozen=True)
class PhaseMap:
    """Per-cell phase tags from thresholding a composition field at x_c
    (cells with x >= x_c are Ti-rich)."""

    spec: GridSpec
    ti_rich: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        m = np.asarray(self.ti_rich, dtype=bool)
        if m.shape != (self.spec.ny, self.spec.nx):
            raise ValueError(f"mask shape {m.shape} does not match grid "
                             f"({self.spec.ny}, {self.spec.nx})")
        object.__setattr__(self, "ti_rich", m)

    @classmethod
    def from_field(cls, f: ScalarField2D, x_c: float = 0.5) -> "PhaseMap":
        return cls(spec=f.spec, ti_rich=f.values >= x_c, threshold=x_c)

    def mask(self, phase: Phase) -> np.ndarray:
        return self.ti_rich if phase is Phase.TI_RICH else ~self.ti_rich

    def fraction(self, phase: Phase) -> float:
        return float(self.mask(phase).mean())


@dataclass(frozen=True)
class ClusterLabeling:
    """labels: 0 background, 1..n clusters in row-major first-touch order."""

    labels: np.ndarray
    sizes: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.sizes.size)

    @property
    def largest(self) -> int:
        return int(self.sizes.max()) if self.sizes.size else 0


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def _runs_and_unions(mask: np.ndarray) -> tuple[np.ndarray, int, _UnionFind]:
    """Decompose a boolean mask into horizontal runs and union vertically
    adjacent ones (Hoshen-Kopelman on run granularity).

    Returns (run_id grid with -1 on background, run count, union-find).
    """
    is_start = mask.copy()
    is_start[:, 1:] &= ~mask[:, :-1]
    run_id = np.cumsum(is_start.ravel(), dtype=np.int64).reshape(mask.shape) - 1
    n_runs = int(is_start.sum())
    run_id = np.where(mask, run_id, -1)

    uf = _UnionFind(n_runs)
    if n_runs:
        both = mask[:-1, :] & mask[1:, :]
        if both.any():
            a = run_id[:-1, :][both]
            b = run_id[1:, :][both]
            pairs = np.unique(a * n_runs + b)
            for key in pairs.tolist():
                uf.union(key // n_runs, key % n_runs)
    return run_id, n_runs, uf


def label_clusters(pmap: PhaseMap, phase: Phase = Phase.TI_RICH) -> ClusterLabeling:
    """Connected components of the chosen phase under 4-connectivity
    (non-periodic).  Every phase cell gets exactly one positive label;
    sizes sum to the phase's cell count."""
    mask = pmap.mask(phase)
    run_id, n_runs, uf = _runs_and_unions(mask)
    if n_runs == 0:
        return ClusterLabeling(labels=np.zeros(mask.shape, dtype=np.int32),
                               sizes=np.zeros(0, dtype=np.int64))

    compact: dict[int, int] = {}
    label_of_run = np.empty(n_runs, dtype=np.int32)
    for r in range(n_runs):
        root = uf.find(r)
        lab = compact.get(root)
        if lab is None:
            lab = len(compact) + 1
            compact[root] = lab
        label_of_run[r] = lab

    labels = np.where(mask, label_of_run[run_id], 0).astype(np.int32)
    sizes = np.bincount(labels.ravel(), minlength=len(compact) + 1)[1:].astype(np.int64)
    return ClusterLabeling(labels=labels, sizes=sizes)


def spans(labeling: ClusterLabeling, axis: str) -> bool:
    """True iff some single cluster touches both opposite edges along axis
    ('x': left and right columns; 'y': top and bottom rows)."""
    labels = labeling.labels
    if axis == "x":
        first, last = labels[:, 0], labels[:, -1]
    elif axis == "y":
        first, last = labels[0, :], labels[-1, :]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    common = np.intersect1d(first, last)
    return bool((common > 0).any())


def _mask_spans_y(mask: np.ndarray) -> bool:
    """Top-to-bottom spanning test without building the full labeling."""
    if not (mask[0, :].any() and mask[-1, :].any()):
        return False
    run_id, n_runs, uf = _runs_and_unions(mask)
    top = {uf.find(r) for r in np.unique(run_id[0, :]) if r >= 0}
    if not top:
        return False
    for r in np.unique(run_id[-1, :]):
        if r >= 0 and uf.find(r) in top:
            return True
    return False


def percolation_threshold_mc(L: int, trials: int, seed: int,
                             tol: float = 1e-3) -> tuple[float, float]:
    """Site-percolation spanning threshold on an L x L grid, 4-connectivity.

    Each trial draws one uniform field u (seed+trial_index), occupies cells
    with u < p, and bisects p to the spanning onset; spanning is monotone in
    p on a fixed u so the per-trial threshold is well defined.  Returns the
    trial mean and its standard error.
    """
    if L < 32:
        raise ValueError(f"grid size must be >= 32, got {L}")
    if trials < 50:
        raise ValueError(f"trial count must be >= 50, got {trials}")
    estimates = np.empty(trials)
    for trial in range(trials):
        u = np.random.default_rng(seed + trial).random((L, L))
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _mask_spans_y(u < mid):
                hi = mid
            else:
                lo = mid
        estimates[trial] = 0.5 * (lo + hi)
    p_hat = float(estimates.mean())
    stderr = float(estimates.std(ddof=1) / math.sqrt(trials))
    return p_hat, stderr


# ---------------------------------------------------------------------------
# Effective sheet resistance (random resistor network)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConductivityMap:
    """Per-cell conductivities (arbitrary conductance units), all > 0."""

    spec: GridSpec
    sigma: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.sigma, dtype=np.float64))
        if s.shape != (self.spec.ny, self.spec.nx):
            raise ValueError(f"sigma shape {s.shape} does not match grid "
                             f"({self.spec.ny}, {self.spec.nx})")
        if not np.isfinite(s).all() or (s <= 0).any():
            raise ValueError("all conductivities must be positive and finite")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def from_phase_map(cls, pmap: PhaseMap, sigma_ti: float = 1.0,
                       sigma_al: float = 1e-4) -> "ConductivityMap":
        """Two-phase contrast map; the poorly conducting phase keeps a small
        positive floor so the linear system stays nonsingular."""
        sigma = np.where(pmap.ti_rich, float(sigma_ti), float(sigma_al))
        return cls(spec=pmap.spec, sigma=sigma)


def _bond_conductances(s: np.ndarray):
    """Internal bonds are series pairs of half-cells: g = 2 s1 s2/(s1+s2).
    Electrode bonds are single half-cells: g = 2 s."""
    gh = 2.0 * s[:, :-1] * s[:, 1:] / (s[:, :-1] + s[:, 1:])
    gv = 2.0 * s[:-1, :] * s[1:, :] / (s[:-1, :] + s[1:, :])
    gl = 2.0 * s[:, 0]
    gr = 2.0 * s[:, -1]
    return gh, gv, gl, gr


def _kirchhoff_apply(V, gh, gv, gl, gr):
    out = np.zeros_like(V)
    fh = gh * (V[:, :-1] - V[:, 1:])
    out[:, :-1] += fh
    out[:, 1:] -= fh
    fv = gv * (V[:-1, :] - V[1:, :])
    out[:-1, :] += fv
    out[1:, :] -= fv
    out[:, 0] += gl * V[:, 0]
    out[:, -1] += gr * V[:, -1]
    return out


def _solve_network(s: np.ndarray, rtol: float, max_iter: int | None):
    """Node potentials for unit voltage left->right, insulating top/bottom.

    Jacobi-preconditioned conjugate gradient on the SPD Kirchhoff system;
    raises LinearSolveError with the final residual on non-convergence.
    """
    ny, nx = s.shape
    gh, gv, gl, gr = _bond_conductances(s)
    diag = np.zeros_like(s)
    diag[:, :-1] += gh
    diag[:, 1:] += gh
    diag[:-1, :] += gv
    diag[1:, :] += gv
    diag[:, 0] += gl
    diag[:, -1] += gr

    b = np.zeros_like(s)
    b[:, 0] = gl  # electrode at potential 1; right electrode at 0
    # linear ramp through cell centers: exact for a uniform map
    V = np.tile(1.0 - (np.arange(nx) + 0.5) / nx, (ny, 1))

    b_norm = math.sqrt(float((b * b).sum()))
    target = rtol * b_norm
    if max_iter is None:
        max_iter = 200 * max(nx, ny) + 1000

    r = b - _kirchhoff_apply(V, gh, gv, gl, gr)
    z = r / diag
    p = z.copy()
    rz = float((r * z).sum())
    res = math.sqrt(float((r * r).sum()))
    it = 0
    while res > target and it < max_iter:
        Ap = _kirchhoff_apply(p, gh, gv, gl, gr)
        alpha = rz / float((p * Ap).sum())
        V += alpha * p
        r -= alpha * Ap
        res = math.sqrt(float((r * r).sum()))
        z = r / diag
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    if res > target:
        raise LinearSolveError(
            f"conjugate gradient stalled after {it} iterations: "
            f"residual {res:.3e} > target {target:.3e}", residual=res)
    return V, gl, gr


def effective_sheet_resistance(c: ConductivityMap, axis: str,
                               rtol: float = 1e-10,
                               max_iter: int | None = None) -> float:
    """Sheet resistance (per square) for current driven along `axis` with
    unit potential difference across the opposing edges.

    Bond conductances are harmonic means of adjacent cell sigma; electrode
    coupling uses the half-cell bond 2*sigma so a uniform map gives exactly
    1/sigma per square.  The raw V/I resistance is normalized by
    width/length to squares.
    """
    if axis == "x":
        s = c.sigma
    elif axis == "y":
        s = c.sigma.T
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    ny, nx = s.shape
    V, gl, gr = _solve_network(s, rtol, max_iter)
    current = float((gl * (1.0 - V[:, 0])).sum())
    return (1.0 / current) * (ny / nx)


def dense_sheet_resistance(c: ConductivityMap, axis: str) -> float:
    """Direct dense solve of the same Kirchhoff system; oracle for grids
    up to 32x32."""
    if axis == "x":
        s = c.sigma
    elif axis == "y":
        s = c.sigma.T
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    ny, nx = s.shape
    n = nx * ny
    if n > 32 * 32:
        raise ValueError(f"dense oracle limited to 1024 cells, got {n}")
    gh, gv, gl, gr = _bond_conductances(s)

    A = np.zeros((n, n))
    b = np.zeros(n)

    def k(i, j):
        return i * nx + j

    for i in range(ny):
        for j in range(nx - 1):
            g = gh[i, j]
            a, c2 = k(i, j), k(i, j + 1)
            A[a, a] += g
            A[c2, c2] += g
            A[a, c2] -= g
            A[c2, a] -= g
    for i in range(ny - 1):
        for j in range(nx):
            g = gv[i, j]
            a, c2 = k(i, j), k(i + 1, j)
            A[a, a] += g
            A[c2, c2] += g
            A[a, c2] -= g
            A[c2, a] -= g
    for i in range(ny):
        A[k(i, 0), k(i, 0)] += gl[i]
        b[k(i, 0)] += gl[i] * 1.0
        A[k(i, nx - 1), k(i, nx - 1)] += gr[i]

    V = np.linalg.solve(A, b).reshape(ny, nx)
    current = float((gl * (1.0 - V[:, 0])).sum())
    return (1.0 / current) * (ny / nx)


# ---------------------------------------------------------------------------
# Snapshot report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisRow:
    time: float
    char_length: float
    ti_fraction: float
    n_clusters: int
    largest_cluster: int
    spans_x: bool
    spans_y: bool
    R_eff_x: float
    R_eff_y: float


def analyze_field(f: ScalarField2D, time: float, x_c: float = 0.5,
                  sigma_ti: float = 1.0, sigma_al: float = 1e-4) -> AnalysisRow:
    """All per-snapshot descriptors in one pass (Ti-rich phase throughout)."""
    pmap = PhaseMap.from_field(f, x_c)
    labeling = label_clusters(pmap, Phase.TI_RICH)
    cmap = ConductivityMap.from_phase_map(pmap, sigma_ti, sigma_al)
    return AnalysisRow(
        time=time,
        char_length=characteristic_length(f),
        ti_fraction=pmap.fraction(Phase.TI_RICH),
        n_clusters=labeling.n_clusters,
        largest_cluster=labeling.largest,
        spans_x=spans(labeling, "x"),
        spans_y=spans(labeling, "y"),
        R_eff_x=effective_sheet_resistance(cmap, "x"),
        R_eff_y=effective_sheet_resistance(cmap, "y"),
    )


def write_report_csv(path, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.time!r},{r.char_length!r},{r.ti_fraction!r},"
                     f"{r.n_clusters},{r.largest_cluster},"
                     f"{int(r.spans_x)},{int(r.spans_y)},"
                     f"{r.R_eff_x!r},{r.R_eff_y!r}\n")
