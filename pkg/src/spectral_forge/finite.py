"""Finite sections of the coupled operator and their full spectra.

Keeping the head and the first N blocks (dimension 1 + N*d) and
renormalising the weights so the column masses stay exactly one gives a
stochastic matrix T_N whose spectrum splits in closed form:

* block eigenvalues: each block n contributes the spectrum of (1-q_n)P
  restricted to the complement of the single all-ones direction that
  couples to the head.  That multiset is (1-q_n) * (union of the root
  groups minus one copy of 1), so it includes (1-q_n) itself with
  multiplicity (number of cyclic factors - 1).
* secular eigenvalues: the head chain contributes the N+1 roots of
  phi_N(lam) = 1 - (1/lam) sum_{n<=N} d q_n^2 / (lam - 1 + q_n),
  located by argument-principle counting on subdivided rectangles and
  polished by Newton iteration (no dense eigensolver anywhere on this
  path; dense routines appear only in independent test oracles).

The determinant factorisation det(lam - T_N) =
lam * prod_n (lam - 1 + q_n) * phi_N(lam) * (block factors) underlies the
cofactor cross-check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import PoleHit, RootCountMismatch, SpectralForgeError
from .model import GroupUnionSpec, WeightSeq, union_points

__all__ = [
    "FiniteOperator",
    "build_finite_section",
    "tarjan_scc",
    "strongly_connected",
    "secular_value",
    "EigRecord",
    "SpectrumResult",
    "finite_spectrum",
    "cofactor_det_batch",
    "factorization_crosscheck",
    "convergence_table",
]


# ---------------------------------------------------------------------------
# building the section
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteOperator:
    """Dense finite section with its construction data."""

    matrix: np.ndarray
    spec: GroupUnionSpec
    weights: WeightSeq
    n_blocks: int
    renormalized: bool
    tilde_q: np.ndarray       # the (possibly renormalised) weights used

    @property
    def dim(self) -> int:
        return 1 + self.n_blocks * self.spec.d

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def build_finite_section(spec: GroupUnionSpec, w: WeightSeq, n_blocks: int,
                         renormalize: bool = True) -> FiniteOperator:
    """Head plus blocks 1..n_blocks as a dense matrix.

    With ``renormalize`` the weights are scaled by 1/(1 - tail mass) so the
    head column sums to exactly one; block columns always do.  Without it
    the head column sums to the partial mass 1 - 2^-N.
    """
    if n_blocks < 1:
        raise ValueError("need at least one block")
    d = spec.d
    qs = w.values(n_blocks)
    if renormalize:
        qs = qs / w.partial_mass(n_blocks)
    dim = 1 + n_blocks * d
    p = spec.permutation_matrix()
    a = np.zeros((dim, dim))
    for n in range(1, n_blocks + 1):
        q = qs[n - 1]
        sl = slice(1 + (n - 1) * d, 1 + n * d)
        a[sl, 0] = q                    # head feeds every block entry
        a[0, sl] = q                    # blocks feed the head
        a[sl, sl] = (1.0 - q) * p
    return FiniteOperator(a, spec, w, n_blocks, renormalize, qs)


# ---------------------------------------------------------------------------
# strong connectivity (Tarjan, iterative)
# ---------------------------------------------------------------------------

def tarjan_scc(adj: List[List[int]]) -> List[List[int]]:
    """Strongly connected components of a digraph given as adjacency lists."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(adj[v])):
                u = adj[v][k]
                if index[u] == -1:
                    work[-1] = (v, k + 1)
                    work.append((u, 0))
                    advanced = True
                    break
                if on_stack[u]:
                    low[v] = min(low[v], index[u])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp.append(u)
                    if u == v:
                        break
                comps.append(comp)
    return comps


def strongly_connected(matrix: np.ndarray, tol: float = 0.0) -> bool:
    """True when the support digraph of ``matrix`` is one strongly
    connected component (entries with absolute value > tol are edges)."""
    m = np.abs(np.asarray(matrix)) > tol
    adj = [list(np.nonzero(m[:, j])[0]) for j in range(m.shape[0])]
    return len(tarjan_scc(adj)) == 1


# ---------------------------------------------------------------------------
# secular function
# ---------------------------------------------------------------------------

_POLE_GUARD = 1e-14


def _secular_params(spec, w, n_blocks, renormalize=True):
    qs = w.values(n_blocks)
    if renormalize:
        qs = qs / w.partial_mass(n_blocks)
    return spec.d * qs ** 2, 1.0 - qs     # residue weights, chain poles


def secular_value(spec: GroupUnionSpec, w: WeightSeq, n_blocks: int,
                  lam: complex, renormalize: bool = True) -> complex:
    """phi_N(lam) = 1 - (1/lam) sum_n d q_n^2 / (lam - 1 + q_n).

    Zeros (with the poles at 0 and 1 - q_n known exactly) enumerate the
    head-chain eigenvalues of the finite section.  Raises PoleHit within
    1e-14 of a pole.
    """
    lam = complex(lam)
    dq2, poles = _secular_params(spec, w, n_blocks, renormalize)
    if abs(lam) < _POLE_GUARD:
        raise PoleHit("lam is numerically at the pole 0")
    diffs = lam - poles
    if np.any(np.abs(diffs) < _POLE_GUARD):
        raise PoleHit("lam is numerically at a chain pole 1 - q_n")
    return complex(1.0 - (dq2 / diffs).sum() / lam)


def _phi_dphi(lam_arr, dq2, poles):
    """Vectorised secular function and derivative (no pole guards)."""
    lam = np.asarray(lam_arr, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        diff = lam[..., None] - poles
        g = (dq2 / diff).sum(axis=-1)
        gp = -(dq2 / diff ** 2).sum(axis=-1)
        phi = 1.0 - g / lam
        dphi = g / lam ** 2 - gp / lam
    return phi, dphi


# ---------------------------------------------------------------------------
# argument-principle root isolation
# ---------------------------------------------------------------------------

_BASE_NODES = 1 << 10
_MAX_NODES = 1 << 13
_JITTERS = (0.0, 0.061, -0.057, 0.117, -0.123, 0.179, -0.181, 0.243)


def _winding(rect, dq2, poles, nodes=_BASE_NODES) -> Optional[int]:
    """Winding number of phi along the rectangle boundary, or None.

    Trapezoidal quadrature of phi'/phi per edge; the node count doubles
    until the result is within 0.1 of an integer (None when it never is,
    e.g. a zero or pole sits on the boundary).
    """
    x0, x1, y0, y1 = rect
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1),
               complex(x0, y1), complex(x0, y0)]
    while nodes <= _MAX_NODES:
        total = 0j
        ok = True
        for a, b in zip(corners[:-1], corners[1:]):
            ts = np.linspace(0.0, 1.0, nodes + 1)
            pts = a + (b - a) * ts
            phi, dphi = _phi_dphi(pts, dq2, poles)
            if np.any(phi == 0) or not np.all(np.isfinite(phi)):
                ok = False
                break
            integrand = dphi / phi
            total += 0.5 * np.sum((integrand[1:] + integrand[:-1])
                                  * np.diff(pts))
        if ok:
            wind = total / (2j * math.pi)
            if abs(wind.imag) <= 0.1 and abs(wind.real - round(wind.real)) <= 0.1:
                return int(round(wind.real))
        nodes *= 2
    return None


def _zeros_inside(rect, dq2, poles) -> Optional[int]:
    wind = _winding(rect, dq2, poles)
    if wind is None:
        return None
    x0, x1, y0, y1 = rect
    inside = sum(1 for p in poles_with_zero(poles)
                 if x0 < p.real < x1 and y0 < p.imag < y1)
    return wind + inside


def poles_with_zero(poles) -> list:
    """Pole multiset of the secular function: 0 plus every chain pole."""
    return [0j] + [complex(p) for p in poles]


def _newton(z0, dq2, poles, tol=1e-12) -> Optional[complex]:
    z = complex(z0)
    for _ in range(80):
        phi, dphi = _phi_dphi(np.array([z]), dq2, poles)
        phi, dphi = complex(phi[0]), complex(dphi[0])
        if not (cmath.isfinite(phi) and cmath.isfinite(dphi)) or dphi == 0:
            return None
        step = phi / dphi
        z = z - step
        if abs(phi) <= tol and abs(step) <= 1e-11:
            return z
    phi, _ = _phi_dphi(np.array([z]), dq2, poles)
    return z if abs(complex(phi[0])) <= tol else None


def _isolate_roots(rect, count, dq2, poles, out, depth=0):
    """Recursive bisection until each rectangle isolates one root."""
    if count == 0:
        return
    x0, x1, y0, y1 = rect
    width, height = x1 - x0, y1 - y0
    diam = max(width, height)
    if count == 1 and diam <= 0.05:
        pad = 0.1 * diam
        for seed in (complex((x0 + x1) / 2, (y0 + y1) / 2),
                     complex(x0 + 0.3 * width, y0 + 0.7 * height),
                     complex(x0 + 0.7 * width, y0 + 0.3 * height)):
            z = _newton(seed, dq2, poles)
            if z is not None and x0 - pad <= z.real <= x1 + pad \
                    and y0 - pad <= z.imag <= y1 + pad:
                out.append(z)
                return
        # Newton failed or left the box; fall through to further subdivision
    if diam < 1e-9 or depth > 70:
        centre = complex((x0 + x1) / 2, (y0 + y1) / 2)
        out.extend([centre] * count)
        return

    vertical = width >= height
    lo, hi = (x0, x1) if vertical else (y0, y1)
    span = hi - lo
    all_poles = poles_with_zero(poles)
    for jit in _JITTERS:
        cut = lo + (0.5 + jit) * span
        coords = [p.real if vertical else p.imag for p in all_poles]
        if any(abs(c - cut) < 1e-3 * span for c in coords):
            continue
        if vertical:
            ra, rb = (x0, cut, y0, y1), (cut, x1, y0, y1)
        else:
            ra, rb = (x0, x1, y0, cut), (x0, x1, cut, y1)
        za = _zeros_inside(ra, dq2, poles)
        if za is None:
            continue
        zb = _zeros_inside(rb, dq2, poles)
        if zb is None or za + zb != count:
            continue
        _isolate_roots(ra, za, dq2, poles, out, depth + 1)
        _isolate_roots(rb, zb, dq2, poles, out, depth + 1)
        return
    raise SpectralForgeError(
        f"could not split rectangle {rect} holding {count} roots")


def secular_roots(spec: GroupUnionSpec, w: WeightSeq, n_blocks: int,
                  renormalize: bool = True) -> np.ndarray:
    """All N+1 zeros of the secular function inside |lam| <= 1.1."""
    dq2, poles = _secular_params(spec, w, n_blocks, renormalize)
    rect = (-1.1, 1.1, -1.1, 1.1)
    expected = n_blocks + 1
    count = _zeros_inside(rect, dq2, poles)
    if count is None:
        # a zero sits numerically on the frame; nudge it
        rect = (-1.1037, 1.1041, -1.1043, 1.1039)
        count = _zeros_inside(rect, dq2, poles)
    if count != expected:
        raise RootCountMismatch(
            f"secular count {count} != expected {expected}")
    roots: List[complex] = []
    _isolate_roots(rect, count, dq2, poles, roots)
    if len(roots) != expected:
        raise RootCountMismatch(
            f"isolated {len(roots)} secular roots, expected {expected}")
    return np.array(sorted(roots, key=lambda z: (z.real, z.imag)))


# ---------------------------------------------------------------------------
# full spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigRecord:
    value: complex
    kind: str                   # "block" | "secular"
    residual: float
    block_index: Optional[int] = None


@dataclass
class SpectrumResult:
    operator: FiniteOperator
    records: List[EigRecord] = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    def __len__(self):
        return len(self.records)

    def max_residual(self) -> float:
        return max(r.residual for r in self.records)

    def csv_rows(self):
        """Rows for re,im,kind,residual."""
        for r in self.records:
            yield (r.value.real, r.value.imag, r.kind, r.residual)


def _block_eig_vectors(spec: GroupUnionSpec):
    """Per-block eigenpairs of P orthogonal to the coupled direction.

    Yields (zeta, vector) with P v = zeta v and <1, v> = 0: the nontrivial
    Fourier modes of each cyclic factor plus, when there are several
    factors, the differences of their normalised fixed vectors (these carry
    the eigenvalue 1 with multiplicity factors-1).
    """
    d = spec.d
    for off, m in zip(spec.offsets, spec.orders):
        for j in range(1, m):
            zeta = cmath.exp(2j * math.pi * j / m)
            v = np.zeros(d, dtype=complex)
            for i in range(m):
                v[off + i] = zeta ** (-i) / m
            yield zeta, v
    offs, ords = spec.offsets, spec.orders
    for k in range(len(ords) - 1):
        v = np.zeros(d, dtype=complex)
        v[offs[k]:offs[k] + ords[k]] = 1.0 / ords[k]
        v[offs[k + 1]:offs[k + 1] + ords[k + 1]] = -1.0 / ords[k + 1]
        yield 1.0 + 0j, v / np.abs(v).sum()


def finite_spectrum(spec: GroupUnionSpec, w: WeightSeq, n_blocks: int,
                    renormalize: bool = True) -> SpectrumResult:
    """Complete eigenvalue list of the finite section.

    Block eigenvalues come with their closed-form eigenvectors; secular
    roots are found by the argument principle and re-expanded into head
    chain eigenvectors via the resolvent profile q_n/(lam-1+q_n).  Every
    eigenpair is certified by its residual ||T v - lam v||_1 (v normalised)
    against the assembled matrix; the total count must equal the dimension.
    """
    op = build_finite_section(spec, w, n_blocks, renormalize)
    a = op.matrix
    d = spec.d
    qs = op.tilde_q
    records: List[EigRecord] = []

    def residual(vec, lam):
        nv = np.abs(vec).sum()
        return float(np.abs(a @ vec - lam * vec).sum() / nv)

    for n in range(1, n_blocks + 1):
        damp = 1.0 - qs[n - 1]
        for zeta, v in _block_eig_vectors(spec):
            vec = np.zeros(op.dim, dtype=complex)
            vec[1 + (n - 1) * d: 1 + n * d] = v
            lam = damp * zeta
            records.append(EigRecord(lam, "block", residual(vec, lam), n))

    chain = _chain_matrix(d, qs)
    for lam in secular_roots(spec, w, n_blocks, renormalize):
        vec = _secular_vector(op, chain, lam)
        records.append(EigRecord(complex(lam), "secular", residual(vec, lam)))

    if len(records) != op.dim:
        raise RootCountMismatch(
            f"{len(records)} eigenvalues for dimension {op.dim}")
    records.sort(key=lambda r: (round(math.atan2(r.value.imag,
                                                 r.value.real), 12),
                                abs(r.value)))
    return SpectrumResult(op, records)


def _chain_matrix(d, qs) -> np.ndarray:
    n = len(qs)
    m = np.zeros((n + 1, n + 1))
    m[0, 1:] = d * qs
    m[1:, 0] = qs
    m[1:, 1:][np.diag_indices(n)] = 1.0 - qs
    return m


def _secular_vector(op: FiniteOperator, chain: np.ndarray,
                    lam: complex) -> np.ndarray:
    """Head-chain eigenvector for a secular root, embedded in full size."""
    qs = op.tilde_q
    dens = lam - 1.0 + qs
    if np.all(np.abs(dens) > 1e-10):
        coeffs = qs / dens
        v = np.concatenate(([1.0 + 0j], coeffs))
    else:
        # root collides with a chain pole: fall back to a null vector of
        # the (tiny) chain matrix
        mat = chain.astype(complex) - lam * np.eye(chain.shape[0])
        _, _, vh = np.linalg.svd(mat)
        v = vh[-1].conj()
    vec = np.zeros(op.dim, dtype=complex)
    vec[0] = v[0]
    d = op.spec.d
    for n in range(1, op.n_blocks + 1):
        vec[1 + (n - 1) * d: 1 + n * d] = v[n]
    return vec


# ---------------------------------------------------------------------------
# cofactor cross-check
# ---------------------------------------------------------------------------

def cofactor_det_batch(a: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """det(lam*I - a) for every lam, by first-row cofactor expansion.

    The expansion is memoised over column subsets (each subset paired with
    the same number of leading rows), which keeps the classical identity
    but runs in O(2^n * n) instead of factorial time.  Intended for the
    small sections of the cross-check; refuses n > 18.
    """
    a = np.asarray(a)
    n = a.shape[0]
    if n > 18:
        raise ValueError("cofactor expansion limited to dimension 18")
    lams = np.asarray(lams, dtype=complex)
    dets = np.empty((1 << n, len(lams)), dtype=complex)
    dets[0] = 1.0
    for mask in range(1, 1 << n):
        r = mask.bit_count() - 1
        acc = np.zeros(len(lams), dtype=complex)
        sign = -1.0 if r % 2 else 1.0      # cofactor sign (-1)^(r + position)
        t = mask
        while t:
            j = (t & -t).bit_length() - 1
            entry = (lams - a[r, j]) if r == j else -a[r, j]
            acc += sign * entry * dets[mask ^ (1 << j)]
            sign = -sign
            t &= t - 1
        dets[mask] = acc
    return dets[(1 << n) - 1]


@dataclass(frozen=True)
class CrosscheckReport:
    n_blocks: int
    dim: int
    samples: int
    max_rel_error: float
    passed: bool


def factorization_crosscheck(spec: GroupUnionSpec, w: WeightSeq,
                             n_blocks: int, seed: int = 0,
                             tol: float = 1e-8) -> CrosscheckReport:
    """Polynomial identity test: eigenvalue multiset vs characteristic
    polynomial.

    Samples 2 * dim random points in the disk of radius 2 and compares the
    cofactor determinant of (lam - T_N) with the product over the computed
    spectrum.  Agreement at dim+1 or more points pins the monic polynomial,
    so matching at 2*dim points to ``tol`` certifies the multiset.
    """
    result = finite_spectrum(spec, w, n_blocks)
    a = result.operator.matrix
    dim = result.operator.dim
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFAC7]))
    zs = 2.0 * (rng.random(2 * dim) + 1j * rng.random(2 * dim)) - (1 + 1j)
    lams = 2.0 * zs / np.maximum(1.0, np.abs(zs))   # clamp into |z| <= 2
    dets = cofactor_det_batch(a, lams)
    prods = np.prod(lams[:, None] - result.values()[None, :], axis=1)
    scale = np.maximum(1.0, np.maximum(np.abs(dets), np.abs(prods)))
    err = float(np.max(np.abs(dets - prods) / scale))
    return CrosscheckReport(n_blocks, dim, len(lams), err, err <= tol)


# ---------------------------------------------------------------------------
# convergence of the sections toward the target set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n_blocks: int
    angle: object               # Fraction of a full turn
    distance: float
    bound: float                # 2 * tilde_q_N
    ok: bool


def convergence_table(spec: GroupUnionSpec, w: WeightSeq,
                      n_max: int) -> List[ConvergenceRow]:
    """dist(u, sigma(T_N)) for every target point u and N <= n_max.

    The bound 2 * tilde_q_N comes from the damped block eigenvalue next to
    u (u != 1) and from the exact secular root at 1.
    """
    rows = []
    for n_blocks in range(1, n_max + 1):
        result = finite_spectrum(spec, w, n_blocks)
        vals = result.values()
        tq = float(result.operator.tilde_q[-1])
        for angle in union_points(spec):
            u = cmath.exp(2j * math.pi * float(angle))
            dist = float(np.min(np.abs(vals - u)))
            bound = 2.0 * tq
            rows.append(ConvergenceRow(n_blocks, angle, dist, bound,
                                       dist <= bound + 1e-12))
    return rows
