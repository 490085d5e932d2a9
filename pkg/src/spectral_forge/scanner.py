"""Unit-circle scanning and approximate-eigenvector certificates.

The scan walks a uniform angular grid, evaluates the certified rank-one
denominator at every point, measures the distance to the block-diagonal
spectrum, and issues one verdict per point.  Points inside the exclusion
arcs around the prescribed peripheral set never receive a resolvent
certificate, whatever the denominator says there: floating-point scanning
needs a buffer, so certification is withheld on the arcs (the certified
lower bound is still recorded).

For each peripheral point the complementary certificate is an explicit
finite vector living in a single deep block whose image under the operator
misses the eigenvalue equation by exactly q_n * (1 + |<1, z>|).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import NotInTargetSet, SpectralForgeError
from .model import (BlockVector, GroupUnionSpec, WeightSeq, apply_operator,
                    norm1, union_points, union_values)
from .resolvent import (CERTIFIED, SINGULAR, TAIL_INVALID,
                        coupling_series_batch, _S_GAP_GUARD)

__all__ = [
    "EigCertificate",
    "residual_certificate",
    "ScanPoint",
    "ScanReport",
    "scan_unit_circle",
]


# ---------------------------------------------------------------------------
# approximate eigenvector certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigCertificate:
    """Residual certificate for one peripheral point.

    ``vector`` is the l1-normalised discrete Fourier eigenvector of the
    first cyclic sub-block whose spectrum contains the point, embedded in
    block ``block_index``.  ``residual`` is ||(T - lam) z||_1 computed by
    the forward map; it equals q_n * (1 + inner_abs) exactly.
    """

    angle: Fraction
    value: complex
    block_index: int
    vector: np.ndarray
    inner_abs: float
    residual: float


def residual_certificate(spec: GroupUnionSpec, w: WeightSeq,
                         target, block_index: int = 30) -> EigCertificate:
    """Build the deep-block certificate for one point of the target set.

    ``target`` may be an exact angle (Fraction of a full turn) or a complex
    number that matches a target point to 1e-9.  Raises NotInTargetSet
    otherwise.
    """
    angles = union_points(spec)
    if isinstance(target, Fraction):
        if target % 1 not in [a % 1 for a in angles]:
            raise NotInTargetSet(f"angle {target} not in the target set")
        angle = target % 1
    else:
        lam_t = complex(target)
        vals = union_values(spec)
        k = int(np.argmin(np.abs(vals - lam_t)))
        if abs(vals[k] - lam_t) > 1e-9:
            raise NotInTargetSet(f"{lam_t} is not a target point")
        angle = angles[k]
    if block_index < 1:
        raise ValueError("block_index must be >= 1")

    lam = complex(np.exp(2j * np.pi * float(angle)))
    # first cyclic sub-block containing the point in its spectrum
    for off, m in zip(spec.offsets, spec.orders):
        if (angle * m).denominator == 1:
            break
    else:  # pragma: no cover - union_points guarantees a match
        raise NotInTargetSet(f"no sub-block carries angle {angle}")

    z = np.zeros(spec.d, dtype=complex)
    zeta = np.exp(2j * np.pi * float(angle))
    for i in range(m):
        z[off + i] = zeta ** (-i) / m
    inner = abs(z.sum())

    q = w.value(block_index)
    vec = BlockVector(spec.d, 0j, {block_index: z})
    image = apply_operator(spec, w, vec)
    resid = norm1(image - lam * vec).value.real
    closed = q * (1.0 + inner)
    if abs(resid - closed) > 1e-12:
        raise SpectralForgeError(
            f"certificate residual {resid} does not match closed form {closed}")
    return EigCertificate(angle, lam, block_index, z, inner, resid)


# ---------------------------------------------------------------------------
# the scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    theta: float
    lam: complex
    verdict: str
    denominator_abs_lower: float
    block_bound: float
    dist_to_target: float
    excluded: bool


@dataclass
class ScanReport:
    thetas: np.ndarray
    lams: np.ndarray
    verdicts: List[str]
    den_lower: np.ndarray
    block_bounds: np.ndarray
    dist: np.ndarray
    excluded: np.ndarray
    empirical_m: float
    certificates: List[EigCertificate]
    metadata: dict = field(default_factory=dict)

    def point(self, i: int) -> ScanPoint:
        return ScanPoint(float(self.thetas[i]), complex(self.lams[i]),
                         self.verdicts[i], float(self.den_lower[i]),
                         float(self.block_bounds[i]), float(self.dist[i]),
                         bool(self.excluded[i]))

    def __len__(self):
        return len(self.thetas)

    def counts(self) -> dict:
        out = {CERTIFIED: 0, SINGULAR: 0, TAIL_INVALID: 0}
        for v in self.verdicts:
            out[v] += 1
        return out

    def csv_rows(self):
        """Rows for theta,re_lambda,im_lambda,verdict,denominator_abs_lower,
        empirical_block_bound."""
        for i in range(len(self.thetas)):
            yield (float(self.thetas[i]), float(self.lams[i].real),
                   float(self.lams[i].imag), self.verdicts[i],
                   float(self.den_lower[i]), float(self.block_bounds[i]))


def scan_unit_circle(spec: GroupUnionSpec, w: WeightSeq,
                     grid_size: int = 3600, exclusion_radius: float = 0.05,
                     depth: int = 40, cert_block: int = 30,
                     with_certificates: bool = True) -> ScanReport:
    """Classify every grid point exp(2*pi*i*j/grid_size).

    Vectorised evaluation: the certified series, the gap to the
    block-diagonal spectrum and the observed block-resolvent norms are all
    computed over the whole grid at once.  The result is deterministic for
    fixed inputs; conjugation symmetry of the construction is a test-side
    invariant, not enforced here.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be positive")
    thetas = np.arange(grid_size) / grid_size
    lams = np.exp(2j * np.pi * thetas)

    values, radius, valid = coupling_series_batch(spec, w, lams, depth)
    den = 1.0 - values / lams
    den_radius = radius / np.abs(lams)
    den_lower = np.maximum(0.0, np.abs(den) - den_radius)

    zeta = union_values(spec)
    qs = w.values(depth)
    scaled = ((1.0 - qs)[:, None] * zeta[None, :]).reshape(-1)
    per_block = np.min(np.abs(lams[:, None] - scaled[None, :]), axis=1)
    dist = np.min(np.abs(lams[:, None] - zeta[None, :]), axis=1)
    limit = dist - w.value(depth + 1)
    gap = np.maximum(0.0, np.minimum.reduce([np.abs(lams), per_block, limit]))

    block_bounds = np.zeros(grid_size)
    for n in range(1, depth + 1):
        q = w.value(n)
        mu = lams / (1.0 - q)
        absmu = np.abs(mu)
        for m in set(spec.orders):
            det = np.abs(mu ** m - 1.0)
            det = np.maximum(det, 1e-300)
            s = sum(absmu ** (m - 1 - j) for j in range(m)) / det
            np.maximum(block_bounds, s / (1.0 - q), out=block_bounds)

    excluded = dist <= exclusion_radius
    verdicts = np.full(grid_size, CERTIFIED, dtype=object)
    verdicts[valid & ((gap <= _S_GAP_GUARD) | (den_lower <= 0.0))] = SINGULAR
    verdicts[~valid] = TAIL_INVALID
    den_lower[~valid] = 0.0
    # certification is withheld on the exclusion arcs
    verdicts[excluded & (verdicts == CERTIFIED)] = SINGULAR

    on_rim = ~excluded & np.isfinite(block_bounds)
    empirical_m = float(block_bounds[on_rim].max()) if on_rim.any() else 0.0

    certificates = []
    if with_certificates:
        certificates = [residual_certificate(spec, w, a, cert_block)
                        for a in union_points(spec)]

    return ScanReport(
        thetas, lams, list(verdicts), den_lower, block_bounds, dist, excluded,
        empirical_m, certificates,
        metadata={
            "orders": list(spec.orders),
            "grid_size": grid_size,
            "exclusion_radius": exclusion_radius,
            "depth": depth,
            "cert_block": cert_block,
        })
