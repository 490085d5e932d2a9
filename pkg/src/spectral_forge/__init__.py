"""Certified spectra of head-coupled cyclic shift systems.

Two constructions share one coupling pattern: a stochastic operator on a
weighted l1 sum of cyclic blocks whose peripheral spectrum is exactly a
prescribed finite union of root-of-unity groups, and a stochastic
C0-semigroup on a sum of circle spaces whose generator meets the
imaginary axis exactly in {0} and i(R \\ (-1, 1)).  The library builds
both, inverts them in closed form through rank-one update formulas with
certified truncation radii, and cross-checks everything against finite
sections, residual certificates and dense oracles.
"""

from .errors import (NotInTargetSet, PoleHit, RootCountMismatch,
                     SingularBlock, SingularCandidate, SingularUpdate,
                     SpectralForgeError, TailInvalid)
from .model import (BlockVector, CertifiedComplex, GroupUnionSpec,
                    TailProfile, WeightSeq, apply_operator, basis_head,
                    norm1, stochasticity_check, union_points, union_values,
                    weight_vector)
from .resolvent import (CERTIFIED, SINGULAR, TAIL_INVALID, PointCertificate,
                        block_resolvent_bound, certify_point,
                        coupling_series, cyclic_shift_resolvent,
                        resolvent_denominator, resolvent_diag, resolvent_full,
                        sherman_morrison_resolvent)
from .scanner import EigCertificate, ScanReport, residual_certificate, \
    scan_unit_circle
from .finite import (FiniteOperator, SpectrumResult, build_finite_section,
                     convergence_table, factorization_crosscheck,
                     finite_spectrum, secular_value, strongly_connected,
                     tarjan_scc)
from .semigroup import (FourierState, GeneratorSpec, ModeCertificate,
                        RationalSchedule, apply_generator, chain_generator,
                        evolve, generator_denominator, generator_series,
                        mode_certificate, scan_imaginary_axis)
from .verify import run_suite, run_suites

__version__ = "0.1.0"
