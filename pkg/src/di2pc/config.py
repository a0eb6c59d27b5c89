"""Numerical tolerance profiles.

All structural checks in the package read their thresholds from a single
``Tolerances`` record so that the whole stack can be switched between the
default and a stricter profile (CLI flag ``--tol-profile``).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Tolerance bundle; ``herm`` guards structure checks, ``eq`` reconstructions."""

    herm: float = 1e-10          # hermiticity / trace / PSD floor of state checks
    eq: float = 1e-9             # reconstruction and identity checks
    povm: float = 1e-9           # completeness of POVMs and observables
    psd_clamp: float = 1e-10     # eigenvalues in [-psd_clamp, 0) are clamped to 0
    angle_class: float = 1e-8    # Jordan block classification threshold (delta)
    block_recon: float = 1e-8    # block reconstruction error budget
    dual_gap: float = 1e-7       # discrimination certificate gap at convergence
    time: float = 1e-9           # timing slack in the PV acceptance rule


DEFAULT = Tolerances()
STRICT = Tolerances(herm=1e-12, eq=1e-10, povm=1e-10, psd_clamp=1e-12,
                    angle_class=1e-9, block_recon=1e-9, dual_gap=1e-8,
                    time=1e-12)

PROFILES = {"default": DEFAULT, "strict": STRICT}

# Dense tensor products refuse to grow past this dimension.
DIMENSION_CAP = 4096
