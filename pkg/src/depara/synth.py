"""Synthetic families of related tasks with controllable relatedness.

A family is a base linear network with orthonormal rows plus a set of
variants perturbed along one shared random direction: the variant for
noise level sigma has weights ``W0 + sigma * G`` where G is a seeded
Gaussian matrix scaled to unit Frobenius norm. Perturbation magnitude is
the ground truth for relatedness, standing in for transfer accuracy at
desk scale.

Randomness comes from the documented xoshiro256** generator with fixed
streams: 0 for the probe matrix, 1 for the base weights (before QR), 2
for the shared perturbation direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundles import ProbeBundle, save_bundle
from .errors import DeparaError
from .graph import build_graph
from .refnet import Layer, RefNet, export_bundle, save_refnet
from .rng import Xoshiro256StarStar
from .similarity import graph_similarity

_PROBE_STREAM = 0
_BASE_STREAM = 1
_DIRECTION_STREAM = 2


@dataclass(frozen=True)
class SynthVariant:
    variant_id: str
    net: RefNet
    rotation_angle: float  # reserved nuisance axis; generated families use 0.0
    noise_sigma: float


@dataclass(frozen=True)
class SynthFamily:
    seed: int
    base_net: RefNet
    variants: tuple[SynthVariant, ...]
    probe: np.ndarray  # n_probe x d_input float64, shared by all variants

    @property
    def probe_id(self) -> str:
        return f"synth-{self.seed}-n{self.probe.shape[0]}-d{self.probe.shape[1]}"


def _orthonormal_rows(gaussian: np.ndarray) -> np.ndarray:
    # QR of a d_input x d_embed Gaussian; column signs fixed so the
    # factorization is canonical across LAPACK builds.
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return (q * signs).T


def generate_family(seed: int, d_input: int, d_embed: int, n_probe: int,
                    sigmas) -> SynthFamily:
    """Deterministically generate a base net, its noisy variants, and a probe."""
    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise DeparaError("at least one noise level required")
    if any(s < 0.0 or not np.isfinite(s) for s in sigmas):
        raise DeparaError("noise levels must be finite and non-negative")
    if len(set(sigmas)) != len(sigmas):
        raise DeparaError("duplicate noise levels")
    if n_probe < 2:
        raise DeparaError(f"need at least 2 probe points, got {n_probe}")
    if d_embed < 1 or d_input < 1:
        raise DeparaError("dimensions must be at least 1")
    if d_embed > d_input:
        raise DeparaError(
            f"orthonormal rows impossible: d_embed={d_embed} exceeds d_input={d_input}"
        )
    probe = Xoshiro256StarStar(seed, _PROBE_STREAM).normals((n_probe, d_input))
    probe.flags.writeable = False
    gaussian = Xoshiro256StarStar(seed, _BASE_STREAM).normals((d_input, d_embed))
    base_weights = _orthonormal_rows(gaussian)
    direction = Xoshiro256StarStar(seed, _DIRECTION_STREAM).normals((d_embed, d_input))
    direction /= np.linalg.norm(direction)
    zero_bias = np.zeros(d_embed)
    base_net = RefNet((Layer(base_weights, zero_bias, "identity"),))
    variants = []
    for sigma in sorted(sigmas):
        net = RefNet((Layer(base_weights + sigma * direction, zero_bias, "identity"),))
        variants.append(SynthVariant(
            variant_id=f"sigma-{sigma:g}",
            net=net,
            rotation_angle=0.0,
            noise_sigma=sigma,
        ))
    return SynthFamily(seed=int(seed), base_net=base_net, variants=tuple(variants), probe=probe)


def _member_bundle(family: SynthFamily, net: RefNet, member_id: str) -> ProbeBundle:
    return export_bundle(
        net, family.probe, tap=1,
        model_id=f"family-{family.seed}-{member_id}",
        probe_id=family.probe_id,
    )


def monotonicity_harness(family: SynthFamily, lam: float = 1.0) -> list[tuple[float, float]]:
    """Score every variant against the family base, sorted by sigma ascending.

    One family covers one seed; callers aggregate across seeds (e.g. the
    median per sigma) before asserting monotonicity.
    """
    if len(family.variants) < 2:
        raise DeparaError(f"need at least 2 noise levels, got {len(family.variants)}")
    base_graph = build_graph(_member_bundle(family, family.base_net, "base"))
    results = []
    for variant in sorted(family.variants, key=lambda v: v.noise_sigma):
        graph = build_graph(_member_bundle(family, variant.net, variant.variant_id))
        results.append((variant.noise_sigma, graph_similarity(graph, base_graph, lam).score))
    return results


def emit_family(family: SynthFamily, out_dir: str | Path) -> dict:
    """Write nets and bundles as ``family-<seed>/{base,variant-<sigma>}/``.

    Also writes the shared probe matrix as ``probe.csv`` (one probe point
    per row, full float64 precision) so bundles can be regenerated with
    the exporter commands. Returns a manifest of written paths.
    """
    root = Path(out_dir) / f"family-{family.seed}"
    root.mkdir(parents=True, exist_ok=True)
    probe_path = root / "probe.csv"
    np.savetxt(probe_path, family.probe, fmt="%.17g", delimiter=",")
    members = [("base", family.base_net)] + [
        (f"variant-{v.noise_sigma:g}", v.net) for v in family.variants
    ]
    manifest = {"root": str(root), "probe": str(probe_path), "members": []}
    for member_id, net in members:
        member_dir = root / member_id
        member_dir.mkdir(parents=True, exist_ok=True)
        net_path = member_dir / "net.depn"
        bundle_path = member_dir / "bundle.depb"
        save_refnet(net, net_path)
        save_bundle(_member_bundle(family, net, member_id), bundle_path)
        manifest["members"].append({
            "member": member_id,
            "net": str(net_path),
            "bundle": str(bundle_path),
        })
    return manifest
