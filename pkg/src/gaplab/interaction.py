r"""Interactions: finitely many local terms keyed by intervals or balls.

An interaction stores a *list* of terms; several terms may share one support
(e.g. the two projector terms of a paired-orbital cell).  Each term carries an
anchor site — the lattice site nearest its support center, ties resolved to
the left — or, for ball-keyed terms, the generating center.  Anchors drive
the edge/bulk split and the anchored decompositions used by the spectral
flow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .lattice import Interval, interior
from . import ffunction
from .operator_algebra import (
    LocalOperator, ParityError, embed, jordan_wigner, operator_norm,
    parity_grade,
)


def default_anchor(support: Interval) -> int:
    """Site nearest the support center; ties go left."""
    return (support.a + support.b) // 2


def interval_as_ball(support: Interval) -> tuple[int, int]:
    """Re-key an interval [p, q] as a ball: center ceil((p+q)/2), radius ceil((q-p)/2)."""
    p, q = support.a, support.b
    return -((-(p + q)) // 2), -((-(q - p)) // 2)


@dataclass
class Term:
    op: LocalOperator
    anchor: int | None = None
    radius: int | None = None

    def __post_init__(self):
        if self.anchor is None:
            self.anchor = default_anchor(self.op.support)

    @property
    def support(self) -> Interval:
        return self.op.support


@dataclass
class Interaction:
    """A finite family of local terms on a chain."""

    terms: list[Term]
    kind: str = "spin"
    local_dim: int = 2
    decay: object = None          # FFunctionSpec or DerivedFSpec, optional
    ball_keyed: bool = False

    def __post_init__(self):
        for t in self.terms:
            if t.op.kind != self.kind or t.op.local_dim != self.local_dim:
                raise ValueError("term kind/local_dim mismatch")
        if self.ball_keyed and any(t.radius is None for t in self.terms):
            raise ValueError("ball-keyed interactions need a radius on every term")

    @property
    def range(self) -> int:
        """Largest support diameter."""
        return max((t.support.diameter for t in self.terms), default=0)

    @property
    def uniform_bound(self) -> float:
        return max((t.op.norm() for t in self.terms), default=0.0)

    def term_supports_and_norms(self):
        for t in self.terms:
            yield t.support, t.op.norm()

    def anchored(self) -> dict:
        """Terms grouped by anchor site."""
        out: dict[int, list[Term]] = {}
        for t in self.terms:
            out.setdefault(t.anchor, []).append(t)
        return out

    def grouped(self) -> dict:
        """Term matrices summed per support interval."""
        out: dict[Interval, np.ndarray] = {}
        for t in self.terms:
            if t.support in out:
                out[t.support] = out[t.support] + t.op.matrix
            else:
                out[t.support] = t.op.matrix.copy()
        return out

    def restricted(self, lam: Interval) -> "Interaction":
        kept = [t for t in self.terms if t.support in lam]
        return replace(self, terms=kept)

    def f_norm(self, spec=None) -> float:
        spec = spec or self.decay
        if spec is None:
            raise ValueError("no decay function available")
        return ffunction.f_norm(self, spec)


def local_hamiltonian(phi: Interaction, lam: Interval, sparse: bool = False):
    """Sum of all terms supported inside ``lam``, as one operator on ``lam``.

    Dense assembly preserves realness (real terms give a real symmetric
    matrix); ``sparse=True`` returns a CSR matrix instead of a LocalOperator.
    """
    d = phi.local_dim
    dim = d ** len(lam)
    terms = [t for t in phi.terms if t.support in lam]
    real = all(not np.iscomplexobj(t.op.matrix)
               or np.max(np.abs(t.op.matrix.imag)) == 0.0 for t in terms)
    dtype = np.float64 if real else np.complex128
    acc = sp.csr_matrix((dim, dim), dtype=dtype)
    for t in terms:
        nl = t.support.a - lam.a
        nr = lam.b - t.support.b
        m = t.op.matrix.real if real else t.op.matrix
        block = sp.kron(sp.identity(d ** nl, dtype=dtype, format="csr"),
                        sp.kron(sp.csr_matrix(m.astype(dtype)),
                                sp.identity(d ** nr, dtype=dtype, format="csr"),
                                format="csr"), format="csr")
        acc = acc + block
    if sparse:
        return acc
    return LocalOperator(acc.toarray(), lam, lam, phi.kind, d)


@dataclass
class VolumeReport:
    lam: Interval
    ground_energy: float
    min_nonzero: float
    kernel_dim: int
    frustration_free: bool


@dataclass
class UnperturbedReport:
    rows: list[VolumeReport]
    range: int
    uniform_bound: float
    gamma0_candidate: float
    passed: bool


def validate_unperturbed(build, volumes, tol: float = 1e-10,
                         kernel_tol: float = 1e-9) -> UnperturbedReport:
    """Frustration-freeness report for a model over probe volumes.

    ``build(lam)`` returns the interaction on ``lam``.  A model failing the
    ground-energy-zero test is reported, not raised.  The gap candidate is the
    smallest nonzero eigenvalue over the probes whose diameter reaches the
    interaction range.
    """
    rows = []
    rng_max, bound_max = 0, 0.0
    passed = True
    for lam in volumes:
        phi = build(lam)
        rng_max = max(rng_max, phi.range)
        bound_max = max(bound_max, phi.uniform_bound)
        h = local_hamiltonian(phi, lam)
        evals = np.linalg.eigvalsh(h.matrix)
        scale = max(1.0, float(np.max(np.abs(evals))))
        ground = float(evals[0])
        kdim = int(np.sum(np.abs(evals) <= kernel_tol * scale))
        nonzero = evals[np.abs(evals) > kernel_tol * scale]
        min_nonzero = float(nonzero[0]) if nonzero.size else np.inf
        ok = abs(ground) <= tol * scale and kdim >= 1
        rows.append(VolumeReport(lam, ground, min_nonzero, kdim, ok))
        passed = passed and ok
    eligible = [r.min_nonzero for r in rows if r.lam.diameter >= rng_max]
    gamma0 = float(min(eligible)) if eligible else float("inf")
    return UnperturbedReport(rows, rng_max, bound_max, gamma0, passed)


@dataclass
class EdgeBulkSplit:
    edge: Interaction
    bulk: Interaction
    D: int

    def reconstructs(self, phi: Interaction) -> bool:
        return len(self.edge.terms) + len(self.bulk.terms) == len(phi.terms)


def split_edge_bulk(phi: Interaction, lam: Interval, D: int) -> EdgeBulkSplit:
    """Split into terms anchored inside the depth-D interior and the rest."""
    if D < 0:
        raise ValueError("negative margin")
    inner = interior(lam, D)
    bulk_terms, edge_terms = [], []
    for t in phi.terms:
        if t.support not in lam:
            raise ValueError(f"term support {t.support} outside {lam}")
        if inner is not None and t.anchor in inner:
            bulk_terms.append(t)
        else:
            edge_terms.append(t)
    return EdgeBulkSplit(replace(phi, terms=edge_terms),
                         replace(phi, terms=bulk_terms), D)


def regroup_intervals(psi: Interaction, base_decay=None) -> Interaction:
    """Merge all terms sharing a support interval into a single term.

    Local Hamiltonians on every subinterval are unchanged.  When a base decay
    function is supplied (or carried by ``psi``), the regrouped interaction
    carries the associated regrouped decay function.
    """
    merged: dict[Interval, np.ndarray] = psi.grouped()
    terms = [Term(LocalOperator(m, supp, supp, psi.kind, psi.local_dim))
             for supp, m in sorted(merged.items())]
    decay = None
    base = base_decay or psi.decay
    if isinstance(base, ffunction.FFunctionSpec):
        decay = ffunction.regroup_decay(base)
    return Interaction(terms, psi.kind, psi.local_dim, decay=decay,
                       ball_keyed=False)


def fermion_to_spin(phi: Interaction) -> Interaction:
    """Termwise relabeling of an even fermionic interaction; norms unchanged."""
    if phi.kind != "fermion":
        raise ValueError("expected a fermionic interaction")
    terms = []
    for t in phi.terms:
        if parity_grade(t.op) != "even":
            raise ParityError(f"term on {t.support} is not even")
        terms.append(Term(jordan_wigner(t.op), anchor=t.anchor, radius=t.radius))
    return Interaction(terms, "spin", 2, decay=phi.decay,
                       ball_keyed=phi.ball_keyed)


def random_interaction(lam: Interval, seed: int, n_terms: int = 6,
                       max_diameter: int = 2, local_dim: int = 2,
                       decay=None, complex_entries: bool = True) -> Interaction:
    """Seeded random Hermitian interaction with interval supports in ``lam``."""
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n_terms):
        diam = int(rng.integers(0, max_diameter + 1))
        a = int(rng.integers(lam.a, lam.b - diam + 1))
        supp = Interval(a, a + diam)
        dim = local_dim ** len(supp)
        m = rng.standard_normal((dim, dim))
        if complex_entries:
            m = m + 1j * rng.standard_normal((dim, dim))
        m = (m + m.conj().T) / 2.0
        m /= max(1.0, operator_norm(m))
        terms.append(Term(LocalOperator(m, supp, lam, "spin", local_dim)))
    return Interaction(terms, "spin", local_dim, decay=decay)


# ---------------------------------------------------------------------------
# serialization


def to_json(phi: Interaction) -> str:
    terms = []
    for t in phi.terms:
        m = np.asarray(t.op.matrix, dtype=complex)
        flat = [[float(z.real), float(z.imag)] for z in m.ravel()]
        terms.append({"support": [t.support.a, t.support.b],
                      "anchor": t.anchor, "radius": t.radius,
                      "matrix": flat})
    return json.dumps({"kind": phi.kind, "local_dim": phi.local_dim,
                       "ball_keyed": phi.ball_keyed, "terms": terms},
                      separators=(",", ":"))


def from_json(text: str) -> Interaction:
    data = json.loads(text)
    terms = []
    for entry in data["terms"]:
        a, b = entry["support"]
        supp = Interval(int(a), int(b))
        dim = data["local_dim"] ** len(supp)
        m = np.array([complex(re, im) for re, im in entry["matrix"]],
                     dtype=complex).reshape(dim, dim)
        op = LocalOperator(m, supp, supp, data["kind"], data["local_dim"])
        terms.append(Term(op, anchor=entry["anchor"], radius=entry["radius"]))
    return Interaction(terms, data["kind"], data["local_dim"],
                       ball_keyed=data["ball_keyed"])
