r"""Local operators on finite spin and fermion chains.

Matrices are stored in the site-lexicographic product basis: the leftmost site
of the support is the most significant digit.  For fermions the single-site
basis is (empty, occupied) and creation/annihilation matrices carry the usual
occupancy-string signs, i.e. ``a(x)`` on a chain is the string-dressed
lowering matrix ``Z^(x-a) (x) s^- (x) 1``.  Under the identification
"occupied = up" an even fermionic operator supported on an interval has the
same matrix as its spin image, so the algebra map between the two pictures is
a relabeling for even operators while odd operators pick up the string and a
support stretching to the left chain edge.

Dense matrices are refused above ``MAX_DENSE_DIM`` (14 sites at local
dimension 2, 9 sites at local dimension 3).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lattice import Interval

MAX_DENSE_DIM = 3 ** 9

# single-site constants (local dimension 2)
ID2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
# basis order (empty, occupied): lower = annihilate, raise = create
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
RAISE = LOWER.T.copy()
# string sign (-1)^n in the same basis
STRING_Z = np.diag([1.0, -1.0]).astype(complex)


class ParityError(ValueError):
    """Raised when an operation requires a definite (even) fermion parity."""


def spin_matrices(d: int):
    """Spin matrices (Sx, Sy, Sz) for local dimension d = 2S+1."""
    s = (d - 1) / 2.0
    m = s - np.arange(d)
    raising = np.zeros((d, d), dtype=complex)
    for k in range(d - 1):
        raising[k, k + 1] = np.sqrt(s * (s + 1) - m[k + 1] * (m[k + 1] + 1))
    sx = (raising + raising.conj().T) / 2.0
    sy = (raising - raising.conj().T) / 2.0j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def operator_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m), 2))


def _check_dense(dim):
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dense dimension {dim} exceeds {MAX_DENSE_DIM}")


@dataclass
class LocalOperator:
    """A matrix acting on the sites of ``support`` inside the chain ``ambient``."""

    matrix: np.ndarray
    support: Interval
    ambient: Interval
    kind: str = "spin"
    local_dim: int = 2
    string_attached: bool = False

    def __post_init__(self):
        if self.kind not in ("spin", "fermion"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "fermion" and self.local_dim != 2:
            raise ValueError("fermion chains have local dimension 2")
        if self.support not in self.ambient:
            raise ValueError(f"support {self.support} outside ambient {self.ambient}")
        m = np.asarray(self.matrix)
        if not np.issubdtype(m.dtype, np.floating) and not np.issubdtype(m.dtype, np.complexfloating):
            m = m.astype(complex)
        self.matrix = m
        want = self.local_dim ** len(self.support)
        if self.matrix.shape != (want, want):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match "
                             f"support {self.support} at local dimension {self.local_dim}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def norm(self) -> float:
        return operator_norm(self.matrix)

    def dagger(self):
        return replace(self, matrix=self.matrix.conj().T.copy())

    def is_hermitian(self, tol=1e-12):
        return np.allclose(self.matrix, self.matrix.conj().T, atol=tol * max(1.0, self.norm()))

    def __add__(self, other):
        if not isinstance(other, LocalOperator):
            return NotImplemented
        if other.support != self.support or other.kind != self.kind:
            raise ValueError("add requires identical supports and kinds")
        return replace(self, matrix=self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, LocalOperator):
            return NotImplemented
        return self + replace(other, matrix=-other.matrix)

    def __mul__(self, scalar):
        return replace(self, matrix=self.matrix * scalar)

    __rmul__ = __mul__


def identity(lam: Interval, kind="spin", local_dim=2, ambient=None) -> LocalOperator:
    dim = local_dim ** len(lam)
    _check_dense(dim)
    return LocalOperator(np.eye(dim, dtype=complex), lam, ambient or lam,
                         kind, local_dim)


def parity_matrix(n_sites: int) -> np.ndarray:
    """Diagonal of (-1)^(number of occupied sites) on n_sites, local dim 2."""
    idx = np.arange(2 ** n_sites)
    pop = np.zeros_like(idx)
    v = idx.copy()
    while v.any():
        pop += v & 1
        v >>= 1
    return np.where(pop % 2 == 0, 1.0, -1.0)


def parity_grade(op: LocalOperator, tol: float = 1e-12) -> str:
    """Grade of a local-dimension-2 operator under the occupancy parity: even/odd/mixed."""
    if op.local_dim != 2:
        raise ValueError("parity grading needs local dimension 2")
    p = parity_matrix(len(op.support))
    conj = p[:, None] * op.matrix * p[None, :]
    scale = max(1.0, op.norm())
    if np.max(np.abs(conj - op.matrix)) <= tol * scale:
        return "even"
    if np.max(np.abs(conj + op.matrix)) <= tol * scale:
        return "odd"
    return "mixed"


def embed(op: LocalOperator, target: Interval) -> LocalOperator:
    """Extend by identity onto ``target``; odd/mixed fermion parts are refused."""
    if op.support not in target or target not in op.ambient:
        raise ValueError("target must contain the support and sit inside the ambient")
    if op.kind == "fermion" and parity_grade(op) != "even":
        raise ParityError("only even fermionic operators embed without a string")
    d = op.local_dim
    nl = op.support.a - target.a
    nr = target.b - op.support.b
    _check_dense(d ** len(target))
    m = np.kron(np.eye(d ** nl), np.kron(op.matrix, np.eye(d ** nr)))
    return LocalOperator(m, target, op.ambient, op.kind, d)


def annihilator(lam: Interval, x: int) -> LocalOperator:
    """String-dressed mode annihilator at site x on the chain lam."""
    if x not in lam:
        raise ValueError(f"site {x} outside {lam}")
    _check_dense(2 ** len(lam))
    m = np.eye(1, dtype=complex)
    for site in lam:
        if site < x:
            m = np.kron(m, STRING_Z)
        elif site == x:
            m = np.kron(m, LOWER)
        else:
            m = np.kron(m, ID2)
    return LocalOperator(m, lam, lam, "fermion")


def creator(lam: Interval, x: int) -> LocalOperator:
    return annihilator(lam, x).dagger()


def mode_annihilator(lam: Interval, coeffs: dict) -> LocalOperator:
    """Annihilator of the mode sum_x coeffs[x] e_x (an orbital)."""
    out = None
    for x, cx in coeffs.items():
        term = annihilator(lam, x) * np.conj(cx)
        out = term if out is None else out + term
    if out is None:
        raise ValueError("empty orbital")
    return out


def number_operator(lam: Interval) -> LocalOperator:
    """Total occupancy N = sum_x a*(x) a(x); diagonal popcount matrix."""
    n = len(lam)
    _check_dense(2 ** n)
    idx = np.arange(2 ** n)
    pop = np.zeros_like(idx)
    v = idx.copy()
    while v.any():
        pop += v & 1
        v >>= 1
    return LocalOperator(np.diag(pop.astype(complex)), lam, lam, "fermion")


def partial_trace(op: LocalOperator, keep: Interval) -> LocalOperator:
    r"""Normalized partial trace onto the sites of ``keep``.

    Averages out the complement with the normalized trace, so the identity
    maps to the identity and the map is a conditional expectation onto the
    observables of ``keep``.  Requires the spin kind (for fermions, take the
    even part through the chain-algebra relabeling first).
    """
    if op.kind != "spin":
        raise ValueError("partial_trace acts on spin-kind operators")
    if keep not in op.support:
        raise ValueError(f"keep {keep} not inside support {op.support}")
    d = op.local_dim
    nl = keep.a - op.support.a
    nk = len(keep)
    nr = op.support.b - keep.b
    dl, dk, dr = d ** nl, d ** nk, d ** nr
    m = op.matrix.reshape(dl, dk, dr, dl, dk, dr)
    out = np.einsum("aibajb->ij", m) / (dl * dr)
    return LocalOperator(out, keep, op.ambient, op.kind, d)


def conditional_expectation(op: LocalOperator, keep: Interval) -> LocalOperator:
    """Partial trace for spin operators, extended to even fermionic ones."""
    if op.kind == "fermion":
        if parity_grade(op) != "even":
            raise ParityError("conditional expectation needs an even operator")
        spin_view = replace(op, kind="spin")
        out = partial_trace(spin_view, keep)
        return replace(out, kind="fermion")
    return partial_trace(op, keep)


def delta_layer(op: LocalOperator, lam: Interval, x: int, n: int) -> LocalOperator:
    r"""Layer ``n`` of the ball decomposition of ``op`` around ``x``.

    Layer 0 is the conditional expectation onto the radius-0 ball; layer
    ``n >= 1`` is the difference of the expectations onto the radius-``n``
    and radius-``n-1`` balls.  The layers telescope back to ``op`` and vanish
    once the smaller ball already contains the support of ``op``.
    """
    from .lattice import ball
    if op.support != lam:
        op = embed(op, lam)
    bn = ball(lam, x, n)
    if n == 0:
        return conditional_expectation(op, bn)
    bprev = ball(lam, x, n - 1)
    hi = conditional_expectation(op, bn)
    lo = conditional_expectation(op, bprev)
    if bn == bprev:  # ball saturated: layer vanishes identically
        return replace(hi, matrix=np.zeros_like(hi.matrix))
    lo_e = embed(lo, bn) if lo.kind == "spin" else \
        replace(embed(replace(lo, kind="spin"), bn), kind="fermion")
    return hi - lo_e


def jordan_wigner(op: LocalOperator) -> LocalOperator:
    r"""Image of a fermionic operator in the spin picture.

    Even operators keep their matrix and support.  Operators with an odd part
    keep the matrix *of the chain embedding*, which attaches the sign string:
    the image is supported on ``[ambient.a, support.b]`` and flagged.
    """
    if op.kind != "fermion":
        raise ValueError("jordan_wigner maps fermionic operators")
    grade = parity_grade(op)
    if grade == "even":
        return LocalOperator(op.matrix.copy(), op.support, op.ambient, "spin")
    # split into even and odd parts; the odd part is dressed by the string
    p = parity_matrix(len(op.support))
    conj = p[:, None] * op.matrix * p[None, :]
    even_part = (op.matrix + conj) / 2.0
    odd_part = (op.matrix - conj) / 2.0
    stretched = Interval(op.ambient.a, op.support.b)
    nl = op.support.a - stretched.a
    _check_dense(2 ** len(stretched))
    ident = np.eye(2 ** nl, dtype=complex)
    string = np.diag(parity_matrix(nl)).astype(complex)
    m = np.kron(ident, even_part) + np.kron(string, odd_part)
    return LocalOperator(m, stretched, op.ambient, "spin",
                         string_attached=True)
