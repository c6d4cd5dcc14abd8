"""Domain types for interval distance geometry instances.

All angles are radians internally; degrees appear only in files.
All distances are in Angstrom.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_COS_DEGENERACY_TOL = 1e-12


class IdgpError(Exception):
    """Base class for all solver errors."""


class InvalidBoundsError(IdgpError):
    pass


class DegenerateGeometryError(IdgpError):
    pass


class InfeasibleDiscretizationError(IdgpError):
    pass


class EmptyDomainError(IdgpError):
    pass


class DuplicateEdgeError(IdgpError):
    pass


class NonsmoothPointError(IdgpError):
    pass


class SelectionError(IdgpError):
    pass


@dataclass(frozen=True)
class AtomRecord:
    """One atom in the sequential ordering (1-based index)."""

    index: int
    name: str
    residue: int


@dataclass(frozen=True)
class EdgeConstraint:
    """Distance bounds for an unordered atom pair, stored with i < j."""

    i: int
    j: int
    lower: float
    upper: float
    weight: float = 1.0
    is_discretization: bool = False

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def key(self):
        return (self.i, self.j)


class DomainKind(Enum):
    SINGLE = "single"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class TorsionDomain:
    """Admissible torsion angles: one interval, or a sign-symmetric union.

    SINGLE denotes [lo, hi] with -pi <= lo <= hi <= pi.
    SYMMETRIC denotes [-hi, -lo] u [lo, hi] with 0 <= lo <= hi <= pi.
    """

    kind: DomainKind
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidBoundsError(f"torsion domain lo {self.lo} > hi {self.hi}")
        if self.kind is DomainKind.SYMMETRIC and self.lo < 0:
            raise InvalidBoundsError("symmetric union requires 0 <= lo")

    @staticmethod
    def single(lo: float, hi: float) -> "TorsionDomain":
        return TorsionDomain(DomainKind.SINGLE, lo, hi)

    @staticmethod
    def symmetric(lo: float, hi: float) -> "TorsionDomain":
        return TorsionDomain(DomainKind.SYMMETRIC, lo, hi)

    @staticmethod
    def point(tau: float) -> "TorsionDomain":
        return TorsionDomain(DomainKind.SINGLE, tau, tau)

    def contains(self, tau: float, tol: float = 0.0) -> bool:
        if self.kind is DomainKind.SINGLE:
            return self.lo - tol <= tau <= self.hi + tol
        return self.lo - tol <= abs(tau) <= self.hi + tol

    def length(self) -> float:
        w = self.hi - self.lo
        return w if self.kind is DomainKind.SINGLE else 2.0 * w


@dataclass
class Conformation:
    """Candidate solution: 3 x n coordinate matrix (Angstrom)."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[0] != 3:
            raise InvalidBoundsError("conformation coordinates must be 3 x n")

    @property
    def n(self) -> int:
        return self.coords.shape[1]


def as_coords(X) -> np.ndarray:
    """Accept a Conformation or a raw 3 x n array."""
    return X.coords if isinstance(X, Conformation) else np.asarray(X, dtype=float)


@dataclass(frozen=True)
class SolverParams:
    """Tunables of the construction, improvement and refinement phases."""

    n_trial: int = 500
    n_conf: int = 50
    n_tors: int = 20
    n_impr: int = 3
    eps_mde: float = 1e-3
    eps_lde: float = 1e-2
    eps_similar: float = 5.0
    stall_trials: int = 50
    spg_max_iter: int = 30000
    spg_stress_success: float = 1e-7
    spg_stall_window: int = 100
    rng_seed: int = 0
    time_limit: float = math.inf

    def __post_init__(self):
        for name in ("n_trial", "n_conf", "n_tors", "stall_trials",
                     "spg_max_iter", "spg_stall_window"):
            if getattr(self, name) <= 0:
                raise InvalidBoundsError(f"{name} must be positive")
        if self.n_impr < 0:  # zero disables the improvement phase (ablation)
            raise InvalidBoundsError("n_impr must be nonnegative")
        for name in ("eps_mde", "eps_lde", "eps_similar", "spg_stress_success"):
            if getattr(self, name) <= 0:
                raise InvalidBoundsError(f"{name} must be positive")


@dataclass
class Instance:
    """Weighted interval graph over ordered atoms plus derived torsion data.

    `edges` holds one record per unordered pair, keyed by (i, j) with i < j.
    `bond_angles[i]` (i >= 3) is the angle at atom i-1 between atoms i-2 and i.
    `torsion_domains[i]` (i >= 4) constrains the torsion of quadruple
    (i-3, i-2, i-1, i).
    """

    atoms: list
    edges: dict
    torsion_domains: dict = field(default_factory=dict)
    bond_angles: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.atoms)

    def edge(self, i: int, j: int):
        if i > j:
            i, j = j, i
        return self.edges.get((i, j))

    def sorted_edges(self):
        return [self.edges[k] for k in sorted(self.edges)]


def project_interval(r: float, lower: float, upper: float) -> float:
    """Nearest point of [lower, upper] to r."""
    if lower > upper:
        raise InvalidBoundsError(f"lower {lower} > upper {upper}")
    return min(max(r, lower), upper)


def bond_angle_from_distances(d_ab: float, d_bc: float, d_ac: float) -> float:
    """Angle at vertex b of the triangle with the given side lengths."""
    if d_ab <= 0 or d_bc <= 0 or d_ac <= 0:
        raise DegenerateGeometryError("nonpositive side length")
    c = (d_ab * d_ab + d_bc * d_bc - d_ac * d_ac) / (2.0 * d_ab * d_bc)
    if abs(c) > 1.0 + _COS_DEGENERACY_TOL:
        raise DegenerateGeometryError(f"no triangle with sides {d_ab}, {d_bc}, {d_ac}")
    c = min(1.0, max(-1.0, c))
    if abs(c) == 1.0:
        raise DegenerateGeometryError("collinear triple")
    return math.acos(c)


def validate_instance(inst: Instance) -> list:
    """Return every violated instance invariant; empty list means valid."""
    out = []
    n = inst.n
    for k, atom in enumerate(inst.atoms, start=1):
        if atom.index != k:
            out.append(f"atom index {atom.index} at position {k}: indices must be contiguous 1..n")

    for key, e in inst.edges.items():
        if key != (e.i, e.j):
            out.append(f"edge {key}: key does not match record pair ({e.i},{e.j})")
        if not (1 <= e.i < e.j <= n):
            out.append(f"edge ({e.i},{e.j}): indices out of range or not i < j")
            continue
        if not (0 < e.lower <= e.upper):
            out.append(f"edge ({e.i},{e.j}): bounds must satisfy 0 < lower <= upper")
        if e.j - e.i in (1, 2) and not e.exact:
            out.append(f"edge ({e.i},{e.j}): distance across at most two bonds must be exact")
        if e.weight <= 0:
            out.append(f"edge ({e.i},{e.j}): weight must be positive")
        if e.is_discretization != (e.j - e.i in (1, 2, 3)):
            out.append(f"edge ({e.i},{e.j}): discretization flag inconsistent with index gap")

    for i in range(4, n + 1):
        for j, need_exact in ((i - 1, True), (i - 2, True), (i - 3, False)):
            e = inst.edge(j, i)
            if e is None:
                out.append(f"missing required edge ({j},{i})")
            elif need_exact and not e.exact:
                out.append(f"edge ({j},{i}): must be exact")

    for i in range(3, n + 1):
        theta = inst.bond_angles.get(i)
        if theta is None:
            out.append(f"missing bond angle for atom {i}")
        elif not (0.0 < theta < math.pi):
            out.append(f"bond angle at atom {i} outside (0, pi)")

    for i in range(4, n + 1):
        if i not in inst.torsion_domains:
            out.append(f"missing torsion domain for atom {i}")

    return out
