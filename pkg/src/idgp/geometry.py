"""Sequential placement primitives and torsion/distance conversions.

Torsion sign convention: tau = 0 is the cis (coplanar, same side as the
great-grandparent atom) placement, tau = pi is trans, and the placements
for tau and -tau are mirror images across the predecessor plane. The
signed dihedral below is the exact inverse of `place_atom` on (-pi, pi].
"""

import math

import numpy as np

from .model import (
    DegenerateGeometryError,
    DomainKind,
    InfeasibleDiscretizationError,
    TorsionDomain,
)

_COLLINEAR_TOL = 1e-12
_COS_CLAMP_TOL = 1e-9


def place_first_three(d12: float, d23: float, theta3: float):
    """Fix atoms 1-3 in the xy-plane, removing rigid-motion freedom."""
    if d12 <= 0 or d23 <= 0:
        raise DegenerateGeometryError("nonpositive bond length")
    if not (0.0 < theta3 < math.pi):
        raise DegenerateGeometryError("bond angle outside (0, pi)")
    x1 = np.zeros(3)
    x2 = np.array([-d12, 0.0, 0.0])
    x3 = np.array([-d12 + d23 * math.cos(theta3), d23 * math.sin(theta3), 0.0])
    return x1, x2, x3


def local_frame(x_im3, x_im2, x_im1) -> np.ndarray:
    """Orthonormal frame at x_{i-1}: columns u1 (chain direction),
    u2 (predecessor-plane normal), u3 = u2 x u1 (in-plane)."""
    v1 = x_im1 - x_im2
    v2 = x_im3 - x_im2
    c = np.cross(v1, v2)
    cn = np.linalg.norm(c)
    if cn <= _COLLINEAR_TOL:
        raise DegenerateGeometryError("collinear predecessors")
    u1 = v1 / np.linalg.norm(v1)
    u2 = c / cn
    u3 = np.cross(u2, u1)
    return np.column_stack((u1, u2, u3))


def place_atom(x_im3, x_im2, x_im1, d: float, theta: float, tau: float):
    """Place atom i at distance d and bond angle theta from x_{i-1}, with
    torsion tau about the x_{i-2}->x_{i-1} axis."""
    if d <= 0:
        raise DegenerateGeometryError("nonpositive distance")
    if not (0.0 < theta < math.pi):
        raise DegenerateGeometryError("bond angle outside (0, pi)")
    U = local_frame(x_im3, x_im2, x_im1)
    s = d * math.sin(theta)
    # sin(tau) rides the plane normal (u2); cos(tau) the in-plane axis (u3)
    local = np.array([-d * math.cos(theta), s * math.sin(tau), s * math.cos(tau)])
    return x_im1 + U @ local


def place_atoms_batch(x_im3, x_im2, x_im1, d: float, theta: float, taus):
    """Vectorized `place_atom` over an array of torsions; returns 3 x len(taus)."""
    U = local_frame(x_im3, x_im2, x_im1)
    taus = np.asarray(taus, dtype=float)
    s = d * math.sin(theta)
    local = np.empty((3, taus.size))
    local[0] = -d * math.cos(theta)
    local[1] = s * np.sin(taus)
    local[2] = s * np.cos(taus)
    return x_im1[:, None] + U @ local


def dihedral(a, b, c, d) -> float:
    """Signed torsion of the quadruple (a, b, c, d) in (-pi, pi].

    Sign fixed so that dihedral(place_atom(..., tau)) == tau; with this
    convention a planar cis quadruple measures 0 and trans measures pi.
    """
    b1 = np.asarray(b) - np.asarray(a)
    b2 = np.asarray(c) - np.asarray(b)
    b3 = np.asarray(d) - np.asarray(c)
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    if np.linalg.norm(n1) <= _COLLINEAR_TOL or np.linalg.norm(n2) <= _COLLINEAR_TOL:
        raise DegenerateGeometryError("degenerate quadruple")
    m = np.cross(n1, b2 / np.linalg.norm(b2))
    x = float(np.dot(n1, n2))
    y = float(np.dot(m, n2))
    # negate y for the place_atom convention; keep signed zero out of atan2
    # so the trans case lands on +pi, not -pi
    return math.atan2(-y if y != 0.0 else 0.0, x)


def distance_from_torsion(inst, i: int, tau: float, x_im3, x_im2, x_im1) -> float:
    """Distance ||x_i - x_{i-3}|| realized by placing atom i at torsion tau."""
    d = inst.edge(i - 1, i).lower
    theta = inst.bond_angles[i]
    x = place_atom(x_im3, x_im2, x_im1, d, theta, tau)
    return float(np.linalg.norm(x - x_im3))


def _cos_affine_coefficients(inst, i: int):
    """Coefficients (a, b) of ||x_i - x_{i-3}||^2 = a + b cos(tau).

    Computed from two placements (tau = 0 and pi) on a canonical
    predecessor triple; exact because the relation is affine in cos(tau).
    """
    d_ab = inst.edge(i - 3, i - 2).lower
    d_bc = inst.edge(i - 2, i - 1).lower
    x1, x2, x3 = place_first_three(d_ab, d_bc, inst.bond_angles[i - 1])
    d0 = distance_from_torsion(inst, i, 0.0, x1, x2, x3)
    dpi = distance_from_torsion(inst, i, math.pi, x1, x2, x3)
    a = 0.5 * (d0 * d0 + dpi * dpi)
    b = 0.5 * (d0 * d0 - dpi * dpi)
    return a, b


def torsion_domain_from_distance(inst, i: int) -> TorsionDomain:
    """Invert the d_{i-3,i} interval into a sign-symmetric torsion domain."""
    e = inst.edge(i - 3, i)
    a, b = _cos_affine_coefficients(inst, i)
    s_lo, s_up = e.lower * e.lower, e.upper * e.upper

    if abs(b) <= _COLLINEAR_TOL:
        # distance independent of tau; either everything or nothing is feasible
        if s_lo - _COS_CLAMP_TOL <= a <= s_up + _COS_CLAMP_TOL:
            return TorsionDomain.symmetric(0.0, math.pi)
        raise InfeasibleDiscretizationError(
            f"edge ({e.i},{e.j}) unreachable by any torsion")

    c1 = (s_lo - a) / b
    c2 = (s_up - a) / b
    c_lo, c_hi = min(c1, c2), max(c1, c2)
    if c_hi < -1.0 - _COS_CLAMP_TOL or c_lo > 1.0 + _COS_CLAMP_TOL:
        raise InfeasibleDiscretizationError(
            f"edge ({e.i},{e.j}) bounds [{e.lower},{e.upper}] outside the "
            f"reachable distance range")
    c_lo = min(1.0, max(-1.0, c_lo))
    c_hi = min(1.0, max(-1.0, c_hi))

    if e.exact:
        t = math.acos(min(1.0, max(-1.0, (s_lo - a) / b)))
        return TorsionDomain.symmetric(t, t)
    return TorsionDomain.symmetric(math.acos(c_hi), math.acos(c_lo))


def sample_torsions(dom: TorsionDomain, rng, size: int) -> np.ndarray:
    """Draw `size` torsions uniformly over the domain."""
    if dom.kind is DomainKind.SINGLE:
        if dom.hi == dom.lo:
            return np.full(size, dom.lo)
        return rng.uniform(dom.lo, dom.hi, size)
    if dom.lo == 0.0 and dom.hi == 0.0:
        return np.zeros(size)
    # symmetric union: the two sides have equal length, pick each with p=1/2
    signs = 2.0 * rng.integers(0, 2, size) - 1.0
    if dom.hi == dom.lo:
        return signs * dom.lo
    return signs * rng.uniform(dom.lo, dom.hi, size)


def sample_torsion(dom: TorsionDomain, rng) -> float:
    return float(sample_torsions(dom, rng, 1)[0])
