"""Construction, sign-flip improvement and multistart refinement."""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import geometry, metrics
from .model import (
    Conformation,
    DomainKind,
    EmptyDomainError,
    Instance,
    SelectionError,
    SolverParams,
    TorsionDomain,
    as_coords,
)
from .spg import SpgParams, spg_minimize

_CA_SUBSET_THRESHOLD = 200


@dataclass
class _AtomPrep:
    back: np.ndarray    # 0-based indices of atoms j < i sharing an edge with i
    lower: np.ndarray
    upper: np.ndarray
    d_prev: float       # exact d_{i-1,i}
    theta: float


def _prepare(inst: Instance):
    prep = inst.__dict__.get("_search_prep")
    if prep is not None:
        return prep
    back = {i: [] for i in range(1, inst.n + 1)}
    for (i, j), e in inst.edges.items():
        back[j].append((i - 1, e.lower, e.upper))
    prep = {}
    for i in range(4, inst.n + 1):
        rows = sorted(back[i])
        prep[i] = _AtomPrep(
            back=np.array([r[0] for r in rows], dtype=int),
            lower=np.array([r[1] for r in rows]),
            upper=np.array([r[2] for r in rows]),
            d_prev=inst.edge(i - 1, i).lower,
            theta=inst.bond_angles[i],
        )
    inst.__dict__["_search_prep"] = prep
    return prep


def greedy_construction(inst: Instance, n_tors: int, rng, domains=None):
    """Build a conformation atom by atom, keeping the sampled torsion with
    the smallest local inconsistency at each step.

    Returns (torsion assignment dict, Conformation).
    """
    if domains is None:
        domains = inst.torsion_domains
    prep = _prepare(inst)
    n = inst.n
    X = np.empty((3, n))
    x1, x2, x3 = place_first_three_for(inst)
    X[:, 0], X[:, 1], X[:, 2] = x1, x2, x3
    tau = {}
    for i in range(4, n + 1):
        p = prep[i]
        taus = geometry.sample_torsions(domains[i], rng, n_tors)
        cand = geometry.place_atoms_batch(X[:, i - 4], X[:, i - 3], X[:, i - 2],
                                          p.d_prev, p.theta, taus)
        diffs = cand[:, None, :] - X[:, p.back][:, :, None]
        r = np.linalg.norm(diffs, axis=0)
        delta = np.maximum(0.0, np.maximum((p.lower[:, None] - r) / p.lower[:, None],
                                           (r - p.upper[:, None]) / p.upper[:, None]))
        best = int(np.argmin(delta.max(axis=0)))
        X[:, i - 1] = cand[:, best]
        tau[i] = float(taus[best])
    return tau, Conformation(X)


def place_first_three_for(inst: Instance):
    return geometry.place_first_three(inst.edge(1, 2).lower,
                                      inst.edge(2, 3).lower,
                                      inst.bond_angles[3])


def sign_restricted_domain(dom: TorsionDomain, tau: float) -> TorsionDomain:
    """Portion of the domain on the same side of zero as tau.

    tau == 0 keeps the full domain (no side to commit to).
    """
    if tau == 0.0:
        return dom
    if dom.kind is DomainKind.SYMMETRIC:
        if tau > 0.0:
            return TorsionDomain.single(dom.lo, dom.hi)
        return TorsionDomain.single(-dom.hi, -dom.lo)
    if tau > 0.0:
        if dom.hi < 0.0:
            raise EmptyDomainError("domain lies entirely on the negative side")
        return TorsionDomain.single(max(dom.lo, 0.0), dom.hi)
    if dom.lo > 0.0:
        raise EmptyDomainError("domain lies entirely on the positive side")
    return TorsionDomain.single(dom.lo, min(dom.hi, 0.0))


def improve(X, tau: dict, inst: Instance, n_tors: int, rng):
    """One sweep of sign flips; each flip is kept only if the global LDE
    strictly decreases. Never increases the LDE."""
    current_lde = metrics.lde_global(X, inst)
    for i in range(4, inst.n + 1):
        t_i = tau[i]
        dom = inst.torsion_domains[i]
        if t_i == 0.0 or not dom.contains(-t_i):
            continue
        trial_domains = dict(inst.torsion_domains)
        trial_domains[i] = sign_restricted_domain(dom, -t_i)
        tau_trial, X_trial = greedy_construction(inst, n_tors, rng, trial_domains)
        lde_trial = metrics.lde_global(X_trial, inst)
        if lde_trial < current_lde:
            X, tau, current_lde = X_trial, tau_trial, lde_trial
    return X, tau


def _selection(inst: Instance):
    if inst.n <= _CA_SUBSET_THRESHOLD:
        return np.arange(inst.n)
    sel = np.array([a.index - 1 for a in inst.atoms if a.name == "CA"], dtype=int)
    if sel.size == 0:
        raise SelectionError("no CA-named atoms for large-instance RMSD subset")
    return sel


def kabsch_rmsd(X, Y, inst: Instance) -> float:
    """RMSD after optimal proper-rotation superposition (Kabsch).

    Uses all atoms for n <= 200, otherwise the CA subset.
    """
    sel = _selection(inst)
    A = as_coords(X)[:, sel]
    B = as_coords(Y)[:, sel]
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    H = A @ B.T
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return float(np.linalg.norm(B - R @ A) / math.sqrt(sel.size))


@dataclass
class MultistartReport:
    status: str                 # Solved | BestEffort | TimeLimit
    conformation: Conformation
    torsions: dict
    lde: float
    mde: float
    trials: int
    pool_size: int
    pool: list                  # (Conformation, mde, lde, torsions) tuples
    stress_success: bool        # SPG reached the stress tolerance at least once
    wall_time: float
    seed: int


def multistart_solve(inst: Instance, params: SolverParams) -> MultistartReport:
    """Multistart greedy construction + improvement, RMSD de-duplication and
    SPG refinement of the stress model; early return on LDE/MDE tolerance."""
    start = time.monotonic()
    problem = metrics.StressProblem(inst)
    spg_params = SpgParams(max_iter=params.spg_max_iter,
                           success_f=params.spg_stress_success,
                           stall_window=params.spg_stall_window)
    streams = np.random.SeedSequence(params.rng_seed).spawn(params.n_trial)

    pool = []           # (Conformation, mde, lde, tau)
    best = None         # smallest-MDE candidate seen, fallback when pool empty
    stress_success = False
    stall = 0
    trials = 0
    status = "BestEffort"

    def report(conf, tau, lde, mde, st):
        return MultistartReport(st, conf, tau, lde, mde, trials, len(pool),
                                list(pool), stress_success,
                                time.monotonic() - start, params.rng_seed)

    for c in range(params.n_trial):
        if best is not None and time.monotonic() - start > params.time_limit:
            status = "TimeLimit"
            break
        trials += 1
        rng = np.random.default_rng(streams[c])

        tau, conf = greedy_construction(inst, params.n_tors, rng)
        for _ in range(params.n_impr):
            conf, tau = improve(conf, tau, inst, params.n_tors, rng)
        mde = metrics.mde_global(conf, inst)
        lde = metrics.lde_global(conf, inst)
        if best is None or mde < best[1]:
            best = (conf, mde, lde, tau)
        if mde <= params.eps_mde or lde <= params.eps_lde:
            return report(conf, tau, lde, mde, "Solved")

        if any(kabsch_rmsd(conf, p[0], inst) <= params.eps_similar for p in pool):
            stall += 1
            if stall >= params.stall_trials:
                break
            continue

        z0 = problem.pack(conf.coords, problem.init_d(conf.coords))
        result = spg_minimize(problem.objective, problem.gradient,
                              problem.project, z0, spg_params)
        if result.f_final <= params.spg_stress_success:
            stress_success = True
        coords, _ = problem.unpack(result.z_final)
        conf = Conformation(coords.copy())
        mde = metrics.mde_global(conf, inst)
        lde = metrics.lde_global(conf, inst)
        if mde < best[1]:
            best = (conf, mde, lde, tau)
        if mde <= params.eps_mde or lde <= params.eps_lde:
            return report(conf, tau, lde, mde, "Solved")

        # re-check distinctness: SPG can pull a candidate onto a pooled one
        if any(kabsch_rmsd(conf, p[0], inst) <= params.eps_similar for p in pool):
            stall += 1
            if stall >= params.stall_trials:
                break
            continue
        pool.append((conf, mde, lde, tau))
        stall = 0
        if len(pool) > params.n_conf:
            break

    if pool:
        conf, mde, lde, tau = min(pool, key=lambda p: p[1])
    else:
        conf, mde, lde, tau = best
    if mde <= params.eps_mde or lde <= params.eps_lde:
        status = "Solved"
    return report(conf, tau, lde, mde, status)
