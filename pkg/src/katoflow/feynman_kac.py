"""Feynman-Kac Monte Carlo for the Schrodinger semigroup e^{-tH_V}.

The estimator averages exp(-int_0^t V(w(s)) ds) * Psi(w(t)) over Brownian
paths.  The action integral is a trapezoid on the path skeleton with
adaptive Brownian-bridge refinement near singularity approaches, and V is
clipped to a cap ladder whose level is chosen by the epsilon-halving rule
(stop once the estimate moves by less than half a standard error).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import paths
from . import potentials as pot
from . import streams
from .errors import (
    DivergentBoundError,
    NonKatoError,
    TimeDomainError,
    UnsupportedRefinementError,
)

_CAP_LEVELS = 7
_NEAR_FACTOR = 4.0  # refine when dist(endpoint, singularity) < 4*sqrt(2*delta)


@dataclass
class SemigroupEstimate:
    x: np.ndarray
    t: float
    value: float
    stderr: float
    n_paths: int
    action_integrator: dict
    seed: object  # int or tuple of ints
    flags: list = field(default_factory=list)

    def to_dict(self):
        seed = self.seed
        if isinstance(seed, (tuple, list)):
            seed = list(int(s) for s in seed)
        return {
            "record": "semigroup_estimate",
            "x": list(np.asarray(self.x, dtype=float)),
            "t": self.t,
            "value": self.value,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "epsilon": self.action_integrator.get("epsilon"),
            "grid_step": self.action_integrator.get("grid_step"),
            "seed": seed,
            "flags": list(self.flags),
        }


@dataclass
class KhashminskiiCertificate:
    r: float
    kappa: float
    bound_on_C_exp: float
    subdivisions: int = 1
    kappa_per_interval: float = None
    paper_style_bound: float = None  # 2*exp(C_V r) for user-supplied C_V
    details: dict = field(default_factory=dict)


@dataclass
class TruncationLadderReport:
    levels: list  # [(n, m)]
    estimates: list
    stderrs: list
    monotone_decreasing_in_m: bool
    monotone_increasing_in_n: bool
    converged: bool
    flags: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# path + refined-leaf engine
# ---------------------------------------------------------------------------


def _chunk_leaves(space, V, x, t, size, rng, n_steps, tol, max_depth):
    """Simulate a chunk of paths and refine action intervals near singularities.

    Returns (endpoints, leaves) where leaves is a list of
    (path_index_array, interval_length, v_left_array, v_right_array).
    """
    h = t / n_steps
    if space.kind == "euclidean":
        d = space.dimension
        incr = rng.standard_normal((size, n_steps, d)) * math.sqrt(2.0 * h)
        pts = np.empty((size, n_steps + 1, d))
        pts[:, 0, :] = x
        np.cumsum(incr, axis=1, out=pts[:, 1:, :])
        pts[:, 1:, :] += x
    else:
        d = space.embedding_dim
        _times, pts = paths.sample_paths_batch(space, x, t, h, size, rng)
    ends = pts[:, -1, :].copy()

    flat = pts.reshape(-1, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        vraw = np.asarray(V(flat), dtype=float).reshape(size, n_steps + 1)

    sing_dist = V.singularity_distance(flat)
    leaves = []
    if sing_dist is None:
        pid = np.repeat(np.arange(size), n_steps)
        leaves.append((pid, h, vraw[:, :-1].ravel(), vraw[:, 1:].ravel()))
        return ends, leaves
    if space.kind != "euclidean":
        raise UnsupportedRefinementError(
            "singular potentials are restricted to Euclidean spaces"
        )

    dist = np.asarray(sing_dist, dtype=float).reshape(size, n_steps + 1)
    pid = np.repeat(np.arange(size), n_steps)
    xl = pts[:, :-1, :].reshape(-1, d)
    xr = pts[:, 1:, :].reshape(-1, d)
    vl = vraw[:, :-1].ravel()
    vr = vraw[:, 1:].ravel()
    dl = dist[:, :-1].ravel()
    dr = dist[:, 1:].ravel()

    delta = h
    near = np.minimum(dl, dr) < _NEAR_FACTOR * math.sqrt(2.0 * delta)
    leaves.append((pid[~near], delta, vl[~near], vr[~near]))
    pid, xl, xr, vl, vr = pid[near], xl[near], xr[near], vl[near], vr[near]
    dl, dr = dl[near], dr[near]

    for _depth in range(max_depth):
        if pid.size == 0:
            break
        half = delta / 2.0
        mid = 0.5 * (xl + xr) + math.sqrt(half) * rng.standard_normal(xl.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            vm = np.asarray(V(mid), dtype=float)
        dm = np.asarray(V.singularity_distance(mid), dtype=float)
        with np.errstate(invalid="ignore"):
            disc = delta * np.abs(2.0 * vm - vl - vr) / 4.0
        disc = np.where(np.isnan(disc), np.inf, disc)
        keep = disc > tol  # parents worth another level

        # children of settled parents become leaves right away
        for a, b in ((vl[~keep], vm[~keep]), (vm[~keep], vr[~keep])):
            leaves.append((pid[~keep], half, a, b))

        pid_k = pid[keep]
        c_pid = np.concatenate([pid_k, pid_k])
        c_xl = np.concatenate([xl[keep], mid[keep]])
        c_xr = np.concatenate([mid[keep], xr[keep]])
        c_vl = np.concatenate([vl[keep], vm[keep]])
        c_vr = np.concatenate([vm[keep], vr[keep]])
        c_dl = np.concatenate([dl[keep], dm[keep]])
        c_dr = np.concatenate([dm[keep], dr[keep]])

        delta = half
        near = np.minimum(c_dl, c_dr) < _NEAR_FACTOR * math.sqrt(2.0 * delta)
        leaves.append((c_pid[~near], delta, c_vl[~near], c_vr[~near]))
        pid, xl, xr = c_pid[near], c_xl[near], c_xr[near]
        vl, vr = c_vl[near], c_vr[near]
        dl, dr = c_dl[near], c_dr[near]

    if pid.size:
        leaves.append((pid, delta, vl, vr))
    return ends, leaves


def _actions_from_leaves(leaves, size, lo, hi):
    """Trapezoid actions with V clipped to [lo, hi], summed per path."""
    action = np.zeros(size)
    for pid, delta, vl, vr in leaves:
        if pid.size == 0:
            continue
        contrib = delta * (np.clip(vl, lo, hi) + np.clip(vr, lo, hi)) / 2.0
        action += np.bincount(pid, weights=contrib, minlength=size)
    return action


def _kato_gate(V, t, kato0):
    """Feynman-Kac admissibility: Kato certificate or a finite lower bound."""
    if V.is_zero or V.lower_bound is not None:
        return kato0
    if kato0 is not None:
        if not kato0.finite:
            raise NonKatoError("supplied alpha=0 certificate is infinite")
        if kato0.t < t - 1e-12:
            raise NonKatoError(
                f"certificate horizon {kato0.t} is below the requested t={t}"
            )
        return kato0
    cert = pot.kato_integral(V, 0.0, t)
    if not cert.finite:
        raise NonKatoError(
            f"{V.name} is not certified alpha=0 Kato at horizon {t}; "
            "Feynman-Kac evaluation refused"
        )
    return cert


def fk_evaluate(
    V,
    psi,
    x,
    t,
    n_paths,
    seed,
    grid_step=None,
    eps0=0.05,
    tol=5e-5,
    max_depth=16,
    kato0=None,
    workers=1,
    check_bound=True,
):
    """Monte Carlo estimate of e^{-tH_V} psi (x)."""
    space = V.space
    x = space.check_point(x)
    if t <= 0:
        raise TimeDomainError("t must be > 0")
    kato0 = _kato_gate(V, t, kato0)
    if grid_step is None:
        grid_step = t / 100.0
    n_steps = max(1, int(round(t / grid_step)))
    grid_step = t / n_steps

    if V.is_zero:
        # conservative kernel: no variance at all for constant psi
        pass

    caps = (1.0 / eps0) * 2.0 ** np.arange(_CAP_LEVELS)
    lo_bound = V.lower_bound  # finite => negative clipping is inert

    def chunk(rng, size, _k):
        ends, leaves = _chunk_leaves(
            space, V, x, t, size, rng, n_steps, tol, max_depth
        )
        pvals = np.asarray(psi(ends), dtype=float)
        sums = np.empty(_CAP_LEVELS)
        sqs = np.empty(_CAP_LEVELS)
        n_leaves = sum(p[0].size for p in leaves)
        for k, cap in enumerate(caps):
            lo = -cap if lo_bound is None else max(-cap, lo_bound)
            action = _actions_from_leaves(leaves, size, lo, cap)
            w = np.exp(-action) * pvals
            sums[k] = w.sum()
            sqs[k] = (w * w).sum()
        return sums, sqs, size, n_leaves

    parts = streams.map_chunks(chunk, n_paths, seed, streams.TAG_FK, workers=workers)
    sums = np.sum([p[0] for p in parts], axis=0)
    sqs = np.sum([p[1] for p in parts], axis=0)
    n = sum(p[2] for p in parts)
    n_leaves = sum(p[3] for p in parts)
    means = sums / n
    ses = np.sqrt(np.maximum(sqs / n - means**2, 0.0) / n)
    k_star = _CAP_LEVELS - 1
    for k in range(1, _CAP_LEVELS):
        if abs(means[k] - means[k - 1]) <= 0.5 * ses[k]:
            k_star = k
            break
    value = float(means[k_star])
    stderr = float(ses[k_star])
    flags = []
    if k_star == _CAP_LEVELS - 1 and abs(means[-1] - means[-2]) >= 0.5 * ses[-1]:
        flags.append("cap_ladder_not_converged")
    sup_psi = getattr(psi, "sup_norm", None)
    if check_bound and sup_psi is not None:
        c_exp = None
        if V.is_zero:
            c_exp = 1.0
        elif kato0 is not None and kato0.finite:
            c_exp = khashminskii_certify(V, t, kato0=kato0).bound_on_C_exp
        elif V.lower_bound is not None:
            c_exp = math.exp(-min(V.lower_bound, 0.0) * t)
        if c_exp is not None and abs(value) - 3.0 * stderr > c_exp * sup_psi:
            flags.append("integration_bias_warning")
            warnings.warn(
                "estimate exceeds the Khashminskii bound: "
                f"|{value:g}| > {c_exp * sup_psi:g}",
                stacklevel=2,
            )
    return SemigroupEstimate(
        x,
        t,
        value,
        stderr,
        n,
        {
            "grid_step": grid_step,
            "epsilon": float(1.0 / caps[k_star]),
            "refinement": {"tol": tol, "max_depth": max_depth,
                           "near_factor": _NEAR_FACTOR},
            "n_leaves": int(n_leaves),
        },
        seed if isinstance(seed, int) else tuple(seed),
        flags,
    )


# ---------------------------------------------------------------------------
# Khashminskii certificates and the empirical exponential moment
# ---------------------------------------------------------------------------


def khashminskii_certify(V, r, kato0=None, c_v=None, max_subdivisions=64):
    """Bound on C_exp(V, r) = sup_x E^x exp(int_0^r |V|) from kappa < 1.

    kappa < 1 gives 1/(1-kappa); otherwise r is subdivided into k intervals
    with per-interval kappa < 1/2 and the bound is (1/(1-kappa_k))^k via the
    Markov property."""
    if kato0 is None:
        kato0 = pot.kato_integral(V, 0.0, r)
    kappa = kato0.bound + 0.0
    if math.isinf(kappa):
        raise DivergentBoundError("alpha=0 Kato bound is infinite; no certificate")
    paper = None if c_v is None else 2.0 * math.exp(c_v * r)
    if kappa < 1.0:
        return KhashminskiiCertificate(
            r, kappa, 1.0 / (1.0 - kappa), 1, kappa, paper
        )
    for k in range(2, max_subdivisions + 1):
        kap_k = pot.kato_integral(V, 0.0, r / k).bound
        if kap_k < 0.5:
            return KhashminskiiCertificate(
                r, kappa, (1.0 / (1.0 - kap_k)) ** k, k, kap_k, paper
            )
    raise DivergentBoundError(
        f"could not reach per-interval kappa < 1/2 within {max_subdivisions} splits"
    )


class _NegAbs(pot.Potential):
    """-|V|: feeding this to the action engine yields weights exp(+int |V|)."""

    def __init__(self, base):
        self.base = base
        self.space = base.space
        self.singularities = base.singularities
        self.lower_bound = None
        self.name = f"-|{base.name}|"

    def __call__(self, pts):
        return -np.abs(self.base(pts))

    def singularity_distance(self, pts):
        return self.base.singularity_distance(pts)


def exp_action_moment(
    V, x, r, n_paths, seed, grid_step=None, eps0=0.05, tol=5e-5,
    max_depth=16, workers=1
):
    """Empirical (mean, stderr) of exp(int_0^r |V(w(s))| ds) from x."""
    est = fk_evaluate(
        _NegAbs(V),
        lambda pts: np.ones(np.atleast_2d(pts).shape[0]),
        x,
        r,
        n_paths,
        seed,
        grid_step=grid_step,
        eps0=eps0,
        tol=tol,
        max_depth=max_depth,
        kato0=pot.KatoCertificate(0.0, r, 0.0, "gate_bypass"),
        workers=workers,
        check_bound=False,
    )
    return est.value, est.stderr


# ---------------------------------------------------------------------------
# the V_{n,m} truncation ladder
# ---------------------------------------------------------------------------


def truncation_ladder(
    V, psi, x, t, levels, n_paths, seed, grid_step=None, tol=5e-5,
    max_depth=16, workers=1
):
    """fk_evaluate with V clipped to [-n, m] per level, common random numbers.

    With shared paths the monotonicity of the capped action is path-wise
    exact: estimates decrease in m and increase in n (for psi >= 0)."""
    space = V.space
    x = space.check_point(x)
    if grid_step is None:
        grid_step = t / 100.0
    n_steps = max(1, int(round(t / grid_step)))
    levels = [(float(n), float(m)) for n, m in levels]

    def chunk(rng, size, _k):
        ends, leaves = _chunk_leaves(
            space, V, x, t, size, rng, n_steps, tol, max_depth
        )
        pvals = np.asarray(psi(ends), dtype=float)
        sums = np.empty(len(levels))
        sqs = np.empty(len(levels))
        for i, (n_low, m_high) in enumerate(levels):
            action = _actions_from_leaves(leaves, size, -n_low, m_high)
            w = np.exp(-action) * pvals
            sums[i] = w.sum()
            sqs[i] = (w * w).sum()
        return sums, sqs, size

    parts = streams.map_chunks(chunk, n_paths, seed, streams.TAG_FK, workers=workers)
    sums = np.sum([p[0] for p in parts], axis=0)
    sqs = np.sum([p[1] for p in parts], axis=0)
    n = sum(p[2] for p in parts)
    means = (sums / n).tolist()
    ses = np.sqrt(np.maximum(sqs / n - np.asarray(means) ** 2, 0.0) / n).tolist()

    mono_m = True
    mono_n = True
    for (n1, m1), e1 in zip(levels, means):
        for (n2, m2), e2 in zip(levels, means):
            if n1 == n2 and m2 > m1 and e2 > e1 + 1e-12:
                mono_m = False
            if m1 == m2 and n2 > n1 and e2 < e1 - 1e-12:
                mono_n = False
    converged = (
        len(means) < 2
        or abs(means[-1] - means[-2]) <= 3.0 * (ses[-1] + ses[-2]) + 1e-12
    )
    flags = [] if (mono_m and mono_n) else ["integration_bias_flag"]
    return TruncationLadderReport(levels, means, ses, mono_m, mono_n, converged, flags)


# ---------------------------------------------------------------------------
# deterministic Duhamel consistency check (euclidean(1), bounded V)
# ---------------------------------------------------------------------------


def duhamel_residual(
    V, psi, t, n_time_steps, dx=0.02, halfwidth=10.0, report_halfwidth=5.0
):
    """Sup-norm defect of e^{-tH_V} Phi = e^{-tH} Phi - int_0^t e^{-sH} V
    e^{-(t-s)H_V} Phi ds on a reference grid.

    e^{-tH_V} is realized by Strang splitting with step t/n_time_steps and the
    time integral by the composite trapezoid on the same grid, so the residual
    decays at the rule's second order as the grid refines."""
    space = V.space
    if space.kind != "euclidean" or space.dimension != 1:
        raise TimeDomainError("duhamel_residual lives on euclidean(1)")
    if V.sup_norm is None:
        raise TimeDomainError("duhamel_residual needs a bounded potential")
    xs = np.arange(-halfwidth, halfwidth + dx / 2.0, dx)
    n = xs.size
    vvec = np.asarray(V(xs[:, None]), dtype=float)
    phi = np.asarray(psi(xs[:, None]), dtype=float)
    h = t / n_time_steps

    def p_matrix(s):
        diff = xs[:, None] - xs[None, :]
        return (4.0 * math.pi * s) ** -0.5 * np.exp(-diff * diff / (4.0 * s)) * dx

    d_half = np.exp(-0.5 * h * vvec)
    p_h = p_matrix(h)
    states = [phi]
    cur = phi
    for _ in range(n_time_steps):
        cur = d_half * (p_h @ (d_half * cur))
        states.append(cur)
    lhs = states[-1]

    # composite trapezoid of e^{-sH} V e^{-(t-s)H_V} Phi over s = j*h
    acc = np.zeros(n)
    for j in range(n_time_steps + 1):
        weight = 0.5 if j in (0, n_time_steps) else 1.0
        integrand = vvec * states[n_time_steps - j]
        if j > 0:
            integrand = p_matrix(j * h) @ integrand
        acc += weight * integrand
    rhs = p_matrix(t) @ phi - h * acc

    mask = np.abs(xs) <= report_halfwidth
    return float(np.max(np.abs(lhs[mask] - rhs[mask])))
