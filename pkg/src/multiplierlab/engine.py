"""Lower-bound estimates for Schur and Fourier multiplier norms.

The optimizer is a generalized power method (Boyd's method) for the ratio
``||T x||_p / ||x||_p``::

    Y  = T x
    G  = norming functional of Y in S_q        (Tr(Y G) = ||Y||_p, ||G||_q = 1)
    Z  = T^t E(G)                              (transpose under Tr(AB))
    x' = E(norming functional of Z in S_p)

where E is the trace-preserving projection onto the domain (identity for
Schur multipliers, averaging over right translations for the group algebra).
Each step cannot decrease the ratio.  Restarts are batched through numpy's
stacked SVD; each restart draws from its own seeded generator, so results do
not depend on the batch layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .groups import ElementSet, FiniteGroup, folner_set
from .grouplp import MultiplierSymbol, symbol_check_matrix
from .schatten import PNorm, as_pnorm, matrix_to_json, norming_dual, schatten_norm_batch

MONOTONE_SLACK = 1e-12


class AscentError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineOptions:
    restarts: int = 32
    max_iters: int = 500
    tol: float = 1e-10
    seed: int = 0
    surrogate_p: float = 64.0
    continuation: int = 0
    polish_iters: int = 500
    window: int = 5

    @classmethod
    def from_dict(cls, d: dict | None) -> "EngineOptions":
        d = dict(d or {})
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class NormEstimate:
    """A certified lower bound: ``value`` is the ratio achieved by ``certificate``."""

    value: float
    certificate: np.ndarray | None
    kind: str
    p: PNorm
    level: int = 1
    restarts_used: int = 0
    iterations: int = 0
    converged: bool = True
    seed: int = 0
    domain: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self, with_certificate: bool = True) -> dict:
        out = {
            "kind": self.kind,
            "domain": self.domain,
            "p": str(self.p),
            "level": self.level,
            "value": self.value,
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "converged": self.converged,
            "seed": self.seed,
        }
        if self.extra:
            out["extra"] = self.extra
        if with_certificate:
            out["certificate"] = None if self.certificate is None else matrix_to_json(self.certificate)
        return out


# ---------------------------------------------------------------------------
# linear maps


class SchurMap:
    """``X -> S o X`` on square matrices (batched over leading axes)."""

    def __init__(self, symbol: np.ndarray):
        self.symbol = np.asarray(symbol, dtype=complex)
        self.shape = self.symbol.shape

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return x

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.symbol * x

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        return self.symbol.T * z

    def project(self, m: np.ndarray) -> np.ndarray:
        return m

    def transpose(self) -> "SchurMap":
        return SchurMap(self.symbol.T)

    def is_zero(self) -> bool:
        return not np.any(self.symbol)


class FourierMap:
    """``sum_g a_g (x) lambda_g -> sum_g phi(g) a_g (x) lambda_g`` on M_n (x) C[G].

    Domain elements are coefficient arrays of shape ``(|G|, n, n)``; their
    matrix form is the |G|n x |G|n block matrix with block (s, t) equal to
    ``a_{s t^-1}``.
    """

    def __init__(self, group: FiniteGroup, values: np.ndarray, n: int = 1):
        self.group = group
        self.values = np.asarray(values, dtype=complex)
        self.n = n
        self.shape = (group.order, n, n)
        self._quot = group.quotient_index()
        self._prod = group.cayley
        self._cols = np.broadcast_to(np.arange(group.order), (group.order, group.order))

    def matrix(self, a: np.ndarray) -> np.ndarray:
        o, n = self.group.order, self.n
        blocks = a[..., self._quot, :, :]  # (..., s, t, i, j)
        return np.swapaxes(blocks, -3, -2).reshape(a.shape[:-3] + (o * n, o * n))

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.values[:, None, None] * a

    def adjoint(self, a: np.ndarray) -> np.ndarray:
        return self.values[self.group.inverse][:, None, None] * a

    def project(self, m: np.ndarray) -> np.ndarray:
        o, n = self.group.order, self.n
        blocks = np.swapaxes(m.reshape(m.shape[:-2] + (o, n, o, n)), -3, -2)  # (..., s, t, i, j)
        gathered = blocks[..., self._prod, self._cols, :, :]  # (..., g, t, i, j) with s = g t
        return gathered.mean(axis=-3)

    def transpose(self) -> "FourierMap":
        return FourierMap(self.group, self.values[self.group.inverse], self.n)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _ratio(linmap, x: np.ndarray, p: float) -> np.ndarray:
    num = schatten_norm_batch(linmap.matrix(linmap.apply(x)), p)
    den = schatten_norm_batch(linmap.matrix(x), p)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _normalize(linmap, x: np.ndarray, p: float) -> np.ndarray:
    den = schatten_norm_batch(linmap.matrix(x), p)
    shape = den.shape + (1,) * (x.ndim - den.ndim)
    return x / np.where(den > 0, den, 1.0).reshape(shape)


def _step(linmap, x: np.ndarray, p: float) -> np.ndarray:
    q = 1.0 if math.isinf(p) else (math.inf if p == 1 else p / (p - 1))
    y = linmap.matrix(linmap.apply(x))
    g = linmap.project(norming_dual(y, p))
    z = linmap.matrix(linmap.adjoint(g))
    return _normalize(linmap, linmap.project(norming_dual(z, q)), p)


def ascent_step(linmap, x: np.ndarray, p) -> np.ndarray:
    """One power-method step; the ratio ``||T x||_p / ||x||_p`` never decreases."""
    pf = float(as_pnorm(p))
    x = np.asarray(x, dtype=complex)
    if not np.any(x):
        raise AscentError("ascent_step needs a nonzero input")
    before = float(_ratio(linmap, x, pf))
    new = _step(linmap, x, pf)
    after = float(_ratio(linmap, new, pf))
    assert after >= before - MONOTONE_SLACK * max(1.0, before), (before, after)
    return new


@dataclass
class _Run:
    x: np.ndarray
    ratio: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def _ascend(linmap, x0: np.ndarray, p: float, max_iters: int, tol: float, window: int) -> _Run:
    x = _normalize(linmap, np.array(x0, dtype=complex), p)
    R = x.shape[0]
    r = _ratio(linmap, x, p)
    hist = np.empty((max_iters + 1, R))
    hist[0] = r
    iters = np.zeros(R, dtype=int)
    conv = np.zeros(R, dtype=bool)
    active = np.ones(R, dtype=bool)
    for k in range(1, max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xn = _step(linmap, x[idx], p)
        rn = _ratio(linmap, xn, p)
        drop = rn < r[idx] - MONOTONE_SLACK * np.maximum(1.0, r[idx])
        if np.any(drop):
            raise AscentError(f"ascent decreased the ratio at p={p}: {r[idx][drop]} -> {rn[drop]}")
        # a step that lands on zero (map annihilates the iterate) keeps the old point
        keep = rn >= r[idx]
        upd = idx[keep]
        x[upd] = xn[keep]
        r[upd] = rn[keep]
        hist[k] = r
        iters[idx] = k
        if k >= window:
            done = np.abs(r[idx] - hist[k - window, idx]) <= tol * np.maximum(r[idx], 1e-300)
            conv[idx[done]] = True
            active[idx[done]] = False
        stalled = idx[~keep]
        conv[stalled] = True
        active[stalled] = False
    return _Run(x, r, iters, conv)


def _random_starts(shape: tuple, count: int, seed: int, key: Sequence[int]) -> np.ndarray:
    children = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).spawn(count)
    out = np.empty((count,) + tuple(shape), dtype=complex)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        out[i] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return out


def _refine(linmap, x, ratio, iters, conv, p: float, opts: EngineOptions):
    """Continue unconverged restarts that are within 1e-6 of the best for up to ``polish_iters`` steps."""
    top = ratio.max()
    idx = np.flatnonzero(~conv & (ratio >= top - 1e-6 * max(top, 1e-300)))
    if idx.size == 0 or opts.polish_iters <= 0:
        return x, ratio, iters, conv
    run = _ascend(linmap, x[idx], p, opts.polish_iters, opts.tol, opts.window)
    x, ratio, iters, conv = x.copy(), ratio.copy(), iters.copy(), conv.copy()
    better = run.ratio >= ratio[idx]
    x[idx[better]] = run.x[better]
    ratio[idx[better]] = run.ratio[better]
    iters[idx] += run.iterations
    conv[idx] = run.converged
    return x, ratio, iters, conv


def _maximize(linmap, p: PNorm, opts: EngineOptions, seeds: Sequence[np.ndarray], key: Sequence[int]):
    """Best ratio over seeds plus random restarts; returns (x, value, iterations, converged).

    ``converged`` refers to the exact-p stage that produced the reported
    certificate (surrogate and dual stages only generate starting points).
    """
    starts = _random_starts(linmap.shape, opts.restarts, opts.seed, key)
    seeds = [np.asarray(s, dtype=complex) for s in seeds]
    if seeds:
        starts = np.concatenate([np.stack(seeds), starts])
    if p.is_inf:
        x, r, it, cv = _maximize_inf(linmap, starts, opts)
    elif p.value == 1:
        dual = linmap.transpose()
        dual_starts = starts.copy()
        if seeds:
            primal = _normalize(linmap, starts[: len(seeds)], 1.0)
            dual_starts[: len(seeds)] = dual.project(norming_dual(linmap.matrix(linmap.apply(primal)), 1.0))
        dx, _, dit, _ = _maximize_inf(dual, dual_starts, opts)
        primal = linmap.project(norming_dual(dual.matrix(dual.apply(dx)), math.inf))
        run = _ascend(linmap, primal, 1.0, opts.polish_iters, opts.tol, opts.window)
        x, r, it, cv = _refine(linmap, run.x, run.ratio, dit + run.iterations, run.converged, 1.0, opts)
    else:
        run = _ascend(linmap, starts, float(p), opts.max_iters, opts.tol, opts.window)
        x, r, it, cv = _refine(linmap, run.x, run.ratio, run.iterations, run.converged, float(p), opts)
    best = int(np.argmax(r))
    return x[best], float(r[best]), int(it[best]), bool(cv[best])


def _maximize_inf(linmap, starts: np.ndarray, opts: EngineOptions):
    """Smooth surrogate ascent at ``surrogate_p`` followed by exact S_inf power steps.

    The raw starts (seeds included) are also polished directly at p = inf;
    for each restart the better of the two paths is kept.  The surrogate
    maximizer can sit in a different basin than the S_inf maximizer, so
    neither path dominates the other.  Returns per-restart arrays.
    """
    n = starts.shape[0]
    paths = [starts]
    iters0 = [np.zeros(n, dtype=int)]
    x = starts
    for k in range(opts.continuation + 1):
        sur = _ascend(linmap, x, opts.surrogate_p * 4.0**k, opts.max_iters, opts.tol, opts.window)
        paths.append(sur.x)
        iters0.append(sur.iterations)
        x = sur.x
    k = len(paths)
    pol = _ascend(linmap, np.concatenate(paths), math.inf, opts.polish_iters, opts.tol, opts.window)
    pick = np.argmax(pol.ratio.reshape(k, n), axis=0)
    flat = pick * n + np.arange(n)
    # work per restart sums over all paths
    iters = (np.concatenate(iters0) + pol.iterations).reshape(k, n).sum(axis=0)
    return _refine(linmap, pol.x[flat], pol.ratio[flat], iters, pol.converged[flat], math.inf, opts)


# ---------------------------------------------------------------------------
# public estimators


def _kron_symbol(symbol: np.ndarray, n: int) -> np.ndarray:
    return np.kron(np.ones((n, n)), symbol)


def embed_schur_certificate(x: np.ndarray, m: int, n_new: int) -> np.ndarray:
    """Place an (n m) x (n m) certificate in the top-left corner of an (n_new m)-sized one."""
    out = np.zeros((n_new * m, n_new * m), dtype=complex)
    k = x.shape[0]
    out[:k, :k] = x
    return out


def embed_fourier_certificate(a: np.ndarray, n_new: int) -> np.ndarray:
    out = np.zeros((a.shape[0], n_new, n_new), dtype=complex)
    n = a.shape[1]
    out[:, :n, :n] = a
    return out


def _schur_estimate(symbol: np.ndarray, p: PNorm, opts: EngineOptions, level: int, seeds, fast_path: bool, domain: str):
    m = symbol.shape[0]
    big = _kron_symbol(symbol, level)
    base = dict(kind="schur", p=p, level=level, seed=opts.seed, domain=domain)
    if not np.any(big):
        return NormEstimate(0.0, None, restarts_used=0, iterations=0, converged=True, **base)
    if fast_path and p == 2:
        i, j = np.unravel_index(int(np.argmax(np.abs(big))), big.shape)
        cert = np.zeros_like(big)
        cert[i, j] = 1.0
        return NormEstimate(float(np.abs(big[i, j])), cert, restarts_used=0, iterations=0, converged=True, **base)
    linmap = SchurMap(big)
    x, value, iters, conv = _maximize(linmap, p, opts, seeds, key=(0, level, m))
    return NormEstimate(value, x, restarts_used=opts.restarts + len(seeds), iterations=iters, converged=conv, **base)


def schur_norm_est(
    phi: MultiplierSymbol,
    F: ElementSet,
    p,
    opts: EngineOptions | None = None,
    level: int = 1,
    seeds: Sequence[np.ndarray] = (),
    fast_path: bool = True,
) -> NormEstimate:
    """Lower bound for the norm of ``A -> (phi(s t^-1) A[s, t])`` on S_p(l^2 F) (amplified by S_p^level)."""
    opts = opts or EngineOptions()
    p = as_pnorm(p)
    symbol = symbol_check_matrix(phi, F)
    return _schur_estimate(symbol, p, opts, level, seeds, fast_path, domain=f"{F.group.name}|F|={len(F)}")


def schur_matrix_norm_est(symbol, p, opts: EngineOptions | None = None, level: int = 1, seeds=(), fast_path: bool = True) -> NormEstimate:
    """Same as :func:`schur_norm_est` for an explicit symbol matrix."""
    opts = opts or EngineOptions()
    symbol = np.asarray(symbol, dtype=complex)
    return _schur_estimate(symbol, as_pnorm(p), opts, level, seeds, fast_path, domain=f"matrix{symbol.shape[0]}")


def fourier_norm_est(
    phi: MultiplierSymbol,
    G: FiniteGroup,
    p,
    opts: EngineOptions | None = None,
    level: int = 1,
    seeds: Sequence[np.ndarray] = (),
    fast_path: bool = True,
) -> NormEstimate:
    """Lower bound for the norm of the Fourier multiplier of ``phi`` on L^p(LG) (amplified by S_p^level).

    p = 1 runs the p = inf problem for the dual symbol ``s -> phi(s^-1)`` and
    converts the maximizer back to an L^1 certificate.
    """
    opts = opts or EngineOptions()
    p = as_pnorm(p)
    if not isinstance(G, FiniteGroup):
        raise TypeError("fourier_norm_est needs a finite group")
    values = np.asarray(phi.values)
    base = dict(kind="fourier", p=p, level=level, seed=opts.seed, domain=G.name)
    if not np.any(values):
        return NormEstimate(0.0, None, restarts_used=0, iterations=0, converged=True, **base)
    if fast_path and p == 2:
        g = int(np.argmax(np.abs(values)))
        cert = np.zeros((G.order, level, level), dtype=complex)
        cert[g, 0, 0] = 1.0
        return NormEstimate(float(abs(values[g])), cert, restarts_used=0, iterations=0, converged=True, **base)
    linmap = FourierMap(G, values, level)
    x, value, iters, conv = _maximize(linmap, p, opts, seeds, key=(1, level, G.order))
    return NormEstimate(value, x, restarts_used=opts.restarts + len(seeds), iterations=iters, converged=conv, **base)


def certificate_ratio(kind: str, phi_or_symbol, domain, est: NormEstimate) -> float:
    """Re-evaluate ``||T(cert)||_p / ||cert||_p`` from scratch."""
    if est.certificate is None:
        return 0.0
    p = float(est.p)
    if kind == "schur":
        symbol = phi_or_symbol if isinstance(phi_or_symbol, np.ndarray) else symbol_check_matrix(phi_or_symbol, domain)
        linmap = SchurMap(_kron_symbol(symbol, est.level))
    else:
        linmap = FourierMap(domain, np.asarray(phi_or_symbol.values), est.level)
    return float(_ratio(linmap, est.certificate[None], p)[0])


def cb_norm_est(
    kind: str,
    phi: MultiplierSymbol,
    domain,
    p,
    levels: Sequence[int] = (1, 2, 3),
    opts: EngineOptions | None = None,
) -> list[NormEstimate]:
    """Estimates at each amplification level; level n+1 is seeded with the
    level-n certificate (x) e_11, so the values never decrease."""
    opts = opts or EngineOptions()
    levels = sorted(set(int(n) for n in levels))
    if not levels or levels[0] < 1 or levels[-1] > 8:
        raise ValueError("levels must be a nonempty list of integers in 1..8")
    if kind not in ("schur", "fourier"):
        raise ValueError(f"unknown multiplier kind {kind!r}")
    if kind == "schur" and isinstance(domain, FiniteGroup):
        domain = folner_set(domain, 0)
    out: list[NormEstimate] = []
    prev: NormEstimate | None = None
    for n in levels:
        seeds = []
        if prev is not None and prev.certificate is not None:
            if kind == "schur":
                seeds = [embed_schur_certificate(prev.certificate, len(domain), n)]
            else:
                seeds = [embed_fourier_certificate(prev.certificate, n)]
        if kind == "schur":
            est = schur_norm_est(phi, domain, p, opts, level=n, seeds=seeds)
        else:
            est = fourier_norm_est(phi, domain, p, opts, level=n, seeds=seeds)
        if prev is not None and est.value < prev.value:
            # only possible through rounding; fall back to the embedded seed
            est = replace(est, value=prev.value, certificate=seeds[0])
        out.append(est)
        prev = est
    return out


def cb_value(estimates: Sequence[NormEstimate]) -> float:
    return max(e.value for e in estimates)


def plateau(estimates: Sequence[NormEstimate], rel: float = 1e-4) -> bool:
    """True when the last two levels agree to ``rel``."""
    if len(estimates) < 2:
        return True
    a, b = estimates[-2].value, estimates[-1].value
    return abs(b - a) <= rel * max(abs(b), 1e-300)


def nested_subset_scan(
    phi: MultiplierSymbol,
    chain: Sequence[ElementSet],
    p,
    opts: EngineOptions | None = None,
) -> list[NormEstimate]:
    """Schur estimates along ``F_1 < F_2 < ...``, each seeded with the previous certificate."""
    opts = opts or EngineOptions()
    for a, b in zip(chain, chain[1:]):
        if not (set(a.elements) < set(b.elements)):
            raise ValueError("chain must be strictly increasing")
    out: list[NormEstimate] = []
    prev_cert, prev_set = None, None
    for F in chain:
        seeds = []
        if prev_cert is not None:
            pos = [F.index[g] for g in prev_set.elements]
            seed = np.zeros((len(F), len(F)), dtype=complex)
            seed[np.ix_(pos, pos)] = prev_cert
            seeds = [seed]
        est = schur_norm_est(phi, F, p, opts, seeds=seeds)
        if out and est.value < out[-1].value:
            est = replace(est, value=out[-1].value, certificate=seeds[0])
        out.append(est)
        prev_cert, prev_set = est.certificate, F
    return out
