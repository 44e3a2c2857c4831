"""Executable checks of the multiplier theory at desk scale.

Every check returns a :class:`CheckReport`.  ``passed`` is a pure function of
the recorded quantities and the tolerance, and the report carries a digest of
its inputs so that reruns can be matched up.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .engine import (
    EngineOptions,
    NormEstimate,
    cb_norm_est,
    cb_value,
    fourier_norm_est,
    schur_norm_est,
)
from .grouplp import (
    GroupAlgebraElement,
    MultiplierSymbol,
    corner,
    fourier_multiply,
    lp_norm,
    lp_norm_finite,
    lp_norm_moment_oracle,
    lp_norm_Z_oracle,
    normalized_corner_norm,
    regular_matrix,
    symbol_check_matrix,
)
from .groups import ElementSet, FiniteGroup, FreeGroup, LatticeGroup, builtin_group, folner_set
from .schatten import PNorm, as_pnorm, schatten_norm, trace_pairing

IDENTITY_TOL = 1e-10
CORNER_TOL = 1e-9
EQUALITY_GAP = 0.01


class IntertwiningError(AssertionError):
    """Raised when ``corner(T_phi x) = phi_check o corner(x)`` fails."""


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (Fraction, PNorm)):
        return str(obj)
    return obj


def digest(inputs: Mapping) -> str:
    """sha256 of the canonical JSON form of ``inputs``."""
    text = json.dumps(_jsonable(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class CheckReport:
    name: str
    inputs: dict
    quantities: dict
    passed: bool
    tolerance: float
    seed: int | None = None
    status: str = ""
    report_only: bool = False

    @property
    def inputs_digest(self) -> str:
        return digest(self.inputs)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": _jsonable(self.inputs),
            "inputs_digest": self.inputs_digest,
            "quantities": _jsonable(self.quantities),
            "pass": bool(self.passed),
            "tolerance": self.tolerance,
            "seed": self.seed,
            "status": self.status,
            "report_only": self.report_only,
        }

    CSV_FIELDS = ("name", "inputs_digest", "pass", "status", "tolerance", "seed", "quantities")

    def csv_row(self) -> dict:
        q = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.quantities.items()) if _scalar(v))
        return {
            "name": self.name,
            "inputs_digest": self.inputs_digest,
            "pass": int(bool(self.passed)),
            "status": self.status,
            "tolerance": repr(self.tolerance),
            "seed": "" if self.seed is None else self.seed,
            "quantities": q,
        }


def _scalar(v) -> bool:
    return isinstance(v, (int, float, bool, np.integer, np.floating, np.bool_))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1.0)


# ---------------------------------------------------------------------------
# intertwining


def intertwining_residual(phi: MultiplierSymbol, x: GroupAlgebraElement, F: ElementSet) -> float:
    """``max |corner(T_phi x) - phi_check o corner(x)|`` over the entries."""
    left = corner(fourier_multiply(phi, x), F)
    right = symbol_check_matrix(phi, F) * corner(x, F)
    return float(np.max(np.abs(left - right))) if left.size else 0.0


def assert_intertwining(phi: MultiplierSymbol, x: GroupAlgebraElement, F: ElementSet) -> float:
    r = intertwining_residual(phi, x, F)
    scale = max(1.0, max((abs(c) for c in x.coeffs.values()), default=0.0))
    if r > 1e-12 * scale:
        raise IntertwiningError(f"corner intertwining fails by {r:.3e}")
    return r


# ---------------------------------------------------------------------------
# transference


def _amplified(G: FiniteGroup, points: Sequence[int], coeff: np.ndarray, phi: MultiplierSymbol | None) -> np.ndarray:
    """Block matrix with block (i, j) = c_ij T(lambda(s_i s_j^-1)), T = id or the Fourier multiplier."""
    k = len(points)
    n = G.order
    out = np.zeros((k * n, k * n), dtype=complex)
    for i, si in enumerate(points):
        for j, sj in enumerate(points):
            g = G.mul(si, G.inv(sj))
            x = GroupAlgebraElement.delta(G, g, coeff[i, j])
            if phi is not None:
                x = fourier_multiply(phi, x)
            if x.coeffs:
                out[i * n : (i + 1) * n, j * n : (j + 1) * n] = regular_matrix(x)
    return out


def check_transference_identity(
    phi: MultiplierSymbol,
    G: FiniteGroup,
    points: Sequence,
    a,
    b,
    p,
    cb_bound: float | None = None,
    tol: float = IDENTITY_TOL,
    gap: float = EQUALITY_GAP,
    seed: int | None = None,
) -> CheckReport:
    """Transference identity with x = y = lambda_e.

    ``A = (a_ij lambda(s_i) lambda(s_j)^-1)`` and ``B = (b_ij lambda(s_i) lambda(s_j)^-1)``;
    the check compares ``sum phi(s_i s_j^-1) a_ij b_ji`` with
    ``(Tr (x) tau)((id (x) T_phi)(A) B)``, and ``||A||_p`` with ``||a||_p``.
    With ``cb_bound`` it also records the Holder consequence
    ``|lhs| <= cb_bound ||a||_p ||b||_q``, passing within ``gap`` (estimates are lower bounds).
    """
    if not isinstance(G, FiniteGroup):
        raise TypeError("check_transference_identity needs a finite group")
    pn = as_pnorm(p)
    qn = pn.conjugate
    pts = [G.parse(s) if isinstance(s, str) else int(s) for s in points]
    k = len(pts)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (k, k) or b.shape != (k, k):
        raise ValueError(f"a and b must be {k}x{k}, got {a.shape} and {b.shape}")
    lhs = complex(sum(phi(G.mul(pts[i], G.inv(pts[j]))) * a[i, j] * b[j, i] for i in range(k) for j in range(k)))
    A = _amplified(G, pts, a, None)
    TA = _amplified(G, pts, a, phi)
    B = _amplified(G, pts, b, None)
    rhs = trace_pairing(TA, B) / G.order
    # (id (x) T_phi) agrees with the Schur multiplier of phi_check on each block
    sym = symbol_check_matrix(phi, folner_set(G, 0))
    n = G.order
    schur_side = A * np.kron(np.ones((k, k)), sym)
    inter = float(np.max(np.abs(schur_side - TA)))
    if inter > 1e-12 * max(1.0, float(np.max(np.abs(a)))) * max(1.0, float(np.max(np.abs(sym)))):
        raise IntertwiningError(f"blockwise intertwining fails by {inter:.3e}")
    scale = 1.0 if pn.is_inf else n ** float(pn.inverse)
    norm_A = schatten_norm(A, pn) / scale
    norm_a = schatten_norm(a, pn)
    identity_err = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)
    norm_err = _rel(norm_A, norm_a)
    ok = identity_err <= tol and norm_err <= tol
    quantities = {
        "lhs_re": lhs.real,
        "lhs_im": lhs.imag,
        "rhs_re": rhs.real,
        "rhs_im": rhs.imag,
        "identity_rel_error": identity_err,
        "norm_A": norm_A,
        "norm_a": norm_a,
        "norm_rel_error": norm_err,
        "intertwining_residual": inter,
    }
    if cb_bound is not None:
        holder_rhs = cb_bound * norm_a * schatten_norm(b, qn)
        quantities["holder_rhs"] = holder_rhs
        quantities["holder_ratio"] = abs(lhs) / holder_rhs if holder_rhs > 0 else (0.0 if abs(lhs) == 0 else math.inf)
        ok = ok and abs(lhs) <= holder_rhs * (1 + gap) + tol
    inputs = {"group": G.name, "points": pts, "a": a, "b": b, "p": str(pn), "symbol": np.asarray(phi.values)}
    return CheckReport("thm42", inputs, quantities, ok, tol, seed)


def random_transference_instance(G: FiniteGroup, k: int, rng: np.random.Generator):
    """Random distinct points s_1..s_k and complex k x k matrices a, b."""
    k = min(k, G.order)
    pts = [int(v) for v in rng.choice(G.order, size=k, replace=False)]
    a = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    b = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    phi = MultiplierSymbol.from_array(G, rng.standard_normal(G.order) + 1j * rng.standard_normal(G.order))
    return phi, pts, a, b


# ---------------------------------------------------------------------------
# corners


def _oracle_norm(x: GroupAlgebraElement, pn: PNorm, oracle) -> tuple[float, str]:
    if oracle is None or oracle == "auto":
        G = x.group
        if isinstance(G, FiniteGroup):
            return lp_norm_finite(x, pn), "trace"
        if isinstance(G, LatticeGroup):
            return lp_norm_Z_oracle(x, pn), "quadrature"
        return lp_norm_moment_oracle(x, pn), "moment"
    if oracle == "trace":
        return lp_norm_finite(x, pn), "trace"
    if oracle == "quadrature":
        return lp_norm_Z_oracle(x, pn), "quadrature"
    if oracle == "moment":
        return lp_norm_moment_oracle(x, pn), "moment"
    if callable(oracle):
        return float(oracle(x, pn)), "custom"
    return float(oracle), "given"


def check_corner_bound(x: GroupAlgebraElement, F: ElementSet, p, oracle="auto", tol: float = CORNER_TOL) -> CheckReport:
    """``||P_F x P_F||_p <= |F|^(1/p) ||x||_p`` with ``||x||_p`` from an oracle.

    The slack is ``tol`` in absolute terms, scaled up by the right side when it
    exceeds 1 (the oracles are accurate to ``tol`` relative).
    """
    pn = as_pnorm(p)
    nx, source = _oracle_norm(x, pn, oracle)
    lhs = schatten_norm(corner(x, F), pn) if len(F) else 0.0
    rhs = len(F) ** float(pn.inverse) * nx
    slack = tol * max(1.0, rhs)
    q = {"corner_norm": lhs, "bound": rhs, "oracle_norm": nx, "size": len(F), "margin": rhs - lhs}
    if isinstance(x.group, FiniteGroup) and len(F) == x.group.order:
        q["equality_gap"] = abs(rhs - lhs)
    inputs = {"group": x.group.name, "x": _element_repr(x), "F": [x.group.format(g) for g in F.elements], "p": str(pn)}
    return CheckReport("corner", inputs, q, lhs <= rhs + slack, tol, status=source)


def _element_repr(x: GroupAlgebraElement) -> list:
    G = x.group
    return sorted([G.format(g), c.real, c.imag] for g, c in x.coeffs.items())


def folner_isometry_curve(x: GroupAlgebraElement, p, radii: Sequence[int], oracle="auto") -> list[dict]:
    """``(radius, |F|, normalized corner norm, ratio to ||x||_p)`` along the canonical sets."""
    pn = as_pnorm(p)
    nx, _ = _oracle_norm(x, pn, oracle)
    out = []
    for r in radii:
        F = folner_set(x.group, int(r))
        v = normalized_corner_norm(x, F, pn)
        out.append({"radius": int(r), "size": len(F), "normalized": v, "ratio": v / nx if nx > 0 else 1.0})
    return out


def check_folner_curve(
    x: GroupAlgebraElement, p, radii: Sequence[int], threshold: float | None = None, oracle="auto", tol: float = CORNER_TOL
) -> CheckReport:
    """Ratios stay <= 1, ``1 - ratio`` shrinks whenever the radius doubles, the last ratio beats ``threshold``."""
    pn = as_pnorm(p)
    curve = folner_isometry_curve(x, pn, radii, oracle)
    ratios = [c["ratio"] for c in curve]
    bounded = all(r <= 1 + tol for r in ratios)
    shrink = True
    factors = []
    for c0, c1 in zip(curve, curve[1:]):
        if c1["radius"] == 2 * c0["radius"]:
            d0, d1 = 1 - c0["ratio"], 1 - c1["ratio"]
            shrink = shrink and d1 < d0
            factors.append(d0 / d1 if d1 > 0 else math.inf)
    final_ok = threshold is None or (bool(ratios) and ratios[-1] >= threshold)
    q: dict = {f"ratio_r{c['radius']}": c["ratio"] for c in curve}
    q.update({"bounded": bounded, "shrinks": shrink, "final_ratio": ratios[-1] if ratios else math.nan})
    for c, f in zip(curve[1:], factors):
        q[f"halving_factor_r{c['radius']}"] = f
    if threshold is not None:
        q["threshold"] = threshold
    inputs = {"group": x.group.name, "x": _element_repr(x), "p": str(pn), "radii": [int(r) for r in radii]}
    return CheckReport("folner-curve", inputs, q, bounded and shrink and final_ok, tol)


# ---------------------------------------------------------------------------
# amenable equality


def _fourier_certificate_element(G: FiniteGroup, est: NormEstimate) -> GroupAlgebraElement | None:
    if est.certificate is None or est.level != 1:
        return None
    return GroupAlgebraElement.from_array(G, np.asarray(est.certificate).reshape(G.order))


def check_amenable_equality(
    phi: MultiplierSymbol,
    G: FiniteGroup,
    p,
    opts: EngineOptions | None = None,
    gap: float = EQUALITY_GAP,
    mode: str = "plain",
    levels: Sequence[int] = (1, 2, 3),
) -> CheckReport:
    """Agreement of the Schur estimate on F = G with the Fourier estimate.

    ``mode="plain"`` compares the plain norms; ``mode="cb"`` compares the
    Schur estimate with the best Fourier estimate over amplification
    ``levels``.  A failure is labelled ``under-converged`` when an optimizer
    did not converge and ``discrepancy`` when both did.  The Fourier
    certificate is also transported to the Schur side through the corner map
    (exact for F = G) and its Schur ratio recorded.
    """
    if mode not in ("plain", "cb"):
        raise ValueError(f"unknown comparison mode {mode!r}")
    opts = opts or EngineOptions()
    pn = as_pnorm(p)
    F = folner_set(G, 0)
    s = schur_norm_est(phi, F, pn, opts)
    if mode == "plain":
        fl = [fourier_norm_est(phi, G, pn, opts)]
    else:
        fl = cb_norm_est("fourier", phi, G, pn, levels, opts)
    f1 = fl[0]
    fv = cb_value(fl)
    f_conv = all(e.converged for e in fl)
    q: dict = {"schur": s.value, "fourier": fv, "fourier_plain": f1.value}
    q["gap"] = abs(s.value - fv) / max(s.value, fv) if max(s.value, fv) > 0 else 0.0
    q["schur_converged"] = s.converged
    q["fourier_converged"] = f_conv
    x = _fourier_certificate_element(G, f1)
    if x is not None and x.coeffs:
        q["intertwining_residual"] = assert_intertwining(phi, x, F)
        cx = corner(x, F)
        q["fourier_cert_schur_ratio"] = schatten_norm(symbol_check_matrix(phi, F) * cx, pn) / schatten_norm(cx, pn)
    agree = q["gap"] <= gap
    if agree and s.converged and f_conv:
        status = "agree"
    elif not (s.converged and f_conv):
        status = "under-converged"
    else:
        status = "discrepancy"
    inputs = {"group": G.name, "symbol": np.asarray(phi.values), "p": str(pn), "opts": asdict(opts), "mode": mode}
    if mode == "cb":
        inputs["levels"] = list(levels)
    return CheckReport("equality", inputs, q, status == "agree", gap, opts.seed, status)


# ---------------------------------------------------------------------------
# uniform convexity chain


def lemma_bound(delta: float) -> float:
    """Explicit bound on ``||lambda_s eta_3^2 - eta_1^2||_2`` under ``Re Tr >= 1 - delta``.

    From the Holder chain, ``<eta_1^2, eta_2^2> >= (1 - delta)^2`` so
    ``||eta_1^2 - eta_2^2||_2 <= sqrt(2 delta (2 - delta))``; the elementary
    inequality turns this into ``||eta_1 - eta_2||_4 <= e`` with
    ``e = (2 delta (2 - delta))^(1/4)`` (same for eta_3, eta_4).  Swapping
    eta_2 -> eta_1 and eta_4 -> eta_3 costs at most e each (four-fold Holder),
    so ``<lambda_{s^-1} eta_1^2, eta_3^2> >= 1 - delta - 2e`` and the squared
    conclusion is at most ``2 delta + 4e``.  It never exceeds sqrt(2).
    """
    d = min(max(float(delta), 0.0), 2.0)
    e = (2 * d * (2 - d)) ** 0.25
    return min(math.sqrt(2.0), math.sqrt(2 * d + 4 * e))


@dataclass
class ConvexityTestVector:
    """Four unit vectors of l^4(group; S_4^d) with finite supports, plus a shift s.

    ``xi[i]`` maps group elements to d x d complex matrices.
    """

    group: Any
    xi: tuple
    s: Any
    d: int = field(init=False)

    def __post_init__(self):
        if len(self.xi) != 4:
            raise ValueError("a test vector needs four components")
        xi = []
        d = None
        for comp in self.xi:
            c = {g: np.asarray(m, dtype=complex) for g, m in dict(comp).items()}
            for m in c.values():
                if m.ndim != 2 or m.shape[0] != m.shape[1] or (d is not None and m.shape[0] != d):
                    raise ValueError("components must be square matrices of one common size")
                d = m.shape[0]
            xi.append(c)
        self.xi = tuple(xi)
        self.d = d or 1
        for i, c in enumerate(self.xi):
            n = self.norm(c)
            if abs(n - 1) > 1e-12:
                raise ValueError(f"component {i + 1} has l4(S4) norm {n!r}, expected 1")
        for i in range(4):
            e = np.array(list(self.eta(i).values()))
            if abs(np.sum(e**4) - 1) > 1e-12:
                raise AssertionError("profile vector is not a unit vector of l4")

    @staticmethod
    def norm(comp: Mapping) -> float:
        return sum(schatten_norm(m, 4) ** 4 for m in comp.values()) ** 0.25

    def eta(self, i: int) -> dict:
        return {g: schatten_norm(m, 4) for g, m in self.xi[i].items()}

    @classmethod
    def normalized(cls, group, xi: Sequence[Mapping], s) -> "ConvexityTestVector":
        out = []
        for comp in xi:
            comp = {g: np.asarray(m, dtype=complex) for g, m in dict(comp).items()}
            n = cls.norm(comp)
            out.append({g: m / n for g, m in comp.items()})
        return cls(group, tuple(out), s)

    @classmethod
    def random(cls, group, support: Sequence, d: int, rng: np.random.Generator, s=None) -> "ConvexityTestVector":
        """Gaussian components on random nonempty subsets of ``support``."""
        support = list(support)
        if s is None:
            s = support[int(rng.integers(len(support)))]
        xi = []
        for _ in range(4):
            mask = rng.random(len(support)) < 0.7
            mask[int(rng.integers(len(support)))] = True
            comp = {
                g: rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
                for g, keep in zip(support, mask)
                if keep
            }
            xi.append(comp)
        return cls.normalized(group, xi, s)

    @classmethod
    def covariant(cls, group, xi1: Mapping, s) -> "ConvexityTestVector":
        """``xi_2 = xi_1^*``, ``xi_3 = s^-1 . xi_1``, ``xi_4 = s^-1 . xi_2`` with ``(s^-1 . xi)(t) = xi(s t)``."""
        c1 = {g: np.asarray(m, dtype=complex) for g, m in dict(xi1).items()}
        n = cls.norm(c1)
        c1 = {g: m / n for g, m in c1.items()}
        c2 = {g: m.conj().T for g, m in c1.items()}
        si = group.inv(s)
        c3 = {group.mul(si, g): m for g, m in c1.items()}
        c4 = {group.mul(si, g): m for g, m in c2.items()}
        return cls(group, (c1, c2, c3, c4), s)


def _shifted_pairing(group, s, f: Mapping, h: Mapping) -> float:
    """``<lambda_{s^-1} f, h> = sum_t f(s t) h(t)``."""
    return float(sum(f.get(group.mul(s, t), 0.0) * v for t, v in h.items()))


def _lp(values, p: float) -> float:
    v = np.abs(np.asarray(list(values), dtype=float))
    return float(np.sum(v**p) ** (1.0 / p)) if v.size else 0.0


def _diff(f: Mapping, h: Mapping) -> list:
    keys = set(f) | set(h)
    return [f.get(k, 0.0) - h.get(k, 0.0) for k in keys]


def lemma_quantities(v: ConvexityTestVector) -> dict:
    G = v.group
    s = v.s
    x1, x2, x3, x4 = v.xi
    # Re Tr(s^-1 . (xi1 xi2) xi3 xi4) = Re sum_t Tr(xi1(st) xi2(st) xi3(t) xi4(t))
    re_tr = 0.0
    for t in set(x3) & set(x4):
        st = G.mul(s, t)
        if st in x1 and st in x2:
            re_tr += float(np.trace(x1[st] @ x2[st] @ x3[t] @ x4[t]).real)
    e1, e2, e3, e4 = (v.eta(i) for i in range(4))
    e12 = {g: e1[g] * e2[g] for g in set(e1) & set(e2)}
    e34 = {g: e3[g] * e4[g] for g in set(e3) & set(e4)}
    holder = _shifted_pairing(G, s, e12, e34)
    sq1 = {g: x * x for g, x in e1.items()}
    sq3 = {g: x * x for g, x in e3.items()}
    # lambda_s f(t) = f(s^-1 t): shift the support of eta_3^2 by s
    shifted3 = {G.mul(s, g): x for g, x in sq3.items()}
    conclusion = _lp(_diff(shifted3, sq1), 2)
    out = {"re_tr": re_tr, "holder_middle": holder, "conclusion": conclusion}
    for name, a, b in (("12", e1, e2), ("34", e3, e4)):
        sq_a = {g: x * x for g, x in a.items()}
        sq_b = {g: x * x for g, x in b.items()}
        out[f"l4_diff_{name}"] = _lp(_diff(a, b), 4)
        out[f"sqrt_l2_sqdiff_{name}"] = math.sqrt(_lp(_diff(sq_a, sq_b), 2))
    return out


def check_lemma_2_3_chain(v: ConvexityTestVector, delta: float, slack: float = 1e-12) -> CheckReport:
    """Proof-step inequalities of the uniform convexity lemma on concrete data.

    (a) ``Re Tr <= <lambda_{s^-1}(eta_1 eta_2), eta_3 eta_4> <= 1``;
    (b) ``||a - b||_4 <= sqrt(||a^2 - b^2||_2)`` for (eta_1, eta_2) and (eta_3, eta_4);
    (c) if ``Re Tr >= 1 - delta`` then the conclusion is at most :func:`lemma_bound`.
    """
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    q = lemma_quantities(v)
    step_a = q["re_tr"] <= q["holder_middle"] + slack and q["holder_middle"] <= 1 + slack
    step_b = all(q[f"l4_diff_{n}"] <= q[f"sqrt_l2_sqdiff_{n}"] + slack for n in ("12", "34"))
    hyp = q["re_tr"] >= 1 - delta
    bound = lemma_bound(delta)
    step_c = (not hyp) or q["conclusion"] <= bound + slack
    q.update({"delta": delta, "bound": bound, "hypothesis": hyp, "step_a": step_a, "step_b": step_b, "step_c": step_c})
    inputs = {
        "group": v.group.name,
        "s": v.group.format(v.s),
        "xi": [sorted([v.group.format(g), m] for g, m in c.items()) for c in v.xi],
        "delta": delta,
    }
    return CheckReport("lemma23", inputs, q, step_a and step_b and step_c, slack)


def near_covariant(group, support: Sequence, d: int, s, noise: float, rng: np.random.Generator) -> ConvexityTestVector:
    """The covariant vector of a Gaussian xi_1, each component perturbed by ``noise`` then renormalized."""
    xi1 = {g: rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for g in support}
    base = ConvexityTestVector.covariant(group, xi1, s)
    comps = []
    for c in base.xi:
        comps.append({g: m + noise * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) for g, m in c.items()})
    return ConvexityTestVector.normalized(group, comps, s)


def lemma_sweep(
    group,
    samples: int,
    rng: np.random.Generator,
    max_support: int = 8,
    max_dim: int = 3,
    delta: float = 0.5,
    seed: int | None = None,
) -> CheckReport:
    """Steps (a) to (c) over ``samples`` random test vectors; counts violations.

    Supports are drawn from the canonical set of radius ``max_support`` (the
    whole group when it is finite), with at most ``max_support`` points, and
    matrix sizes from 1 to ``max_dim``.
    """
    pool = list(folner_set(group, 2 if isinstance(group, FreeGroup) else max_support).elements)
    counts = {"step_a": 0, "step_b": 0, "step_c": 0}
    hyp = 0
    worst_c = 0.0
    for i in range(samples):
        size = int(rng.integers(1, min(max_support, len(pool)) + 1))
        support = [pool[j] for j in rng.choice(len(pool), size=size, replace=False)]
        d = int(rng.integers(1, max_dim + 1))
        s = pool[int(rng.integers(len(pool)))]
        if i % 2:
            # noisy covariant vectors land near the hypothesis region
            v = near_covariant(group, support, d, s, float(rng.uniform(0, 0.5)), rng)
        else:
            v = ConvexityTestVector.random(group, support, d, rng, s=s)
        r = check_lemma_2_3_chain(v, delta)
        for k in counts:
            counts[k] += not r.quantities[k]
        if r.quantities["hypothesis"]:
            hyp += 1
            worst_c = max(worst_c, r.quantities["conclusion"] / r.quantities["bound"])
    q = {f"violations_{k}": n for k, n in counts.items()}
    q.update({"samples": samples, "hypothesis_hits": hyp, "worst_conclusion_over_bound": worst_c, "delta": delta})
    inputs = {"group": group.name, "samples": samples, "max_support": max_support, "max_dim": max_dim, "delta": delta}
    return CheckReport("lemma23", inputs, q, sum(counts.values()) == 0, 1e-12, seed)


# ---------------------------------------------------------------------------
# almost invariance


def almost_invariance_defect(G, F: ElementSet, gamma, s) -> float:
    """``||lambda_s eta_gamma^2 - eta_gamma^2||_2`` for the canonical Folner profile.

    ``eta_gamma^2 = |R|^(-1/2) 1_R`` where R = F & gamma F is the row support of
    the corner of lambda(gamma) on F.
    """
    rows = [g for g in F.elements if G.mul(G.inv(gamma), g) in F.index]
    if not rows:
        raise ValueError("the corner of lambda(gamma) on F is zero")
    w = 1.0 / math.sqrt(len(rows))
    sq = {g: w for g in rows}
    shifted = {G.mul(s, g): w for g in rows}
    return _lp(_diff(shifted, sq), 2)


def check_defect_decay(G, radii: Sequence[int], gamma, s, tol: float = 1e-12) -> CheckReport:
    """Defects along the canonical sets; passes when doubling the radius lowers the defect."""
    vals = {int(r): almost_invariance_defect(G, folner_set(G, int(r)), gamma, s) for r in radii}
    ok = True
    for r in vals:
        if 2 * r in vals:
            ok = ok and vals[2 * r] < vals[r]
    q = {f"defect_r{r}": v for r, v in vals.items()}
    inputs = {"group": G.name, "radii": list(vals), "gamma": G.format(gamma), "s": G.format(s)}
    return CheckReport("defect", inputs, q, ok, tol)


# ---------------------------------------------------------------------------
# log-convexity


def midpoint_triples(inv_ps: Sequence[Fraction]) -> list[tuple[int, int, int]]:
    """Index triples (i, j, k) with ``1/p_j`` the midpoint of ``1/p_i`` and ``1/p_k``."""
    out = []
    n = len(inv_ps)
    for i in range(n):
        for k in range(n):
            if inv_ps[i] <= inv_ps[k]:
                continue
            mid = (inv_ps[i] + inv_ps[k]) / 2
            for j in range(n):
                if inv_ps[j] == mid:
                    out.append((i, j, k))
    return out


def check_log_convexity(
    phi: MultiplierSymbol,
    domain,
    p_grid: Sequence,
    opts: EngineOptions | None = None,
    kind: str = "schur",
    slack_factor: float = 3.0,
) -> CheckReport:
    """``log v(p)`` is convex in ``1/p`` at every midpoint triple of the grid."""
    opts = opts or EngineOptions()
    ps = [as_pnorm(p) for p in p_grid]
    inv = [p.inverse for p in ps]
    triples = midpoint_triples(inv)
    if len(ps) < 3 or not triples:
        raise ValueError("the p grid needs at least three points with a midpoint structure in 1/p")
    if kind == "schur":
        F = domain if isinstance(domain, ElementSet) else folner_set(domain, 0)
        ests = [schur_norm_est(phi, F, p, opts) for p in ps]
    elif kind == "fourier":
        ests = [fourier_norm_est(phi, domain, p, opts) for p in ps]
    else:
        raise ValueError(f"unknown multiplier kind {kind!r}")
    vals = [e.value for e in ests]
    slack = slack_factor * opts.tol
    worst = -math.inf
    ok = True
    for i, j, k in triples:
        if min(vals[i], vals[j], vals[k]) <= 0:
            # a zero symbol has value 0 at every p
            continue
        excess = math.log(vals[j]) - (math.log(vals[i]) + math.log(vals[k])) / 2
        worst = max(worst, excess)
        ok = ok and excess <= slack
    q = {f"value_p{p}": v for p, v in zip(ps, vals)}
    q.update({"worst_excess": worst if triples else 0.0, "triples": len(triples), "slack": slack})
    q["all_converged"] = all(e.converged for e in ests)
    inputs = {"domain": getattr(domain, "name", None) or domain.group.name, "symbol": _symbol_repr(phi, domain), "p_grid": [str(p) for p in ps], "kind": kind, "opts": asdict(opts)}
    return CheckReport("convexity", inputs, q, ok, slack, opts.seed)


def _symbol_repr(phi: MultiplierSymbol, domain) -> Any:
    values = getattr(phi, "values", None)
    if values is not None:
        return np.asarray(values)
    return phi.name


# ---------------------------------------------------------------------------
# free-group contrast


def free_group_contrast(x: GroupAlgebraElement, p, radii: Sequence[int], lattice_x: GroupAlgebraElement | None = None) -> CheckReport:
    """Corner ratios over free-group balls next to a Z^2 box curve at matched sizes.

    Report-only: no pass/fail gate.  The lattice curve uses the sum over
    ``±e_1, ±e_2`` unless ``lattice_x`` is given, and box sides are chosen so
    that the box size is as close as possible to the ball size.
    """
    pn = as_pnorm(p)
    if not isinstance(x.group, FreeGroup):
        raise TypeError("free_group_contrast needs an element of a free group")
    nx = lp_norm_moment_oracle(x, pn)
    Z2 = builtin_group("zd:2")
    lx = lattice_x if lattice_x is not None else GroupAlgebraElement(Z2, {g: 1.0 for g in Z2.generators()})
    nl = lp_norm(lx, pn)
    q: dict = {"oracle_norm": nx, "lattice_oracle_norm": nl}
    for r in radii:
        F = folner_set(x.group, int(r))
        q[f"ratio_r{r}"] = normalized_corner_norm(x, F, pn) / nx if nx > 0 else 1.0
        q[f"size_r{r}"] = len(F)
        side = max(1, round(math.sqrt(len(F))))
        B = folner_set(Z2, side)
        q[f"lattice_ratio_r{r}"] = normalized_corner_norm(lx, B, pn) / nl if nl > 0 else 1.0
        q[f"lattice_size_r{r}"] = len(B)
    inputs = {"x": _element_repr(x), "p": str(pn), "radii": [int(r) for r in radii]}
    return CheckReport("free-contrast", inputs, q, True, 0.0, status="report-only", report_only=True)


def free_defect_contrast(radii: Sequence[int] = (1, 2, 3, 4)) -> CheckReport:
    """Free-group ball defects against the Z interval defect sqrt(2/N) at N = |ball|.

    The comparison is recorded as a regression gate: each free defect must
    exceed the matched Z defect.
    """
    Fk = builtin_group("free:2")
    Z = builtin_group("zd:1")
    a = Fk.generators()[0]
    q: dict = {}
    ok = True
    for r in radii:
        ball = folner_set(Fk, int(r))
        fd = almost_invariance_defect(Fk, ball, Fk.identity, a)
        N = len(ball)
        zd = almost_invariance_defect(Z, folner_set(Z, N), Z.identity, (1,))
        q[f"free_defect_r{r}"] = fd
        q[f"z_defect_n{N}"] = zd
        ok = ok and fd > zd
    inputs = {"radii": [int(r) for r in radii]}
    return CheckReport("defect-contrast", inputs, q, ok, 0.0)


__all__ = [
    "CheckReport",
    "ConvexityTestVector",
    "IntertwiningError",
    "almost_invariance_defect",
    "assert_intertwining",
    "check_amenable_equality",
    "check_corner_bound",
    "check_defect_decay",
    "check_folner_curve",
    "check_lemma_2_3_chain",
    "check_log_convexity",
    "check_transference_identity",
    "digest",
    "folner_isometry_curve",
    "free_defect_contrast",
    "free_group_contrast",
    "intertwining_residual",
    "lemma_bound",
    "lemma_quantities",
    "lemma_sweep",
    "near_covariant",
    "midpoint_triples",
    "random_transference_instance",
]
