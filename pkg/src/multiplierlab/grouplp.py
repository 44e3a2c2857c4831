"""Group algebra elements, their L^p(LG) norms, corners and Fourier multipliers.

Corners follow the left-regular kernel convention: ``corner(x, F)[s, t] =
x(s t^-1)``.  With this orientation the Fourier multiplier of a symbol phi is
intertwined with the Schur multiplier of ``phi(s t^-1)`` exactly.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from .groups import ElementSet, FiniteGroup, LatticeGroup, folner_set, lambda_matrix, word_ball
from .schatten import as_pnorm, schatten_norm


class SymbolLookupError(KeyError):
    """A symbol or coefficient was queried where it is not defined."""


class OracleError(RuntimeError):
    """An L^p oracle cannot handle the request (wrong group, exponent or budget)."""


class GroupAlgebraElement:
    """A finitely supported ``x = sum_g x_g lambda_g``.

    Zero coefficients are dropped; the support keeps insertion order.
    """

    __slots__ = ("group", "coeffs")

    def __init__(self, group, coeffs: Mapping | Iterable = ()):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        table: dict = {}
        for g, c in items:
            if not group.contains(g):
                raise ValueError(f"{g!r} is not an element of {group.name}")
            table[g] = table.get(g, 0) + complex(c)
        self.group = group
        self.coeffs = {g: c for g, c in table.items() if c != 0}

    @classmethod
    def delta(cls, group, g, c: complex = 1.0) -> "GroupAlgebraElement":
        return cls(group, {g: c})

    @classmethod
    def from_array(cls, group: FiniteGroup, values) -> "GroupAlgebraElement":
        values = np.asarray(values, dtype=complex)
        if values.shape != (group.order,):
            raise ValueError(f"expected {group.order} coefficients, got shape {values.shape}")
        return cls(group, {g: values[g] for g in range(group.order)})

    def to_array(self) -> np.ndarray:
        if not isinstance(self.group, FiniteGroup):
            raise TypeError("to_array needs a finite group")
        out = np.zeros(self.group.order, dtype=complex)
        for g, c in self.coeffs.items():
            out[g] = c
        return out

    def __call__(self, g) -> complex:
        return self.coeffs.get(g, 0j)

    @property
    def support(self) -> list:
        return list(self.coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        terms = " + ".join(f"({c:g})*λ[{self.group.format(g)}]" for g, c in self.coeffs.items())
        return f"GroupAlgebraElement({terms or '0'})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, GroupAlgebraElement)
            and other.group == self.group
            and other.coeffs == self.coeffs
        )

    def __add__(self, other: "GroupAlgebraElement") -> "GroupAlgebraElement":
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out.get(g, 0) + c
        return GroupAlgebraElement(self.group, out)

    def __rmul__(self, scalar: complex) -> "GroupAlgebraElement":
        return GroupAlgebraElement(self.group, {g: scalar * c for g, c in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, GroupAlgebraElement):
            return self.__rmul__(other)
        out: dict = {}
        mul = self.group.mul
        for g, a in self.coeffs.items():
            for h, b in other.coeffs.items():
                k = mul(g, h)
                out[k] = out.get(k, 0) + a * b
        return GroupAlgebraElement(self.group, out)

    def adjoint(self) -> "GroupAlgebraElement":
        inv = self.group.inv
        return GroupAlgebraElement(self.group, {inv(g): np.conj(c) for g, c in self.coeffs.items()})

    def trace(self) -> complex:
        """Canonical trace: the coefficient of the identity."""
        return self(self.group.identity)


class MultiplierSymbol:
    """A function phi: G -> C.

    On finite groups the table must be total.  On infinite groups values come
    from ``table``, then ``func``, then ``default`` -- the default is only
    used when ``strict`` is False.
    """

    def __init__(
        self,
        group,
        table: Mapping | None = None,
        default: complex | None = None,
        strict: bool = True,
        func: Callable[[Any], complex] | None = None,
        name: str = "symbol",
    ):
        self.group = group
        self.table = {g: complex(v) for g, v in (table or {}).items()}
        self.default = None if default is None else complex(default)
        self.strict = strict
        self.func = func
        self.name = name
        if isinstance(group, FiniteGroup):
            values = np.empty(group.order, dtype=complex)
            for g in range(group.order):
                if g in self.table:
                    values[g] = self.table[g]
                elif func is not None:
                    values[g] = complex(func(g))
                elif self.default is not None:
                    values[g] = self.default
                else:
                    raise SymbolLookupError(f"symbol {name!r} is not defined at element {g} of {group.name}")
            values.setflags(write=False)
            self.values = values
        else:
            self.values = None

    @classmethod
    def from_array(cls, group: FiniteGroup, values, name: str = "symbol") -> "MultiplierSymbol":
        values = np.asarray(values, dtype=complex)
        if values.shape != (group.order,):
            raise ValueError(f"expected {group.order} symbol values, got shape {values.shape}")
        return cls(group, {g: values[g] for g in range(group.order)}, name=name)

    def __call__(self, g) -> complex:
        if self.values is not None:
            return complex(self.values[g])
        if g in self.table:
            return self.table[g]
        if self.func is not None:
            return complex(self.func(g))
        if self.default is not None and not self.strict:
            return self.default
        raise SymbolLookupError(f"symbol {self.name!r} is not defined at {self.group.format(g)}")

    def dual(self) -> "MultiplierSymbol":
        """The symbol ``s -> phi(s^-1)``."""
        inv = self.group.inv
        if self.values is not None:
            return MultiplierSymbol.from_array(self.group, self.values[self.group.inverse], name=f"dual({self.name})")
        func = (lambda g, f=self.func: f(inv(g))) if self.func is not None else None
        return MultiplierSymbol(
            self.group,
            {inv(g): v for g, v in self.table.items()},
            default=self.default,
            strict=self.strict,
            func=func,
            name=f"dual({self.name})",
        )

    def translated(self, left, right) -> "MultiplierSymbol":
        """The symbol ``s -> phi(left * s * right^-1)`` on a finite group."""
        if self.values is None:
            raise TypeError("translated symbols are only built on finite groups")
        G = self.group
        rinv = G.inv(right)
        vals = [self.values[G.mul(G.mul(left, s), rinv)] for s in range(G.order)]
        return MultiplierSymbol.from_array(G, vals, name=f"{self.name}[{left},{right}]")


# ---------------------------------------------------------------------------
# norms


def regular_matrix(x: GroupAlgebraElement) -> np.ndarray:
    """Left-regular matrix ``sum_g x_g lambda(g)`` on a finite group."""
    G = x.group
    if not isinstance(G, FiniteGroup):
        raise OracleError("regular_matrix needs a finite group")
    whole = folner_set(G, 0)
    out = np.zeros((G.order, G.order), dtype=complex)
    for g, c in x.coeffs.items():
        out += c * lambda_matrix(g, whole)
    return out


def lp_norm_finite(x: GroupAlgebraElement, p) -> float:
    """``(Tr|X|^p / |G|)^(1/p)`` with X the left-regular matrix; operator norm at p = inf."""
    pn = as_pnorm(p)
    if not isinstance(x.group, FiniteGroup):
        raise OracleError("lp_norm_finite needs a finite group; use a corner or oracle route")
    if not x.coeffs:
        return 0.0
    X = regular_matrix(x)
    nrm = schatten_norm(X, pn)
    if pn.is_inf:
        return nrm
    return nrm / x.group.order ** float(pn.inverse)


def _torus_values(x: GroupAlgebraElement, M: int) -> np.ndarray:
    d = x.group.d
    grid = np.zeros((M,) * d, dtype=complex)
    for n, c in x.coeffs.items():
        grid[tuple(k % M for k in n)] += c
    return np.fft.ifftn(grid) * M**d


def lp_norm_Z_oracle(x: GroupAlgebraElement, p, tol: float = 1e-9, max_points: int = 2**24) -> float:
    """L^p norm on Z^d through the dual torus: ``((1/M^d) sum_j |f(theta_j)|^p)^(1/p)``.

    ``f(theta) = sum_n x_n e^{i n.theta}``.  The grid is doubled until two
    successive values agree to ``tol`` (relative).  At p = inf the grid maximum
    is used with the same rule, then polished by a bounded 1-d search when d = 1.
    """
    pn = as_pnorm(p)
    G = x.group
    if not isinstance(G, LatticeGroup):
        raise OracleError("the quadrature oracle is defined for Z^d only")
    if not x.coeffs:
        return 0.0
    span = max(max(abs(a) for a in n) for n in x.coeffs)
    M = 16
    while M < 2 * span + 2:
        M *= 2
    pf = float(pn)

    def evaluate(M):
        f = np.abs(_torus_values(x, M))
        if pn.is_inf:
            return float(f.max())
        top = f.max()
        return float(top * np.mean((f / top) ** pf) ** (1.0 / pf))

    prev = evaluate(M)
    while True:
        M *= 2
        if M**G.d > max_points:
            raise OracleError(f"quadrature did not converge to {tol:g} within {max_points} points")
        cur = evaluate(M)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300):
            break
        prev = cur
    if pn.is_inf and G.d == 1:
        coeffs = list(x.coeffs.items())

        def neg_abs(theta):
            return -abs(sum(c * np.exp(1j * n[0] * theta) for n, c in coeffs))

        f = np.abs(_torus_values(x, M))
        j = int(np.argmax(f))
        h = 2 * np.pi / M
        res = minimize_scalar(neg_abs, bounds=(j * h - h, j * h + h), method="bounded", options={"xatol": 1e-13})
        cur = max(cur, -float(res.fun))
    return cur


def moment_trace(x: GroupAlgebraElement, m: int) -> complex:
    """``tau((x^* x)^m)``, summed over all index words grouped by partial product."""
    state = {x.group.identity: 1.0 + 0j}
    xs = x.adjoint()
    mul = x.group.mul
    for _ in range(m):
        for factor in (xs, x):
            nxt: dict = {}
            for g, a in state.items():
                for h, b in factor.coeffs.items():
                    k = mul(g, h)
                    nxt[k] = nxt.get(k, 0) + a * b
            state = nxt
    return state.get(x.group.identity, 0j)


def lp_norm_moment_oracle(x: GroupAlgebraElement, p, budget: int = 10**7) -> float:
    """Exact ``tau((x^*x)^(p/2))^(1/p)`` for even integer p in {2, 4, 6, 8}."""
    pn = as_pnorm(p)
    if not pn.is_even_integer() or int(pn.value) > 8:
        raise OracleError("the moment oracle needs p in {2, 4, 6, 8}")
    pi = int(pn.value)
    if len(x) ** pi > budget:
        raise OracleError(f"support {len(x)} to the power {pi} exceeds the budget {budget}")
    if not x.coeffs:
        return 0.0
    t = moment_trace(x, pi // 2)
    return max(t.real, 0.0) ** (1.0 / pi)


def lp_norm(x: GroupAlgebraElement, p) -> float:
    """Dispatch to whichever exact route or oracle applies to the group and exponent."""
    pn = as_pnorm(p)
    if isinstance(x.group, FiniteGroup):
        return lp_norm_finite(x, pn)
    if isinstance(x.group, LatticeGroup):
        return lp_norm_Z_oracle(x, pn)
    if pn.is_even_integer() and int(pn.value) <= 8:
        return lp_norm_moment_oracle(x, pn)
    raise OracleError(f"no L^p oracle for {x.group.name} at p = {pn}")


# ---------------------------------------------------------------------------
# corners and multipliers


def corner(x: GroupAlgebraElement, F: ElementSet, orientation: str = "lambda") -> np.ndarray:
    """The compression ``P_F x P_F`` as an |F| x |F| matrix.

    ``orientation="lambda"`` gives entry ``x(s t^-1)``; ``"fourier"`` gives
    ``x(t s^-1)``, the convention used when identifying A(G) with L^1.
    """
    if orientation not in ("lambda", "fourier"):
        raise ValueError(f"unknown corner orientation {orientation!r}")
    n = len(F)
    out = np.zeros((n, n), dtype=complex)
    mul = F.group.mul
    for u, c in x.coeffs.items():
        for j, t in enumerate(F.elements):
            i = F.index.get(mul(u, t))
            if i is not None:
                out[i, j] = c
    return out if orientation == "lambda" else out.T.copy()


def normalized_corner_norm(x: GroupAlgebraElement, F: ElementSet, p) -> float:
    """``||P_F x P_F||_p / |F|^(1/p)``."""
    pn = as_pnorm(p)
    return schatten_norm(corner(x, F), pn) / len(F) ** float(pn.inverse)


def fourier_multiply(phi: MultiplierSymbol, x: GroupAlgebraElement) -> GroupAlgebraElement:
    """``lambda_g -> phi(g) lambda_g`` applied to x."""
    return GroupAlgebraElement(x.group, {g: phi(g) * c for g, c in x.coeffs.items()})


def symbol_check_matrix(phi: MultiplierSymbol, F: ElementSet) -> np.ndarray:
    """The Schur symbol ``phi(s t^-1)`` for s, t in F."""
    G = F.group
    if isinstance(G, FiniteGroup):
        pos = np.array(F.elements, dtype=np.int64)
        return np.array(phi.values)[G.quotient_index()[np.ix_(pos, pos)]]
    n = len(F)
    out = np.empty((n, n), dtype=complex)
    cache: dict = {}
    mul, inv = G.mul, G.inv
    for j, t in enumerate(F.elements):
        ti = inv(t)
        for i, s in enumerate(F.elements):
            q = mul(s, ti)
            if q not in cache:
                cache[q] = phi(q)
            out[i, j] = cache[q]
    return out


def pairing_weight_sum(x: GroupAlgebraElement, y: GroupAlgebraElement, F: ElementSet) -> complex:
    """``sum_u x(u) y(u^-1) |F & uF|``, the closed form of ``Tr(corner(x) corner(y))``."""
    inv, mul = x.group.inv, x.group.mul
    total = 0j
    for u, c in x.coeffs.items():
        d = y(inv(u))
        if d == 0:
            continue
        overlap = sum(1 for f in F.elements if mul(u, f) in F.index)
        total += c * d * overlap
    return total


def pairing(x: GroupAlgebraElement, y: GroupAlgebraElement) -> complex:
    """``tau(xy) = sum_u x(u) y(u^-1)``."""
    inv = x.group.inv
    return sum((c * y(inv(u)) for u, c in x.coeffs.items()), 0j)


# ---------------------------------------------------------------------------
# builtins and files


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ValueError(f"bad number {text!r} in {what}") from exc


def builtin_symbol(group, spec: str, seed: int | None = None) -> MultiplierSymbol:
    """Builtin symbols: ``one``, ``zero``, ``delta:g``, ``two-point:c``, ``gaussian:sigma``,
    ``ball-indicator:r`` and ``random`` (real normal values, needs a seed, finite groups)."""
    tag, _, arg = spec.partition(":")
    if tag == "one":
        return MultiplierSymbol(group, func=lambda g: 1.0, name="one")
    if tag == "zero":
        return MultiplierSymbol(group, func=lambda g: 0.0, name="zero")
    if tag == "delta":
        g0 = group.parse(arg) if arg else group.identity
        return MultiplierSymbol(group, func=lambda g: 1.0 if g == g0 else 0.0, name=f"delta:{arg or 'e'}")
    if tag == "two-point":
        if not (isinstance(group, FiniteGroup) and group.order == 2):
            raise ValueError("two-point symbols live on zmod:2")
        c = complex(arg.replace(" ", "")) if arg else 1.0
        return MultiplierSymbol.from_array(group, [1.0, c], name=f"two-point:{arg}")
    if tag == "gaussian":
        if not isinstance(group, LatticeGroup):
            raise ValueError("gaussian symbols live on zd:d")
        sigma = _parse_float(arg, spec)
        return MultiplierSymbol(
            group, func=lambda g: math.exp(-sum(a * a for a in g) / (2 * sigma**2)), name=f"gaussian:{arg}"
        )
    if tag == "ball-indicator":
        if isinstance(group, FiniteGroup):
            raise ValueError("ball-indicator needs a generated group (zd or free)")
        r = int(arg)
        return MultiplierSymbol(
            group, func=lambda g: 1.0 if group.word_length(g) <= r else 0.0, name=f"ball-indicator:{r}"
        )
    if tag == "random":
        if not isinstance(group, FiniteGroup):
            raise ValueError("random symbols are only built on finite groups")
        if seed is None:
            raise ValueError("random symbols need a seed")
        rng = np.random.default_rng(seed)
        return MultiplierSymbol.from_array(group, rng.standard_normal(group.order), name=f"random:{seed}")
    raise ValueError(f"unknown builtin symbol {spec!r}")


def builtin_element(group, spec: str, seed: int | None = None) -> GroupAlgebraElement:
    """Builtin elements: ``ball<r>`` (sum over the word ball), ``gens`` (sum of
    generators and inverses), ``delta:g``, ``random:<size>`` (finite groups)."""
    if spec.startswith("ball"):
        r = int(spec[4:] or 1)
        if isinstance(group, FiniteGroup):
            raise ValueError("ball elements need a generated group (zd or free)")
        return GroupAlgebraElement(group, {g: 1.0 for g in word_ball(group, r)})
    if spec == "gens":
        if isinstance(group, FiniteGroup):
            raise ValueError("gens needs a generated group (zd or free)")
        return GroupAlgebraElement(group, {g: 1.0 for g in group.generators()})
    if spec.startswith("delta"):
        _, _, arg = spec.partition(":")
        return GroupAlgebraElement.delta(group, group.parse(arg) if arg else group.identity)
    if spec.startswith("random"):
        if not isinstance(group, FiniteGroup) or seed is None:
            raise ValueError("random elements need a finite group and a seed")
        rng = np.random.default_rng(seed)
        vals = rng.standard_normal(group.order) + 1j * rng.standard_normal(group.order)
        return GroupAlgebraElement.from_array(group, vals)
    raise ValueError(f"unknown builtin element {spec!r}")


def _entries_from_json(obj: Any, path: str) -> tuple[list, Any]:
    if isinstance(obj, list):
        return obj, None
    if isinstance(obj, dict) and "entries" in obj:
        return obj["entries"], obj.get("default")
    raise ValueError(f"{path}: expected a list of entries or an object with 'entries'")


def _complex_of(entry: Mapping, where: str) -> complex:
    try:
        return complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: bad re/im values") from exc


def _load_entries(group, path: str | Path):
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    entries, default = _entries_from_json(obj, str(path))
    # entries are flat objects, so entry i opens at the i-th '{' after the list starts
    key = re.search(r'"entries"\s*:\s*\[', text) if isinstance(obj, dict) else re.search(r"\[", text)
    starts = [m.start() for m in re.compile(r"\{").finditer(text, key.end())] if key else []
    table = {}
    for i, entry in enumerate(entries):
        pos = starts[i] if i < len(starts) else len(text)
        where = f"{path}:{text.count(chr(10), 0, pos) + 1}: entry {i}"
        if not isinstance(entry, Mapping) or "element" not in entry:
            raise ValueError(f"{where}: missing 'element'")
        try:
            g = group.parse(entry["element"])
        except (ValueError, TypeError) as exc:
            raise ValueError(f"{where}: {exc}") from exc
        if g in table:
            raise ValueError(f"{where}: element {entry['element']!r} listed twice")
        table[g] = _complex_of(entry, where)
    if default is not None:
        default = _complex_of(default, f"{path}: default") if isinstance(default, Mapping) else complex(default)
    return table, default


def load_symbol(group, path: str | Path) -> MultiplierSymbol:
    """Read a symbol file: ``{"entries": [{"element", "re", "im"}, ...], "default": {...}}``.

    A file with a default yields a permissive symbol; without one it is strict.
    """
    table, default = _load_entries(group, path)
    if isinstance(group, FiniteGroup) and default is None and len(table) != group.order:
        missing = next(g for g in range(group.order) if g not in table)
        raise ValueError(f"{path}: symbol on {group.name} must be total (element {missing} missing)")
    return MultiplierSymbol(group, table, default=default, strict=default is None, name=str(path))


def load_element(group, path: str | Path) -> GroupAlgebraElement:
    table, _ = _load_entries(group, path)
    return GroupAlgebraElement(group, table)


def symbol_to_json(phi: MultiplierSymbol, elements: Iterable | None = None) -> dict:
    G = phi.group
    if elements is None:
        elements = range(G.order) if isinstance(G, FiniteGroup) else phi.table.keys()
    entries = []
    for g in elements:
        v = phi(g)
        entries.append({"element": G.format(g), "re": v.real, "im": v.imag})
    out: dict = {"entries": entries}
    if phi.default is not None:
        out["default"] = {"re": phi.default.real, "im": phi.default.imag}
    return out


def element_to_json(x: GroupAlgebraElement) -> list:
    return [{"element": x.group.format(g), "re": c.real, "im": c.imag} for g, c in x.coeffs.items()]
