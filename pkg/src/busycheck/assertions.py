"""Ghost-resource assertions: bundles, satisfaction, entailment, view shifts.

A resource bundle is a multiset of obligations-chunk values plus a credit
count.  `obs(n)` asserts possession of one full chunk holding exactly n exit
obligations; `credit` asserts at least one busy-wait credit.  Assertions are
built from `true`, `false`, `*`, `obs(n)`, and `credit` only.

Satisfaction is the standard separating-conjunction model over bundle union,
so the model is affine: extra resources never falsify an assertion.  Every
assertion normalizes to either Bottom (contains `false`) or a flat form
(multiset of obs atoms, credit-atom count); entailment and view shifts are
decided on flats.

A view shift may (i) trade `obs(n)` for `obs(n+1) * credit` and back (pairs
are spawned and cancelled together, never one-sided), (ii) weaken
semantically, and (iii) chain transitively.  For flats with a single obs
atom on both sides the decision is the closed form n - k <= n' - k'; for the
general case a budget-bounded saturation search is used and exhaustion is
reported as "unknown" rather than "no".
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ResourceBundle:
    """Multiset of obligations-chunk values plus a credit count."""

    chunks: tuple[int, ...]
    credits: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "chunks", tuple(sorted(self.chunks)))
        if self.credits < 0 or any(v < 0 for v in self.chunks):
            raise ValueError("bundle components must be naturals")

    def union(self, other: "ResourceBundle") -> "ResourceBundle":
        return ResourceBundle(self.chunks + other.chunks, self.credits + other.credits)

    @property
    def complete(self) -> bool:
        """A thread's bundle: exactly one obligations chunk."""
        return len(self.chunks) == 1


EMPTY_BUNDLE = ResourceBundle((), 0)


def bundle(chunks: tuple[int, ...] | list[int], credits: int) -> ResourceBundle:
    return ResourceBundle(tuple(chunks), credits)


# --- assertion syntax --------------------------------------------------------


class Assertion:
    __slots__ = ()


@dataclass(frozen=True)
class TrueA(Assertion):
    pass


@dataclass(frozen=True)
class FalseA(Assertion):
    pass


@dataclass(frozen=True)
class Obs(Assertion):
    count: int


@dataclass(frozen=True)
class Credit(Assertion):
    pass


@dataclass(frozen=True)
class Star(Assertion):
    left: Assertion
    right: Assertion


TRUE = TrueA()
FALSE = FalseA()
CREDIT = Credit()
OBS_ZERO = Obs(0)


def star(*parts: Assertion) -> Assertion:
    """Left-associated separating conjunction of the given parts."""
    if not parts:
        return TRUE
    acc = parts[0]
    for p in parts[1:]:
        acc = Star(acc, p)
    return acc


def state_assertion(obs_count: int, credit_count: int) -> Assertion:
    """Canonical rendering of a single-chunk ghost state: obs(n) * credit^k."""
    return star(Obs(obs_count), *([CREDIT] * credit_count))


# --- satisfaction (model relation) -------------------------------------------


def _splits(b: ResourceBundle):
    n = len(b.chunks)
    for mask in range(1 << n):
        left = tuple(v for i, v in enumerate(b.chunks) if mask >> i & 1)
        right = tuple(v for i, v in enumerate(b.chunks) if not mask >> i & 1)
        for c in range(b.credits + 1):
            yield ResourceBundle(left, c), ResourceBundle(right, b.credits - c)


def satisfies(b: ResourceBundle, a: Assertion) -> bool:
    """Model relation: `true` always; `a1 * a2` by existence of a bundle split;
    `obs(n)` iff some chunk holds exactly n; `credit` iff credits >= 1."""
    if isinstance(a, TrueA):
        return True
    if isinstance(a, FalseA):
        return False
    if isinstance(a, Obs):
        return a.count in b.chunks
    if isinstance(a, Credit):
        return b.credits >= 1
    if isinstance(a, Star):
        return any(
            satisfies(b1, a.left) and satisfies(b2, a.right) for b1, b2 in _splits(b)
        )
    raise TypeError(f"not an assertion: {a!r}")


# --- normal form --------------------------------------------------------------


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Flat:
    obs: tuple[int, ...]  # sorted multiset of obs atoms
    credits: int  # number of credit atoms


BOTTOM = Bottom()

NormalizedAssertion = Bottom | Flat


def normalize(a: Assertion) -> NormalizedAssertion:
    """Flatten stars; `true` is the unit, any `false` collapses to Bottom."""
    obs: list[int] = []
    credits = 0
    stack = [a]
    while stack:
        node = stack.pop()
        if isinstance(node, Star):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Obs):
            obs.append(node.count)
        elif isinstance(node, Credit):
            credits += 1
        elif isinstance(node, FalseA):
            return BOTTOM
        elif not isinstance(node, TrueA):
            raise TypeError(f"not an assertion: {node!r}")
    return Flat(tuple(sorted(obs)), credits)


def satisfies_flat(b: ResourceBundle, f: NormalizedAssertion) -> bool:
    if isinstance(f, Bottom):
        return False
    remaining = list(b.chunks)
    for atom in f.obs:
        if atom not in remaining:
            return False
        remaining.remove(atom)
    return b.credits >= f.credits


def flat_eq(a: Assertion, b: Assertion) -> bool:
    return normalize(a) == normalize(b)


def flat_add(x: NormalizedAssertion, y: NormalizedAssertion) -> NormalizedAssertion:
    if isinstance(x, Bottom) or isinstance(y, Bottom):
        return BOTTOM
    return Flat(tuple(sorted(x.obs + y.obs)), x.credits + y.credits)


# --- entailment ----------------------------------------------------------------


def entails(a: Assertion, b: Assertion) -> bool:
    """Semantic implication: every bundle satisfying `a` satisfies `b`.

    On flats this is multiset inclusion of obs atoms plus a credit bound; the
    witness bundle equal to `a`'s own flat makes the criterion complete.
    """
    na, nb = normalize(a), normalize(b)
    if isinstance(na, Bottom):
        return True
    if isinstance(nb, Bottom):
        return False
    return _multiset_leq(nb.obs, na.obs) and nb.credits <= na.credits


def _multiset_leq(small: tuple[int, ...], big: tuple[int, ...]) -> bool:
    remaining = list(big)
    for v in small:
        if v not in remaining:
            return False
        remaining.remove(v)
    return True


# --- view shifts ----------------------------------------------------------------


VIEW_SHIFT_STEP_BUDGET_BASE = 4


def view_shift_status(a: Assertion, b: Assertion) -> bool | None:
    """Three-valued view-shift decision: True, False, or None (budget exhausted).

    Single-obs-atom flats use the exact closed form; no rewrite creates or
    merges obs atoms, so a target with more atoms than the source is a
    definite no.  Everything else falls back to bounded saturation, which is
    conservative: failure to find a path within budget is None, never False.
    """
    na, nb = normalize(a), normalize(b)
    if isinstance(na, Bottom):
        return True
    if isinstance(nb, Bottom):
        return False
    if len(nb.obs) > len(na.obs):
        return False
    if len(na.obs) <= 1:
        return _closed_form(na, nb)
    found = _saturate(na, nb)
    return True if found else None


def view_shift(a: Assertion, b: Assertion) -> bool:
    """True iff the shift is established (unknown counts as not established)."""
    return view_shift_status(a, b) is True


def _closed_form(na: Flat, nb: Flat) -> bool:
    if len(na.obs) == 0:
        # no atom to trade against: only credit weakening applies
        return len(nb.obs) == 0 and nb.credits <= na.credits
    if len(nb.obs) == 1:
        return na.obs[0] - na.credits <= nb.obs[0] - nb.credits
    # dropping the atom: inflate the pair first, then weaken it away,
    # which funds any number of credits
    return True


def _saturate(na: Flat, nb: Flat) -> bool:
    # dropping resources never enables a pair move, so weakening steps can
    # always be deferred: explore intro/cancel only, then weaken once
    max_val = max((*na.obs, *nb.obs), default=0)
    atoms_total = len(na.obs) + na.credits + len(nb.obs) + nb.credits
    budget = 2 * atoms_total + VIEW_SHIFT_STEP_BUDGET_BASE
    val_bound = max_val + budget
    cred_bound = max(na.credits, nb.credits) + budget
    frontier = {na}
    seen = {na}
    for _ in range(budget):
        if any(_weakens_to(f, nb) for f in frontier):
            return True
        nxt = set()
        for f in frontier:
            for g in _pair_moves(f, val_bound, cred_bound):
                if g not in seen:
                    seen.add(g)
                    nxt.add(g)
        if not nxt:
            break
        frontier = nxt
    return any(_weakens_to(f, nb) for f in frontier)


def _weakens_to(f: Flat, target: Flat) -> bool:
    return _multiset_leq(target.obs, f.obs) and target.credits <= f.credits


def _pair_moves(f: Flat, val_bound: int, cred_bound: int):
    atoms = f.obs
    for i, v in enumerate(atoms):
        if v + 1 <= val_bound and f.credits + 1 <= cred_bound:
            yield Flat(tuple(sorted(atoms[:i] + (v + 1,) + atoms[i + 1 :])), f.credits + 1)
        if v >= 1 and f.credits >= 1:
            yield Flat(tuple(sorted(atoms[:i] + (v - 1,) + atoms[i + 1 :])), f.credits - 1)


# --- concrete syntax -----------------------------------------------------------


class AssertionParseError(ValueError):
    pass


def parse_assertion(text: str) -> Assertion:
    """Parse `true | false | obs(N) | credit | A * B` (left-assoc, parens ok)."""
    tokens = _lex_assertion(text)
    pos = 0

    def peek() -> str:
        return tokens[pos] if pos < len(tokens) else ""

    def take() -> str:
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def atom() -> Assertion:
        tok = take()
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok == "credit":
            return CREDIT
        if tok == "obs":
            if take() != "(":
                raise AssertionParseError("expected '(' after obs")
            num = take()
            if not num.isdigit():
                raise AssertionParseError(f"expected a number, found {num!r}")
            if take() != ")":
                raise AssertionParseError("expected ')'")
            return Obs(int(num))
        if tok == "(":
            inner = expr()
            if take() != ")":
                raise AssertionParseError("expected ')'")
            return inner
        raise AssertionParseError(f"unexpected token {tok!r}")

    def expr() -> Assertion:
        acc = atom()
        while peek() == "*":
            take()
            acc = Star(acc, atom())
        return acc

    result = expr()
    if pos != len(tokens):
        raise AssertionParseError(f"trailing input at {tokens[pos]!r}")
    return result


def _lex_assertion(text: str) -> list[str]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()*":
            tokens.append(ch)
            i += 1
        elif ch.isalpha() or ch.isdigit():
            j = i
            while j < len(text) and (text[j].isalnum()):
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            raise AssertionParseError(f"unexpected character {ch!r}")
    return tokens


def pretty_assertion(a: Assertion) -> str:
    if isinstance(a, TrueA):
        return "true"
    if isinstance(a, FalseA):
        return "false"
    if isinstance(a, Obs):
        return f"obs({a.count})"
    if isinstance(a, Credit):
        return "credit"
    if isinstance(a, Star):
        left = pretty_assertion(a.left)
        right = pretty_assertion(a.right)
        if isinstance(a.right, Star):  # right nesting needs parens under left-assoc
            right = f"({right})"
        return f"{left} * {right}"
    raise TypeError(f"not an assertion: {a!r}")
