"""Model-formula mini-language for cross-classified random-intercept models.

A formula names the response, the fixed part, and the random classifications:

    attain ~ 1 + x + (1|school) + (1|neigh)
    y ~ 0 + x + (1|school:neigh)
    flow ~ 1 + dist + corr(origin, dest)

Grammar (whitespace-insensitive)::

    formula := ident "~" fixed ("+" random)*
    fixed   := fterm ("+" fterm)*
    fterm   := "1" | "0" | ident
    random  := "(" "1" "|" cexpr ")" | "corr" "(" ident "," ident ")"
    cexpr   := ident (":" ident)?
    ident   := [A-Za-z_][A-Za-z0-9_]*

The intercept is included by default; an explicit "0" in the fixed part
suppresses it.  ``a:b`` attaches a random intercept to every occupied cell
of the a-by-b cross-classification.  ``corr(a, b)`` declares two random
intercepts over a shared label space whose effects covary (dyadic data).
Random slopes and nested-term shorthand are deliberately not part of the
language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "FormulaError",
    "RandomTerm",
    "ModelFormula",
    "parse_formula",
    "render_formula",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

SIMPLE = "simple"
INTERACTION = "interaction"
CORRELATED_PAIR = "correlated-pair"

_KINDS = (SIMPLE, INTERACTION, CORRELATED_PAIR)


class FormulaError(ValueError):
    """Malformed or inconsistent model formula.

    ``position`` is the 1-based character offset of the offending token in
    the original text (``None`` for errors raised outside parsing).
    """

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class RandomTerm:
    """One random-intercept term: a simple classification, a two-way cell
    interaction, or a correlated origin/destination pair."""

    kind: str
    columns: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown random-term kind {self.kind!r}")
        want = 1 if self.kind == SIMPLE else 2
        if len(self.columns) != want:
            raise ValueError(
                f"{self.kind} term takes {want} column(s), got {len(self.columns)}"
            )
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"{self.kind} term columns must be distinct")
        for c in self.columns:
            if not _IDENT_RE.fullmatch(c):
                raise ValueError(f"invalid column name {c!r}")

    def render(self) -> str:
        if self.kind == SIMPLE:
            return f"(1|{self.columns[0]})"
        if self.kind == INTERACTION:
            return f"(1|{self.columns[0]}:{self.columns[1]})"
        return f"corr({self.columns[0]}, {self.columns[1]})"


@dataclass(frozen=True)
class ModelFormula:
    """Parsed model specification.

    ``fixed_terms`` holds covariate column names in formula order; the
    intercept is carried separately.  A formula with no random terms is
    legal but reported as pure-fixed so callers can warn.
    """

    response: str
    fixed_terms: tuple[str, ...] = ()
    intercept: bool = True
    random_terms: tuple[RandomTerm, ...] = ()

    def __post_init__(self):
        if not _IDENT_RE.fullmatch(self.response):
            raise ValueError(f"invalid response name {self.response!r}")
        for t in self.fixed_terms:
            if not _IDENT_RE.fullmatch(t):
                raise ValueError(f"invalid fixed-term name {t!r}")
        if self.response in self.fixed_terms:
            raise ValueError(f"response {self.response!r} reused as predictor")

    @property
    def is_pure_fixed(self) -> bool:
        return not self.random_terms


def parse_formula(text: str) -> ModelFormula:
    """Parse a model formula.

    Raises FormulaError with a 1-based character position for syntax
    errors, duplicate classifications, and response reuse.
    """
    if not isinstance(text, str) or not text.strip():
        raise FormulaError("empty formula", 1)
    return _Parser(text).parse()


def render_formula(f: ModelFormula) -> str:
    """Render a formula in canonical form: explicit "1"/"0" intercept
    marker first, then fixed terms and random terms in their stored order,
    single spaces around separators.  ``parse_formula`` inverts it."""
    parts = ["1" if f.intercept else "0"]
    parts.extend(f.fixed_terms)
    parts.extend(t.render() for t in f.random_terms)
    return f"{f.response} ~ " + " + ".join(parts)


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<num>[0-9]+(\.[0-9]*)?)"
    r"|(?P<op>[~+()|:,])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "num" | one of ~ + ( ) | : , | "end"
    value: str
    pos: int  # 1-based character offset


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise FormulaError(f"unexpected character {text[i]!r}", i + 1)
        if m.lastgroup != "ws":
            kind = m.group("op") if m.lastgroup == "op" else m.lastgroup
            tokens.append(_Token(kind, m.group(0), i + 1))
        i = m.end()
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    # -- token helpers ------------------------------------------------
    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.value or "end of input"
            raise FormulaError(f"expected {what}, found {shown!r}", tok.pos)
        return self.advance()

    def ident(self, what: str = "identifier") -> _Token:
        return self.expect("ident", what)

    # -- grammar ------------------------------------------------------
    def parse(self) -> ModelFormula:
        response = self.ident("response name").value
        self.expect("~", "'~' after response")

        intercept = True
        saw_intercept_term = False
        fixed: list[str] = []
        randoms: list[RandomTerm] = []
        random_positions: list[int] = []
        seen_fixed: set[str] = set()
        seen_classifications: dict[tuple, int] = {}

        first = True
        while True:
            tok = self.peek()
            if not first:
                if tok.kind == "end":
                    break
                self.expect("+", "'+' between terms")
                tok = self.peek()
            first = False

            if tok.kind == "(" or (tok.kind == "ident" and tok.value == "corr"
                                   and self.peek(1).kind == "("):
                term, pos = self._random_term()
                self._check_random(term, pos, response, seen_classifications)
                randoms.append(term)
                random_positions.append(pos)
            elif tok.kind in ("num", "ident"):
                if randoms:
                    raise FormulaError(
                        "fixed-effect term after random term", tok.pos)
                value = self.advance().value
                if value in ("1", "0"):
                    if saw_intercept_term:
                        raise FormulaError(
                            "conflicting or duplicate intercept term", tok.pos)
                    saw_intercept_term = True
                    intercept = value == "1"
                elif tok.kind == "num":
                    raise FormulaError(
                        f"expected '1', '0', or identifier, found {value!r}",
                        tok.pos)
                else:
                    if value == response:
                        raise FormulaError(
                            f"response {value!r} reused as predictor", tok.pos)
                    if value in seen_fixed:
                        raise FormulaError(
                            f"duplicate fixed term {value!r}", tok.pos)
                    seen_fixed.add(value)
                    fixed.append(value)
            else:
                shown = tok.value or "end of input"
                raise FormulaError(f"expected a model term, found {shown!r}",
                                   tok.pos)

        if not saw_intercept_term and not fixed and not randoms:
            raise FormulaError("empty right-hand side", self.peek().pos)

        return ModelFormula(
            response=response,
            fixed_terms=tuple(fixed),
            intercept=intercept,
            random_terms=tuple(randoms),
        )

    def _random_term(self) -> tuple[RandomTerm, int]:
        tok = self.peek()
        if tok.kind == "ident":  # corr(a, b)
            self.advance()
            self.expect("(", "'(' after 'corr'")
            a = self.ident("first column of corr(...)")
            self.expect(",", "',' between corr(...) columns")
            b = self.ident("second column of corr(...)")
            self.expect(")", "')' closing corr(...)")
            if a.value == b.value:
                raise FormulaError(
                    f"corr(...) columns must be distinct, got {a.value!r} twice",
                    b.pos)
            return RandomTerm(CORRELATED_PAIR, (a.value, b.value)), tok.pos

        self.expect("(", "'('")
        one = self.peek()
        if one.kind != "num" or one.value != "1":
            shown = one.value or "end of input"
            raise FormulaError(f"expected '1' after '(', found {shown!r}",
                               one.pos)
        self.advance()
        self.expect("|", "'|' in random term")
        a = self.ident("classification name")
        if self.peek().kind == ":":
            self.advance()
            b = self.ident("second classification of interaction")
            self.expect(")", "')' closing random term")
            if a.value == b.value:
                raise FormulaError(
                    f"interaction columns must be distinct, got {a.value!r} twice",
                    b.pos)
            return RandomTerm(INTERACTION, (a.value, b.value)), tok.pos
        self.expect(")", "')' closing random term")
        return RandomTerm(SIMPLE, (a.value,)), tok.pos

    @staticmethod
    def _keys(term: RandomTerm) -> list[tuple]:
        # Interactions are keyed by their unordered column pair; simple and
        # corr terms claim each member column, so (1|a) + corr(a, b) clashes.
        if term.kind == INTERACTION:
            return [("cell", tuple(sorted(term.columns)))]
        return [("col", c) for c in term.columns]

    def _check_random(self, term: RandomTerm, pos: int, response: str,
                      seen: dict[tuple, int]) -> None:
        for c in term.columns:
            if c == response:
                raise FormulaError(
                    f"response {c!r} reused as predictor", pos)
        for key in self._keys(term):
            if key in seen:
                name = key[1] if key[0] == "col" else ":".join(key[1])
                raise FormulaError(
                    f"duplicate classification {name!r} in random terms", pos)
            seen[key] = pos
