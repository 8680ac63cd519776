"""A small formula language for propensity models and its design matrices.

Grammar::

    formula := term ('+' term)*
    term    := factor (':' factor)?
    factor  := IDENT | ('exp' | 'log' | 'sq') '(' IDENT ')'

An intercept is always added by :func:`build_design_matrix`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ParseError, UnknownVariable

TRANSFORMS = ("exp", "log", "sq")

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)|(?P<op>[+:()]))")


@dataclass(frozen=True)
class Factor:
    name: str
    transform: Optional[str] = None  # None, "exp", "log" or "sq"

    def __str__(self):
        return self.name if self.transform is None else f"{self.transform}({self.name})"

    def evaluate(self, col: np.ndarray) -> np.ndarray:
        if self.transform is None:
            return col
        if self.transform == "exp":
            return np.exp(col)
        if self.transform == "sq":
            return col * col
        if np.any(col <= 0):
            raise DomainError(f"log({self.name}) requires strictly positive values")
        return np.log(col)


@dataclass(frozen=True)
class FormulaTerm:
    factors: tuple  # one Factor, or two for an interaction

    @property
    def kind(self) -> str:
        if len(self.factors) == 2:
            return "interaction"
        f = self.factors[0]
        return {None: "variable", "exp": "exp", "log": "log", "sq": "square"}[f.transform]

    @property
    def args(self) -> tuple:
        return tuple(f.name for f in self.factors)

    def __str__(self):
        return ":".join(str(f) for f in self.factors)


def variable(name):
    return FormulaTerm((Factor(name),))


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
        start = m.start("ident") if m.group("ident") else m.start("op")
        tokens.append((m.group("ident") or m.group("op"), start, bool(m.group("ident"))))
        pos = m.end()
    return tokens


def parse_formula(text: str, names: Optional[Sequence[str]] = None) -> list:
    """Parse ``text`` into terms, checking variables against ``names`` if given.

    An empty (or whitespace-only) formula, or the literal ``1``, is the
    intercept-only model and yields no terms.
    """
    if text.strip() in ("", "1"):
        return []
    tokens = _tokenize(text)
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else (None, len(text), False)

    def expect(tok):
        nonlocal i
        val, pos, _ = peek()
        if val != tok:
            raise ParseError(f"expected {tok!r}, found {val if val is not None else 'end of input'!r}", pos)
        i += 1

    def factor():
        nonlocal i
        val, pos, is_ident = peek()
        if not is_ident:
            raise ParseError(
                f"expected a variable, found {val if val is not None else 'end of input'!r}", pos)
        i += 1
        nxt = peek()[0]
        if val in TRANSFORMS and nxt == "(":
            i += 1
            arg, apos, arg_ident = peek()
            if not arg_ident:
                raise ParseError(f"expected a variable inside {val}()", apos)
            i += 1
            expect(")")
            return Factor(arg, val), apos
        return Factor(val), pos

    terms = []
    while True:
        f1, p1 = factor()
        fs = [(f1, p1)]
        if peek()[0] == ":":
            i += 1
            fs.append(factor())
        term = FormulaTerm(tuple(f for f, _ in fs))
        if names is not None:
            for f, p in fs:
                if f.name not in names:
                    raise UnknownVariable(f"unknown variable {f.name!r} at position {p}")
        if term in terms:
            raise ParseError(f"duplicate term {term}", fs[0][1])
        terms.append(term)
        val, pos, _ = peek()
        if val is None:
            break
        if val != "+":
            raise ParseError(f"expected '+' or end of input, found {val!r}", pos)
        i += 1
    return terms


def format_formula(terms) -> str:
    return " + ".join(str(t) for t in terms) if terms else "1"


def build_design_matrix(d, terms) -> np.ndarray:
    """n x (1 + len(terms)) matrix: intercept column then one column per term."""
    cols = [np.ones(d.n)]
    for term in terms:
        col = np.ones(d.n)
        for f in term.factors:
            try:
                raw = d.column(f.name)
            except KeyError:
                raise UnknownVariable(f"unknown variable {f.name!r}") from None
            col = col * f.evaluate(raw)
        cols.append(col)
    return np.column_stack(cols)
