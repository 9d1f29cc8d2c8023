"""Monotone attribute policies as threshold access trees.

Grammar (AND binds tighter than OR)::

    expr   := term ("OR" term)*
    term   := factor ("AND" factor)*
    factor := ATTR | "(" expr ")" | "THRESHOLD" "(" INT ";" expr ("," expr)* ")"

A chain ``A AND B AND C`` becomes a single ``Threshold(3, ...)`` node, a
chain of ORs a single ``Threshold(1, ...)``.  Parenthesised groups are kept
as nested nodes.  Child order is significant: the ABE layer indexes secret
shares by child position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import InvalidAttribute, InvalidThreshold, PolicySyntaxError

_ATTR_RE = re.compile(r"[A-Z0-9_]{1,64}")
RESERVED = frozenset({"AND", "OR", "THRESHOLD", "NOT"})


class Attribute(str):
    """An attribute name: ``[A-Z0-9_]``, 1 to 64 characters, not a keyword."""

    __slots__ = ()

    def __new__(cls, name: str) -> "Attribute":
        if isinstance(name, Attribute):
            return name
        if not isinstance(name, str) or not _ATTR_RE.fullmatch(name):
            raise InvalidAttribute(f"invalid attribute name {name!r}: must match [A-Z0-9_]{{1,64}}")
        if name in RESERVED:
            raise InvalidAttribute(f"{name!r} is a reserved word")
        return super().__new__(cls, name)


AttributeSet = frozenset


def attribute_set(names: Iterable[str] = ()) -> frozenset[Attribute]:
    if isinstance(names, str):
        names = [n for n in re.split(r"[,\s]+", names) if n]
    return frozenset(Attribute(n) for n in names)


@dataclass(frozen=True)
class Leaf:
    attribute: Attribute


@dataclass(frozen=True)
class Threshold:
    k: int
    children: tuple["PolicyNode", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise InvalidThreshold("threshold node needs at least one child")
        if not 1 <= self.k <= len(self.children):
            raise InvalidThreshold(f"threshold k={self.k} outside 1..{len(self.children)}")


PolicyNode = Union[Leaf, Threshold]


@dataclass(frozen=True)
class AccessPolicy:
    root: PolicyNode

    def leaves(self) -> list[Attribute]:
        """Leaf attributes in depth-first, left-to-right order."""
        return [leaf.attribute for leaf in iter_leaves(self.root)]

    def attributes(self) -> frozenset[Attribute]:
        return frozenset(self.leaves())

    def __str__(self) -> str:
        return print_policy(self)


def iter_leaves(node: PolicyNode) -> Iterator[Leaf]:
    if isinstance(node, Leaf):
        yield node
    else:
        for child in node.children:
            yield from iter_leaves(child)


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(?P<word>[A-Za-z0-9_]+)|(?P<punct>[();,])|(?P<bad>\S))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            break
        pos = m.end()
        start = m.start(m.lastgroup)
        value = m.group(m.lastgroup)
        if m.lastgroup == "bad":
            raise PolicySyntaxError(start, "attribute, keyword or punctuation", value)
        if m.lastgroup == "word":
            if value in ("AND", "OR", "THRESHOLD", "NOT"):
                tokens.append((value, value, start))
            else:
                tokens.append(("WORD", value, start))
        else:
            tokens.append((value, value, start))
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str, expected: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise PolicySyntaxError(tok[2], expected or repr(kind), tok[1] or "end of input")
        self.i += 1
        return tok

    def expr(self) -> PolicyNode:
        terms = [self.term()]
        while self.peek()[0] == "OR":
            self.i += 1
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Threshold(1, tuple(terms))

    def term(self) -> PolicyNode:
        factors = [self.factor()]
        while self.peek()[0] == "AND":
            self.i += 1
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Threshold(len(factors), tuple(factors))

    def factor(self) -> PolicyNode:
        kind, value, pos = self.peek()
        if kind == "WORD":
            self.i += 1
            try:
                return Leaf(Attribute(value))
            except InvalidAttribute as exc:
                raise InvalidAttribute(f"at position {pos}: {exc}") from None
        if kind == "(":
            self.i += 1
            node = self.expr()
            self.take(")", "')'")
            return node
        if kind == "THRESHOLD":
            self.i += 1
            self.take("(", "'(' after THRESHOLD")
            _, kval, kpos = self.take("WORD", "threshold count")
            if not kval.isdigit():
                raise PolicySyntaxError(kpos, "integer threshold count", kval)
            self.take(";", "';' after threshold count")
            children = [self.expr()]
            while self.peek()[0] == ",":
                self.i += 1
                children.append(self.expr())
            self.take(")", "',' or ')'")
            k = int(kval)
            if not 1 <= k <= len(children):
                raise InvalidThreshold(
                    f"at position {kpos}: threshold {k} outside 1..{len(children)}")
            return Threshold(k, tuple(children))
        if kind == "NOT":
            raise PolicySyntaxError(pos, "attribute (negation is not supported)", value)
        raise PolicySyntaxError(pos, "attribute, '(' or THRESHOLD", value or "end of input")


def parse_policy(text: str | bytes) -> AccessPolicy:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    p = _Parser(text)
    root = p.expr()
    p.take("EOF", "AND, OR or end of input")
    return AccessPolicy(root)


# -- printer ---------------------------------------------------------------

def _is_and(node: PolicyNode) -> bool:
    return isinstance(node, Threshold) and len(node.children) >= 2 and node.k == len(node.children)


def _is_or(node: PolicyNode) -> bool:
    return isinstance(node, Threshold) and len(node.children) >= 2 and node.k == 1


def _fmt(node: PolicyNode) -> str:
    if isinstance(node, Leaf):
        return str(node.attribute)
    if _is_and(node):
        # nested ANDs need parens too, or reparsing would flatten them
        return " AND ".join(
            f"({_fmt(c)})" if _is_and(c) or _is_or(c) else _fmt(c) for c in node.children)
    if _is_or(node):
        return " OR ".join(f"({_fmt(c)})" if _is_or(c) else _fmt(c) for c in node.children)
    return f"THRESHOLD({node.k}; " + ", ".join(_fmt(c) for c in node.children) + ")"


def print_policy(policy: AccessPolicy | PolicyNode) -> str:
    root = policy.root if isinstance(policy, AccessPolicy) else policy
    return _fmt(root)


# -- evaluation ------------------------------------------------------------

def _eval(node: PolicyNode, attrs: frozenset) -> bool:
    if isinstance(node, Leaf):
        return node.attribute in attrs
    hits = 0
    for child in node.children:
        if _eval(child, attrs):
            hits += 1
            if hits >= node.k:
                return True
    return False


def satisfies(policy: AccessPolicy | PolicyNode, attrs: Iterable[str]) -> bool:
    root = policy.root if isinstance(policy, AccessPolicy) else policy
    return _eval(root, frozenset(attrs))
