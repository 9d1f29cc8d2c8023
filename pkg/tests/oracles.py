"""Independent reference implementations used as test oracles.

Nothing here imports the parser, printer or evaluator under test: formulas
are generated as nested tuples, rendered to text with their own printer,
and evaluated by plain boolean recursion.
"""

import itertools
import random

# ("attr", name) | ("and", [f...]) | ("or", [f...]) | ("k", k, [f...])


def random_formula(rng: random.Random, universe, depth: int = 3):
    if depth == 0 or rng.random() < 0.3:
        return ("attr", rng.choice(universe))
    n = rng.randint(2, 4)
    kids = [random_formula(rng, universe, depth - 1) for _ in range(n)]
    op = rng.choice(["and", "or", "k"])
    if op == "k":
        return ("k", rng.randint(1, n), kids)
    return (op, kids)


def render(f) -> str:
    """Fully parenthesized rendering; never relies on precedence."""
    if f[0] == "attr":
        return f[1]
    if f[0] == "k":
        return f"THRESHOLD({f[1]}; " + ", ".join(render(c) for c in f[2]) + ")"
    sep = " AND " if f[0] == "and" else " OR "
    return "(" + sep.join(render(c) for c in f[1]) + ")"


def evaluate(f, attrs) -> bool:
    if f[0] == "attr":
        return f[1] in attrs
    if f[0] == "and":
        return all(evaluate(c, attrs) for c in f[1])
    if f[0] == "or":
        return any(evaluate(c, attrs) for c in f[1])
    return sum(evaluate(c, attrs) for c in f[2]) >= f[1]


def subsets(universe):
    for r in range(len(universe) + 1):
        for combo in itertools.combinations(universe, r):
            yield frozenset(combo)


def truth_table(f, universe) -> dict:
    return {s: evaluate(f, s) for s in subsets(universe)}


def leaf_count(f) -> int:
    if f[0] == "attr":
        return 1
    kids = f[2] if f[0] == "k" else f[1]
    return sum(leaf_count(c) for c in kids)


# RFC 6238 Appendix B: (unix time, sha1, sha256, sha512) with 8-digit codes
RFC6238_SEEDS = {
    "sha1": b"12345678901234567890",
    "sha256": b"12345678901234567890123456789012",
    "sha512": b"1234567890123456789012345678901234567890123456789012345678901234",
}
RFC6238_TABLE = [
    (59, "94287082", "46119246", "90693936"),
    (1111111109, "07081804", "68084774", "25091201"),
    (1111111111, "14050471", "67062674", "99943326"),
    (1234567890, "89005924", "91819424", "93441116"),
    (2000000000, "69279037", "90698825", "38618901"),
    (20000000000, "65353130", "77737706", "47863826"),
]
