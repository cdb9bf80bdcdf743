"""
Symbolic message terms and their text form.

    atom              NONCE_S[SLAVE:s1], K_pub[EMS:ems], opaque[0a1b...]
    pair(a,b)         pairing
    senc(k,m)         symmetric encryption of m under k
    penc(pub,m)       public-key encryption of m under the K_pub atom pub
    sig(priv,m)       m signed with the K_pr atom priv
    inc(m,k)          m incremented k times
"""

from dataclasses import dataclass
from typing import Iterator, List, Set, Tuple, Union

PUBLIC_PREFIX = "K_pub["
PRIVATE_PREFIX = "K_pr["


@dataclass(frozen=True)
class Atom:
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Pair:
    left: "Term"
    right: "Term"

    def __str__(self) -> str:
        return f"pair({self.left},{self.right})"


@dataclass(frozen=True)
class SymEnc:
    key: "Term"
    body: "Term"

    def __str__(self) -> str:
        return f"senc({self.key},{self.body})"


@dataclass(frozen=True)
class PkEnc:
    pub: Atom
    body: "Term"

    def __str__(self) -> str:
        return f"penc({self.pub},{self.body})"


@dataclass(frozen=True)
class Sig:
    owner: Atom
    body: "Term"

    def __str__(self) -> str:
        return f"sig({self.owner},{self.body})"


@dataclass(frozen=True)
class Inc:
    body: "Term"
    k: int

    def __str__(self) -> str:
        return f"inc({self.body},{self.k})"


Term = Union[Atom, Pair, SymEnc, PkEnc, Sig, Inc]


def increment(body: Term, k: int) -> Term:
    """Inc with nested increments folded together"""
    if isinstance(body, Inc):
        return increment(body.body, body.k + k)
    if k == 0:
        return body
    return Inc(body, k)


def tuple_term(parts: List[Term]) -> Term:
    """(a, b, c) as pair(a, pair(b, c))"""
    if len(parts) == 1:
        return parts[0]
    return Pair(parts[0], tuple_term(parts[1:]))


def public_atom(owner_label: str) -> Atom:
    return Atom(f"{PUBLIC_PREFIX}{owner_label}]")


def private_atom(owner_label: str) -> Atom:
    return Atom(f"{PRIVATE_PREFIX}{owner_label}]")


def private_of(pub: Atom) -> Atom:
    if not pub.label.startswith(PUBLIC_PREFIX):
        raise ValueError(f"{pub} is not a public-key atom")
    return Atom(PRIVATE_PREFIX + pub.label[len(PUBLIC_PREFIX) :])


def labeled(prefix: str, owner_label: str) -> Atom:
    return Atom(f"{prefix}[{owner_label}]")


def atom_kind(atom: Atom) -> str:
    """NONCE_S for NONCE_S[SLAVE:s1]"""
    return atom.label.split("[", 1)[0]


def children(term: Term) -> Tuple[Term, ...]:
    if isinstance(term, Pair):
        return (term.left, term.right)
    if isinstance(term, SymEnc):
        return (term.key, term.body)
    if isinstance(term, PkEnc):
        return (term.pub, term.body)
    if isinstance(term, Sig):
        return (term.owner, term.body)
    if isinstance(term, Inc):
        return (term.body,)
    return ()


def depth(term: Term) -> int:
    kids = children(term)
    if not kids:
        return 0
    return 1 + max(depth(kid) for kid in kids)


def subterms(term: Term) -> Iterator[Term]:
    yield term
    for kid in children(term):
        yield from subterms(kid)


def atoms_of(terms: List[Term]) -> Set[Atom]:
    found: Set[Atom] = set()
    for term in terms:
        found.update(sub for sub in subterms(term) if isinstance(sub, Atom))
    return found


class _Parser:
    CONSTRUCTORS = ("pair", "senc", "penc", "sig", "inc")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str):
        raise ValueError(f"{message} at offset {self.pos} in '{self.text}'")

    def expect(self, char: str):
        if self.pos >= len(self.text) or self.text[self.pos] != char:
            self.fail(f"expected '{char}'")
        self.pos += 1

    def token(self) -> str:
        start = self.pos
        depth = 0
        while self.pos < len(self.text):
            char = self.text[self.pos]
            if char == "[":
                depth += 1
            elif char == "]":
                depth -= 1
            elif depth == 0 and char in "(),":
                break
            self.pos += 1
        if start == self.pos:
            self.fail("expected a term")
        return self.text[start : self.pos]

    def term(self) -> Term:
        name = self.token()
        if name not in self.CONSTRUCTORS or not self.text.startswith("(", self.pos):
            return Atom(name)

        self.expect("(")
        first = self.term()
        self.expect(",")
        if name == "inc":
            count = self.token()
            if not count.isdigit():
                self.fail(f"inc count must be a number, got '{count}'")
            self.expect(")")
            return increment(first, int(count))
        second = self.term()
        self.expect(")")

        if name == "pair":
            return Pair(first, second)
        if name == "senc":
            return SymEnc(first, second)
        if not isinstance(first, Atom):
            self.fail(f"{name} needs a key atom")
        assert isinstance(first, Atom)
        if name == "penc":
            return PkEnc(first, second)
        return Sig(first, second)


def parse_term(text: str) -> Term:
    parser = _Parser(text.strip())
    term = parser.term()
    if parser.pos != len(parser.text):
        parser.fail("trailing characters")
    return term
