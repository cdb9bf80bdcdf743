"""
Dolev-Yao deduction over Terms.

A KnowledgeSet stores what analysis reaches: pairs split, ciphertexts
opened with derivable keys, signatures opened and increments inverted,
applied until nothing new appears. Composition (pairing, encryption,
signing, increment) is never materialised; `derivable` checks it on demand
up to COMPOSITION_DEPTH_CAP constructors deep.
"""

from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from shared.constants import COMPOSITION_DEPTH_CAP
from shared.knowledge.terms import (
    Atom,
    Inc,
    Pair,
    PkEnc,
    Sig,
    SymEnc,
    Term,
    children,
    private_of,
)


class Rule(Enum):
    SPLIT = "split"
    SDEC = "sdec"
    PDEC = "pdec"
    SIG_OPEN = "sig_open"
    INC_INVERT = "inc_invert"
    PAIR = "pair"
    SENC = "senc"
    PENC = "penc"
    SIGN = "sign"
    INC = "inc"


class DerivationStep:
    def __init__(self, rule: Rule, premises: Tuple[Term, ...], conclusion: Term):
        self.rule = rule
        self.premises = premises
        self.conclusion = conclusion

    def __str__(self) -> str:
        premises = ", ".join(str(p) for p in self.premises)
        return f"{self.rule.value}({premises}) => {self.conclusion}"

    def __repr__(self) -> str:
        return f"DerivationStep({self})"


class KnowledgeSet:
    def __init__(
        self,
        terms: Set[Term],
        steps: Dict[Term, DerivationStep],
        depth_cap: int = COMPOSITION_DEPTH_CAP,
    ):
        self.terms = terms
        self.steps = steps
        self.depth_cap = depth_cap

    def derivable(self, term: Term) -> bool:
        return _derivable(term, self.terms, self.depth_cap)

    def __contains__(self, term: Term) -> bool:
        return self.derivable(term)

    def __len__(self) -> int:
        return len(self.terms)


def _derivable(term: Term, known: Set[Term], budget: int) -> bool:
    if term in known:
        return True
    if isinstance(term, Atom) or budget <= 0:
        return False
    # Sig needs the private atom itself, which children() yields first
    return all(_derivable(kid, known, budget - 1) for kid in children(term))


def _analyze(
    term: Term, known: Set[Term], depth_cap: int
) -> List[Tuple[Term, DerivationStep]]:
    if isinstance(term, Pair):
        return [
            (term.left, DerivationStep(Rule.SPLIT, (term,), term.left)),
            (term.right, DerivationStep(Rule.SPLIT, (term,), term.right)),
        ]
    if isinstance(term, SymEnc) and _derivable(term.key, known, depth_cap):
        return [(term.body, DerivationStep(Rule.SDEC, (term, term.key), term.body))]
    if isinstance(term, PkEnc):
        priv = private_of(term.pub)
        if priv in known:
            return [(term.body, DerivationStep(Rule.PDEC, (term, priv), term.body))]
    if isinstance(term, Sig):
        return [(term.body, DerivationStep(Rule.SIG_OPEN, (term,), term.body))]
    if isinstance(term, Inc):
        return [(term.body, DerivationStep(Rule.INC_INVERT, (term,), term.body))]
    return []


def close(
    initial: Iterable[Term], depth_cap: int = COMPOSITION_DEPTH_CAP
) -> KnowledgeSet:
    known: Set[Term] = set(initial)
    steps: Dict[Term, DerivationStep] = {}
    changed = True
    while changed:
        changed = False
        for term in sorted(known, key=str):
            for conclusion, step in _analyze(term, known, depth_cap):
                if conclusion not in known:
                    known.add(conclusion)
                    steps[conclusion] = step
                    changed = True
    return KnowledgeSet(known, steps, depth_cap)


def _composition_step(term: Term) -> DerivationStep:
    rule = {
        Pair: Rule.PAIR,
        SymEnc: Rule.SENC,
        PkEnc: Rule.PENC,
        Sig: Rule.SIGN,
        Inc: Rule.INC,
    }[type(term)]
    return DerivationStep(rule, children(term), term)


def derivation_path(
    knowledge: KnowledgeSet, target: Term, initial: Iterable[Term]
) -> Optional[List[DerivationStep]]:
    """
    Steps that rebuild target from initial, in application order, or None
    when target is not derivable. Each conclusion is derived once.
    """
    if not knowledge.derivable(target):
        return None
    given = set(initial)
    path: List[DerivationStep] = []
    done: Set[Term] = set()

    def visit(term: Term):
        if term in given or term in done:
            return
        step = knowledge.steps.get(term)
        if step is None:
            step = _composition_step(term)
        for premise in step.premises:
            visit(premise)
        done.add(term)
        path.append(step)

    visit(target)
    return path


def _step_is_sound(step: DerivationStep) -> bool:
    premises, conclusion = step.premises, step.conclusion
    if step.rule == Rule.SPLIT:
        (whole,) = premises
        return isinstance(whole, Pair) and conclusion in (whole.left, whole.right)
    if step.rule == Rule.SDEC:
        ct, key = premises
        return isinstance(ct, SymEnc) and ct.key == key and ct.body == conclusion
    if step.rule == Rule.PDEC:
        ct, priv = premises
        return (
            isinstance(ct, PkEnc)
            and private_of(ct.pub) == priv
            and ct.body == conclusion
        )
    if step.rule == Rule.SIG_OPEN:
        (signed,) = premises
        return isinstance(signed, Sig) and signed.body == conclusion
    if step.rule == Rule.INC_INVERT:
        (counted,) = premises
        return isinstance(counted, Inc) and counted.body == conclusion
    if isinstance(conclusion, Atom):
        return False
    return (
        children(conclusion) == premises
        and _composition_step(conclusion).rule == step.rule
    )


def replay_derivation(
    initial: Iterable[Term], path: List[DerivationStep], target: Term
) -> bool:
    """Re-applies path from scratch, checking every step against its rule"""
    held: Set[Term] = set(initial)
    for step in path:
        if not all(premise in held for premise in step.premises):
            return False
        if not _step_is_sound(step):
            return False
        held.add(step.conclusion)
    return target in held


class SecrecyResult:
    def __init__(
        self, secret: Atom, derivable: bool, path: Optional[List[DerivationStep]]
    ):
        self.secret = secret
        self.derivable = derivable
        self.path = path

    def to_dict(self) -> Dict[str, object]:
        return {
            "secret": self.secret.label,
            "derivable": self.derivable,
            "path": [str(step) for step in self.path] if self.path else [],
        }


def check_secrecy(
    transcript: Iterable[Term], initial: Iterable[Term], secrets: List[Atom]
) -> List[SecrecyResult]:
    start = set(initial) | set(transcript)
    knowledge = close(start)
    results = []
    for secret in secrets:
        path = derivation_path(knowledge, secret, start)
        results.append(SecrecyResult(secret, path is not None, path))
    return results
