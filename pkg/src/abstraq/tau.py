"""Constructive τ maps derived from α-abstractions, with pointwise compatibility checks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .abstraction import Abstraction
from .errors import HypothesisViolated
from .scm import Scm, endogenous_outcomes


@dataclass(frozen=True, eq=False)
class TauMap:
    """τ assembled blockwise from the alpha maps; non-relevant variables are dropped."""

    abstraction: Abstraction
    base: Scm
    abstract: Scm | None = None

    @property
    def partition(self) -> list[tuple[str, ...]]:
        """Blocks Z_1..Z_n in target order, then the dropped block."""
        rel = set(self.abstraction.relevant)
        dropped = tuple(n for n in self.base.endo_names if n not in rel)
        return [self.abstraction.members[t] for t in self.abstraction.targets] + [dropped]

    @property
    def order(self) -> tuple[str, ...]:
        return self.abstract.endo_names if self.abstract is not None else self.abstraction.targets

    @cached_property
    def table(self) -> np.ndarray:
        """Abstract joint index for every base joint index."""
        return self.abstraction.value_index(self.base, self.order)

    @cached_property
    def image_size(self) -> int:
        return int(np.unique(self.table).size)

    @cached_property
    def codomain_size(self) -> int:
        return int(np.prod([self.abstraction.domain_sizes[t] for t in self.order], dtype=np.int64))

    @property
    def surjective(self) -> bool:
        return self.image_size == self.codomain_size

    def __call__(self, v_flat):
        return self.table[v_flat]

    def fibre_sizes(self) -> np.ndarray:
        return np.bincount(self.table, minlength=self.codomain_size)


def derive_tau(a: Abstraction, base: Scm, abstract: Scm | None = None) -> TauMap:
    a.check(base, abstract)
    return TauMap(a, base, abstract)


@dataclass(frozen=True, eq=False)
class ExoClassPartition:
    """Exogenous assignments grouped by the endogenous setting they produce."""

    outcomes: np.ndarray  # endogenous joint index per exogenous assignment
    settings: np.ndarray  # attainable endogenous joint indices, ascending
    class_of: np.ndarray  # class id (index into settings) per exogenous assignment

    @property
    def count(self) -> int:
        return int(self.settings.size)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == k)


def minimal_exogenous_classes(model: Scm) -> ExoClassPartition:
    outcomes = endogenous_outcomes(model)
    settings, inverse = np.unique(outcomes, return_inverse=True)
    return ExoClassPartition(outcomes, settings, inverse.ravel())


def _decode(model: Scm, flat: int, names: Sequence[str], cards: Sequence[int]) -> dict[str, int]:
    if not names:
        return {}
    return {n: int(v) for n, v in zip(names, np.unravel_index(int(flat), cards))}


@dataclass
class TauReport:
    compatible: bool
    checked_pairs: int
    interventions: int
    base_classes: int
    abstract_classes: int
    tau_surjective: bool
    tau_u_surjective: bool
    counterexample: dict | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def block_interventions(a: Abstraction, base: Scm, max_blocks: int = 2):
    """Null intervention, then hard interventions on every set of up to ``max_blocks`` whole blocks."""
    yield {}, {}
    for k in range(1, max_blocks + 1):
        for blocks in combinations(a.targets, k):
            sizes = [a.alpha[t].size for t in blocks]
            for vals in product(*(range(s) for s in sizes)):
                do, omega = {}, {}
                for t, b in zip(blocks, vals):
                    ms = a.members[t]
                    for m, x in zip(ms, np.unravel_index(b, [base.card(m) for m in ms])):
                        do[m] = int(x)
                    omega[t] = int(a.alpha[t][b])
                yield do, omega


def check_tau_compatibility(
    base: Scm,
    abstract: Scm,
    t: TauMap,
    interventions: Iterable[tuple[Mapping[str, int], Mapping[str, int]]] | None = None,
    max_blocks: int = 2,
) -> TauReport:
    """Check τ(M(u, do)) = M'(τ_U(u), ω(do)) for every u and every listed intervention.

    ``interventions`` yields (base do, abstract do) pairs; by default every
    hard intervention on one or two whole pre-image blocks is used, with ω
    mapping block values through alpha.
    """
    a = t.abstraction
    a.check(base, abstract)
    tau = TauMap(a, base, abstract) if t.abstract is not abstract else t
    base_cls = minimal_exogenous_classes(base)
    n_settings = int(np.prod([v.card for v in base.endogenous], dtype=np.int64))
    if base_cls.count != n_settings:
        missing = np.setdiff1d(np.arange(n_settings), base_cls.settings)
        raise HypothesisViolated(missing.tolist())
    abs_cls = minimal_exogenous_classes(abstract)

    # τ_U: u ↦ an abstract exogenous assignment in the minimal class of τ(M(u)).
    target_v = tau(base_cls.outcomes)
    pos = np.searchsorted(abs_cls.settings, target_v)
    pos = np.minimum(pos, abs_cls.settings.size - 1)
    attainable = abs_cls.settings[pos] == target_v
    representative = np.full(abs_cls.count, -1, dtype=np.int64)
    # Smallest member of each abstract class.
    order = np.argsort(abs_cls.class_of, kind="stable")
    firsts = np.searchsorted(abs_cls.class_of[order], np.arange(abs_cls.count))
    representative[:] = order[firsts]
    n_u = base_cls.outcomes.size
    shared = base.exogenous == abstract.exogenous
    tau_u = representative[pos]
    if shared:
        own = abs_cls.outcomes == target_v
        tau_u = np.where(own, np.arange(n_u), tau_u)
    tau_u_surjective = bool(np.unique(pos[attainable]).size == abs_cls.count)

    base_exo = base.exo_names
    base_exo_cards = [v.card for v in base.exogenous]
    abs_endo_cards = [v.card for v in abstract.endogenous]
    counterexample = None
    if not attainable.all():
        u = int(np.flatnonzero(~attainable)[0])
        counterexample = {
            "u": _decode(base, u, base_exo, base_exo_cards),
            "do": {},
            "omega": {},
            "expected": _decode(abstract, int(target_v[u]), abstract.endo_names, abs_endo_cards),
            "got": None,
            "reason": "tau of the base outcome is not attainable in the abstract model",
        }
    checked = 0
    n_int = 0
    pairs = interventions if interventions is not None else block_interventions(a, base, max_blocks)
    if counterexample is None:
        for do, omega in pairs:
            n_int += 1
            lhs = tau(endogenous_outcomes(base, do))
            rhs = endogenous_outcomes(abstract, omega)[tau_u]
            checked += n_u
            bad = np.flatnonzero(lhs != rhs)
            if bad.size:
                u = int(bad[0])
                counterexample = {
                    "u": _decode(base, u, base_exo, base_exo_cards),
                    "do": dict(do),
                    "omega": dict(omega),
                    "expected": _decode(abstract, int(lhs[u]), abstract.endo_names, abs_endo_cards),
                    "got": _decode(abstract, int(rhs[u]), abstract.endo_names, abs_endo_cards),
                    "reason": "tau(M(u, do)) differs from M'(tau_U(u), omega(do))",
                }
                break
    return TauReport(
        compatible=counterexample is None,
        checked_pairs=checked,
        interventions=n_int,
        base_classes=base_cls.count,
        abstract_classes=abs_cls.count,
        tau_surjective=tau.surjective,
        tau_u_surjective=tau_u_surjective,
        counterexample=counterexample,
    )
