"""Hand-built reference models used by the tests, the CLI and the fixture files."""

from __future__ import annotations

from itertools import product

import numpy as np

from .abstraction import Abstraction
from .clustering import Clustering
from .scm import Mechanism, Scm, Variable

BIN = ("0", "1")


def _table(fn, *cards):
    return np.array([fn(*args) for args in product(*(range(k) for k in cards))], dtype=np.int64)


def lung() -> Scm:
    """Two exposures feeding a mediator that feeds two outcomes; all binary.

    X1 -> Z <- X2, Z -> Y1, Z -> Y2, each variable with its own noise.
    """
    endo = [Variable(n, BIN) for n in ("X1", "X2", "Z", "Y1", "Y2")]
    exo = [Variable("U_" + n, BIN, "exo") for n in ("X1", "X2", "Z", "Y1", "Y2")]
    mechs = [
        Mechanism("X1", (), ("U_X1",), [0, 1]),
        Mechanism("X2", (), ("U_X2",), [0, 1]),
        Mechanism("Z", ("X1", "X2"), ("U_Z",), _table(lambda a, b, u: a ^ b ^ u, 2, 2, 2)),
        Mechanism("Y1", ("Z",), ("U_Y1",), _table(lambda z, u: z ^ u, 2, 2)),
        Mechanism("Y2", ("Z",), ("U_Y2",), _table(lambda z, u: z ^ u, 2, 2)),
    ]
    dist = {
        "U_X1": [0.6, 0.4],
        "U_X2": [0.3, 0.7],
        "U_Z": [0.8, 0.2],
        "U_Y1": [0.75, 0.25],
        "U_Y2": [0.35, 0.65],
    }
    return Scm(endo, exo, mechs, dist)


# The four total clusterings that keep X1, X2, Y1 and Y2 apart.
LUNG_CDAG_CLUSTERINGS = {
    "b": Clustering.from_mapping({"C_X1Z": ["X1", "Z"], "X2": ["X2"], "Y1": ["Y1"], "Y2": ["Y2"]}),
    "c": Clustering.from_mapping({"X1": ["X1"], "C_X2Z": ["X2", "Z"], "Y1": ["Y1"], "Y2": ["Y2"]}),
    "d": Clustering.from_mapping({"X1": ["X1"], "X2": ["X2"], "C_Y1Z": ["Y1", "Z"], "Y2": ["Y2"]}),
    "e": Clustering.from_mapping({"X1": ["X1"], "X2": ["X2"], "Y1": ["Y1"], "C_Y2Z": ["Y2", "Z"]}),
}

LUNG_CDAG_EDGES = {
    "b": {("X2", "C_X1Z"), ("C_X1Z", "Y1"), ("C_X1Z", "Y2")},
    "c": {("X1", "C_X2Z"), ("C_X2Z", "Y1"), ("C_X2Z", "Y2")},
    "d": {("X1", "C_Y1Z"), ("X2", "C_Y1Z"), ("C_Y1Z", "Y2")},
    "e": {("X1", "C_Y2Z"), ("X2", "C_Y2Z"), ("C_Y2Z", "Y1")},
}


def lung_partial_clustering() -> Clustering:
    """Singleton clusters with the mediator Z dropped into the remainder."""
    return Clustering.from_mapping(
        {"C_X1": ["X1"], "C_X2": ["X2"], "C_Y1": ["Y1"], "C_Y2": ["Y2"]}, remainder=["Z"]
    )


def confounded_chain() -> Scm:
    """A -> B with a shared noise term C acting on both."""
    endo = [Variable("A", BIN), Variable("B", BIN)]
    exo = [Variable("U_C", BIN, "exo"), Variable("U_A", BIN, "exo"), Variable("U_B", BIN, "exo")]
    mechs = [
        Mechanism("A", (), ("U_C", "U_A"), _table(lambda c, u: c ^ u, 2, 2)),
        Mechanism("B", ("A",), ("U_C", "U_B"), _table(lambda a, c, u: (a & u) ^ c, 2, 2, 2)),
    ]
    dist = {"U_C": [0.3, 0.7], "U_A": [0.85, 0.15], "U_B": [0.4, 0.6]}
    return Scm(endo, exo, mechs, dist)


def chain_with_mediator() -> Scm:
    """A -> Q -> B over ternary A, binary Q and ternary B."""
    tern = ("0", "1", "2")
    endo = [Variable("A", tern), Variable("Q", BIN), Variable("B", tern)]
    exo = [Variable("U_A", tern, "exo"), Variable("U_Q", BIN, "exo"), Variable("U_B", tern, "exo")]
    mechs = [
        Mechanism("A", (), ("U_A",), [0, 1, 2]),
        Mechanism("Q", ("A",), ("U_Q",), _table(lambda a, u: int(a == 2) ^ u, 3, 2)),
        Mechanism("B", ("Q",), ("U_B",), _table(lambda q, u: (2 * q + u) % 3, 2, 3)),
    ]
    dist = {"U_A": [0.2, 0.5, 0.3], "U_Q": [0.9, 0.1], "U_B": [0.6, 0.25, 0.15]}
    return Scm(endo, exo, mechs, dist)


def parity_counterexample() -> tuple[Scm, Scm, Abstraction]:
    """Surjective abstraction whose parity map hides Z's effect on Y.

    Base: X in {1, 2}, Z in {1, 3} (odd integers cut to two values), Y = X * Z.
    Abstract: X', Z' copy X and Z; Y' = X'Z' mod 2, and alpha for Y' is the
    parity of Y. Every odd value of Z leaves the parity unchanged, so Z' has
    no detectable effect on Y'.
    """
    xs, zs = (1, 2), (1, 3)
    ys = sorted({x * z for x in xs for z in zs})  # [1, 2, 3, 6]
    endo = [
        Variable("X", tuple(map(str, xs))),
        Variable("Z", tuple(map(str, zs))),
        Variable("Y", tuple(map(str, ys))),
    ]
    exo = [Variable("U_X", ("0", "1"), "exo"), Variable("U_Z", ("0", "1"), "exo")]
    base = Scm(
        endo,
        exo,
        [
            Mechanism("X", (), ("U_X",), [0, 1]),
            Mechanism("Z", (), ("U_Z",), [0, 1]),
            Mechanism("Y", ("X", "Z"), (), _table(lambda i, j: ys.index(xs[i] * zs[j]), 2, 2)),
        ],
        {"U_X": [0.5, 0.5], "U_Z": [0.5, 0.5]},
    )
    abstract = Scm(
        [
            Variable("X'", tuple(map(str, xs))),
            Variable("Z'", tuple(map(str, zs))),
            Variable("Y'", ("0", "1")),
        ],
        exo,
        [
            Mechanism("X'", (), ("U_X",), [0, 1]),
            Mechanism("Z'", (), ("U_Z",), [0, 1]),
            Mechanism("Y'", ("X'", "Z'"), (), _table(lambda i, j: (xs[i] * zs[j]) % 2, 2, 2)),
        ],
        {"U_X": [0.5, 0.5], "U_Z": [0.5, 0.5]},
    )
    alpha = Abstraction(
        ("X", "Z", "Y"),
        {"X": "X'", "Z": "Z'", "Y": "Y'"},
        {"X'": [0, 1], "Z'": [0, 1], "Y'": [y % 2 for y in ys]},
        {"X'": 2, "Z'": 2, "Y'": 2},
    )
    return base, abstract, alpha


def example_documents() -> dict[str, dict]:
    """JSON documents shipped in ``fixtures/``, keyed by file name."""
    from .clustering import build_pcdag
    from .graph import induced_graph

    docs = {"lung.json": lung().to_dict(), "lung_partial.json": lung_partial_clustering().to_dict()}
    for key, c in LUNG_CDAG_CLUSTERINGS.items():
        docs[f"lung_cdag_{key}.json"] = c.to_dict()
    docs["lung_pcdag.json"] = build_pcdag(induced_graph(lung()), lung_partial_clustering()).to_dict()
    base, abstract, alpha = parity_counterexample()
    docs["parity_base.json"] = base.to_dict()
    docs["parity_abstract.json"] = abstract.to_dict()
    docs["parity_alpha.json"] = alpha.to_dict()
    return docs


def write_example_files(directory) -> list[str]:
    """Write :func:`example_documents` into ``directory``; returns the paths written."""
    import json
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, doc in example_documents().items():
        path = out / name
        path.write_text(json.dumps(doc, indent=2) + "\n")
        written.append(str(path))
    return written


if __name__ == "__main__":
    import sys

    for p in write_example_files(sys.argv[1] if len(sys.argv) > 1 else "fixtures"):
        print(p)
