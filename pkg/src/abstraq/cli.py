"""Command-line entry point.

Verdicts go to standard output as JSON, prose goes to standard error.
Exit codes: 0 pass, 1 check failure, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _config
from .abstraction import (
    Abstraction,
    abstraction_error,
    check_inequality_preservation,
    construct_abstract_scm,
    recover_structure,
)
from .clustering import ALL_RULES, Clustering, build_cdag, build_pcdag, do_calculus_applicable, validate_clustering
from .errors import AbstraqError, HypothesisViolated, InputError, InvalidModel, UnknownVariable
from .graph import CausalGraph, d_separated, induced_graph, to_dot
from .harness import SUITES, GenParams, _jsonable, replay, rule_discrepancy, run_theorem_suite
from .scm import Scm, validate_scm
from .tau import check_tau_compatibility, derive_tau

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, default=_jsonable) + "\n")


def _say(text: str) -> None:
    sys.stderr.write(text + "\n")


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError("<file>", exc.strerror or str(exc), path) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"<json line {exc.lineno}>", exc.msg, path) from None


def _load(path: str, cls):
    doc = _read_json(path)
    try:
        return cls.from_dict(doc)
    except InputError as exc:
        raise exc.with_source(path) from None


def _load_scm(path: str, validated: bool = True) -> Scm:
    model = _load(path, Scm)
    if validated:
        bad = validate_scm(model)
        if bad:
            v = bad[0]
            raise InputError(v.code, f"{v.message} ({', '.join(v.names)})", path)
    return model


def _load_clustering(path: str, model: Scm) -> Clustering:
    c = _load(path, Clustering)
    bad = validate_clustering(induced_graph(model), c)
    if bad:
        v = bad[0]
        raise InputError(v.code, f"{v.message} ({', '.join(v.names)})", path)
    return c


def _names(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(n.strip() for n in text.split(",") if n.strip())


def _abstract_pair(args, base: Scm):
    """Abstract model and α from files when given, else built from the clustering."""
    if args.abstract or args.abstraction:
        if not (args.abstract and args.abstraction):
            raise _Usage("--abstract and --abstraction must be given together")
        abstract = _load_scm(args.abstract)
        a = _load(args.abstraction, Abstraction)
        return abstract, a
    if not args.clustering:
        raise _Usage("give --clustering, or --abstract with --abstraction")
    return construct_abstract_scm(base, _load_clustering(args.clustering, base))


def _write_dot(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
        _say(f"wrote {path}")


def _rules(text: str | None) -> tuple[str, ...]:
    rules = _names(text) if text else ALL_RULES
    unknown = [r for r in rules if r not in ALL_RULES]
    if unknown:
        raise _Usage(f"unknown rules {unknown}; choose from {list(ALL_RULES)}")
    return rules


# -- commands --------------------------------------------------------------------


def cmd_validate(args) -> int:
    model = _load_scm(args.scm, validated=False)
    violations = [v.__dict__ | {"names": list(v.names)} for v in validate_scm(model)]
    doc = {"valid": not violations, "violations": violations}
    if not violations and args.clustering:
        c = _load(args.clustering, Clustering)
        cv = [v.__dict__ | {"names": list(v.names)} for v in validate_clustering(induced_graph(model), c)]
        doc["clustering_violations"] = cv
        doc["valid"] = not cv
    _emit(doc)
    _say("valid" if doc["valid"] else "invalid")
    return EXIT_PASS if doc["valid"] else EXIT_FAIL


def cmd_graph(args) -> int:
    g = induced_graph(_load_scm(args.scm))
    _write_dot(args.dot, to_dot(g))
    _emit(g.to_dict())
    return EXIT_PASS


def _cluster_graph(args, kind: str) -> int:
    model = _load_scm(args.scm)
    c = _load_clustering(args.clustering, model)
    g = induced_graph(model)
    cg = build_cdag(g, c) if kind == "cdag" else build_pcdag(g, c, _rules(args.rules))
    _write_dot(args.dot, to_dot(cg.graph, c.labels(), kind.upper()))
    _emit(cg.to_dict())
    return EXIT_PASS


def cmd_cdag(args) -> int:
    return _cluster_graph(args, "cdag")


def cmd_pcdag(args) -> int:
    return _cluster_graph(args, "pcdag")


def cmd_build_abstract(args) -> int:
    model = _load_scm(args.scm)
    abstract, a = construct_abstract_scm(model, _load_clustering(args.clustering, model))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "abstract.json").write_text(json.dumps(abstract.to_dict(), indent=2))
        (out / "abstraction.json").write_text(json.dumps(a.to_dict(), indent=2))
        _say(f"wrote {out / 'abstract.json'} and {out / 'abstraction.json'}")
    _emit({"abstract": abstract.to_dict(), "abstraction": a.to_dict()})
    return EXIT_PASS


def cmd_check(args) -> int:
    base = _load_scm(args.scm)
    abstract, a = _abstract_pair(args, base)
    tol = _config.tolerance()
    rep = abstraction_error(base, abstract, a, args.layer, args.metric)
    doc = rep.to_dict() | {"tolerance": tol, "consistent": rep.max_error <= tol}
    if args.inequality:
        doc["inequality"] = check_inequality_preservation(base, abstract, a, args.inequality, args.seed, tol).to_dict()
        doc["consistent"] = doc["consistent"] and doc["inequality"]["ok"]
    _emit(doc)
    _say(f"{rep.layer} max error {rep.max_error:.3g} ({'consistent' if doc['consistent'] else 'inconsistent'})")
    return EXIT_PASS if doc["consistent"] else EXIT_FAIL


def cmd_recover(args) -> int:
    base = _load_scm(args.scm)
    abstract, a = _abstract_pair(args, base)
    rec = recover_structure(base, abstract, a, diagnostic=args.diagnostic)
    doc = rec.to_dict()
    _emit(doc)
    ok = doc.get("matches_pcdag", True)
    _say("recovered graph matches the partial cluster DAG" if ok else "recovered graph differs from the partial cluster DAG")
    return EXIT_PASS if ok else EXIT_FAIL


def _graph_for(args) -> CausalGraph:
    if args.graph:
        return _load(args.graph, CausalGraph)
    if not args.scm:
        raise _Usage("give --graph, or --scm with an optional --clustering")
    model = _load_scm(args.scm)
    g = induced_graph(model)
    if args.clustering:
        return build_pcdag(g, _load_clustering(args.clustering, model)).graph
    return g


def cmd_dsep(args) -> int:
    g = _graph_for(args)
    X, Y, Z = _names(args.x), _names(args.y), _names(args.z)
    if not X or not Y:
        raise _Usage("--x and --y must name at least one vertex each")
    sep = d_separated(g, X, Y, Z)
    _emit({"X": list(X), "Y": list(Y), "Z": list(Z), "separated": sep})
    _say("separated" if sep else "not separated")
    return EXIT_PASS if sep else EXIT_FAIL


def cmd_docalc(args) -> int:
    X, Y, Z, W = _names(args.x), _names(args.y), _names(args.z), _names(args.w)
    rule = int(args.rule)
    if args.graph:
        g = _load(args.graph, CausalGraph)
        model = None
    else:
        if not args.scm:
            raise _Usage("give --graph, or --scm with an optional --clustering")
        base = _load_scm(args.scm)
        if args.clustering:
            c = _load_clustering(args.clustering, base)
            model, _ = construct_abstract_scm(base, c)
            g = build_pcdag(induced_graph(base), c).graph
        else:
            model, g = base, induced_graph(base)
    applicable = do_calculus_applicable(g, rule, X, Y, Z, W)
    doc = {"rule": rule, "X": list(X), "Y": list(Y), "Z": list(Z), "W": list(W), "applicable": applicable}
    ok = applicable
    if applicable and model is not None:
        gap = rule_discrepancy(model, rule, X, Y, Z, W)
        doc["discrepancy"] = gap
        doc["holds"] = gap <= _config.tolerance()
        ok = doc["holds"]
    _emit(doc)
    _say(f"rule {rule} " + ("applies" if applicable else "does not apply"))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_tau_check(args) -> int:
    base = _load_scm(args.scm)
    abstract, a = _abstract_pair(args, base)
    t = derive_tau(a, base, abstract)
    try:
        rep = check_tau_compatibility(base, abstract, t, max_blocks=args.max_blocks)
    except HypothesisViolated as exc:
        _emit({"compatible": None, "hypothesis_violated": True, "missing_settings": exc.missing})
        _say(str(exc))
        return EXIT_FAIL
    _emit(rep.to_dict())
    _say("compatible" if rep.compatible else "incompatible")
    return EXIT_PASS if rep.compatible else EXIT_FAIL


def cmd_fuzz(args) -> int:
    try:
        p = GenParams(
            n_endo=args.n_endo,
            n_exo=args.n_exo,
            max_domain=args.max_domain,
            edge_prob=args.edge_prob,
            confound_prob=args.confound_prob,
            seed=args.seed,
            min_endo=args.min_endo,
        )
    except ValueError as exc:
        raise _Usage(str(exc)) from None
    which = _names(args.suites) or SUITES
    unknown = [w for w in which if w not in SUITES]
    if unknown:
        raise _Usage(f"unknown suites {unknown}; choose from {list(SUITES)}")
    rep = run_theorem_suite(
        p, args.n, which, args.remainder_prob, _rules(args.rules), args.inequality_trials, args.bundle_dir
    )
    _emit(rep.to_dict())
    failed = sum(c["failed"] for c in rep.counts.values())
    _say(f"{args.n} fixtures, {failed} failing checks")
    return EXIT_PASS if rep.ok else EXIT_FAIL


def cmd_replay(args) -> int:
    bundle = Path(args.bundle)
    for name in ("scm.json", "clustering.json", "check.json"):
        if not (bundle / name).is_file():
            raise InputError("<file>", "missing from bundle", str(bundle / name))
    res = replay(bundle)
    _emit({"ok": res.ok, "detail": res.detail})
    _say("check passes" if res.ok else "check fails")
    return EXIT_PASS if res.ok else EXIT_FAIL


# -- parser ------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="abstraq", description="Causal abstraction checks for finite structural causal models.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p, clustering=True, required=True):
        p.add_argument("--scm", required=required, help="SCM JSON document")
        if clustering:
            p.add_argument("--clustering", help="clustering JSON document")

    def pair_args(p):
        model_args(p)
        p.add_argument("--abstract", help="abstract SCM JSON (default: built from the clustering)")
        p.add_argument("--abstraction", help="abstraction JSON matching --abstract")

    p = sub.add_parser("validate", help="report every violated model invariant")
    model_args(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("graph", help="induced causal graph of an SCM")
    model_args(p, clustering=False)
    p.add_argument("--dot", help="also write Graphviz output here")
    p.set_defaults(fn=cmd_graph)

    for name, fn in (("cdag", cmd_cdag), ("pcdag", cmd_pcdag)):
        p = sub.add_parser(name, help=f"build the {'cluster' if name == 'cdag' else 'partial cluster'} DAG")
        p.add_argument("--scm", required=True)
        p.add_argument("--clustering", required=True)
        p.add_argument("--dot", help="also write Graphviz output here")
        if name == "pcdag":
            p.add_argument("--rules", help="comma-separated subset of 1,2A,2B")
        p.set_defaults(fn=fn, rules=None)

    p = sub.add_parser("build-abstract", help="construct the abstract SCM for a clustering")
    p.add_argument("--scm", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--out", help="directory for abstract.json and abstraction.json")
    p.set_defaults(fn=cmd_build_abstract)

    p = sub.add_parser("check", help="abstraction error of an abstraction")
    pair_args(p)
    p.add_argument("--layer", default="l2", choices=["l1", "l2", "L1", "L2"])
    p.add_argument("--metric", default="tv", choices=["tv", "maxabs"])
    p.add_argument("--inequality", type=int, default=0, metavar="TRIALS", help="also run inequality trials")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("recover", help="recover the abstract graph from interventional distributions")
    pair_args(p)
    p.add_argument("--diagnostic", action="store_true", help="allow surjective maps and report omitted edges")
    p.set_defaults(fn=cmd_recover)

    p = sub.add_parser("dsep", help="d-separation query")
    p.add_argument("--graph", help="graph JSON (vertices, directed, bidirected)")
    model_args(p, required=False)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--z", default="")
    p.set_defaults(fn=cmd_dsep)

    p = sub.add_parser("docalc", help="do-calculus rule applicability and equality")
    p.add_argument("--graph", help="graph JSON; applicability only")
    model_args(p, required=False)
    p.add_argument("--rule", required=True, choices=["1", "2", "3"])
    for flag in ("--x", "--y", "--z", "--w"):
        p.add_argument(flag, default="")
    p.set_defaults(fn=cmd_docalc)

    p = sub.add_parser("tau-check", help="pointwise compatibility of the derived tau map")
    pair_args(p)
    p.add_argument("--max-blocks", type=int, default=2)
    p.set_defaults(fn=cmd_tau_check)

    d = GenParams()
    p = sub.add_parser("fuzz", help="run the theorem suites on random fixtures")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--n-endo", type=int, default=d.n_endo)
    p.add_argument("--min-endo", type=int, default=None)
    p.add_argument("--n-exo", type=int, default=d.n_exo)
    p.add_argument("--max-domain", type=int, default=d.max_domain)
    p.add_argument("--edge-prob", type=float, default=d.edge_prob)
    p.add_argument("--confound-prob", type=float, default=d.confound_prob)
    p.add_argument("--remainder-prob", type=float, default=0.3)
    p.add_argument("--suites", help="comma-separated subset of " + ",".join(SUITES))
    p.add_argument("--rules", help="comma-separated subset of 1,2A,2B")
    p.add_argument("--inequality-trials", type=int, default=20)
    p.add_argument("--bundle-dir", help="write a bundle per counterexample here")
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("replay", help="re-run the check recorded in a counterexample bundle")
    p.add_argument("bundle")
    p.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        return args.fn(args)
    except _Usage as exc:
        _say(f"usage error: {exc}")
        return EXIT_INPUT
    except InputError as exc:
        _say(f"input error: {exc}")
        return EXIT_INPUT
    except (InvalidModel, UnknownVariable) as exc:
        _say(f"input error: {exc}")
        return EXIT_INPUT
    except AbstraqError as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
