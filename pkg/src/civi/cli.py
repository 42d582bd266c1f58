"""Command-line entry point: `civi <subcommand> [options] [files.civ ...]`.

Exit codes: 0 proved or holds, 2 genuine counterexample, 1 user error,
3 state-space ceiling exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import syntax as S
from .compose import compose_all
from .contracts import check_inductive, lower, model_check_fulfillment
from .errors import CiviError, RecheckFailed, SpecError, StateSpaceOverflow, UnboundName
from .loader import Registry, entry_files, instance_from_cli, load_files
from .model import ActionEvent, Component, parse_event
from .parser import ActionDef, ComponentDecl
from .printer import show, show_decl

EXIT_OK, EXIT_USER, EXIT_CEX, EXIT_CEILING = 0, 1, 2, 3
DEFAULT_SEED = 20240611
MAX_LISTED = 12

log = logging.getLogger("civi")


@dataclass
class RunConfig:
    files: list[str]
    instance: list[str] = field(default_factory=list)
    nat_bound: int | None = None
    ceiling: int | None = None
    workers: int = 1
    seed: int = DEFAULT_SEED
    json_path: str | None = None
    args: argparse.Namespace | None = None
    out: object = None  # stream for `--json -`


class Usage(CiviError):
    """Bad command-line usage."""


# helpers -------------------------------------------------------------------------------


def _registry(cfg: RunConfig) -> Registry:
    return load_files(cfg.files)


def _instance(cfg: RunConfig, reg: Registry):
    named = [s for s in cfg.instance if "=" not in s]
    bindings = [s for s in cfg.instance if "=" in s]
    if len(named) > 1:
        raise Usage("at most one named instance may be given")
    if named:
        base = reg.instance(named[0])
    else:
        try:
            base = reg.instance()
        except SpecError:
            base = None
    inst = instance_from_cli(bindings, cfg.nat_bound, base)
    if not inst.params and base is None and not bindings:
        raise Usage("no instance: declare one or pass --instance Param=a,b")
    return inst


def _contract(reg: Registry, name: str):
    if name not in reg.contracts:
        known = ", ".join(sorted(reg.contracts)) or "none"
        raise Usage(f"unknown contract {name!r} (known: {known})")
    return reg.contracts[name]


def _chain(reg: Registry, ref: str | None):
    if ref is None:
        return reg.chain()
    path = Path(ref)
    if path.is_file() and path.suffix != ".civ":
        return [_contract(reg, n) for n in read_chain_file(path.read_text())]
    name = ref[: -len(".chain")] if ref.endswith(".chain") else ref
    if name not in reg.chains:
        raise Usage(f"unknown chain {ref!r} (known: {', '.join(sorted(reg.chains)) or 'none'})")
    return reg.chain(name)


def read_chain_file(text: str) -> list[str]:
    """Contract names separated by commas or newlines, with an optional `chain NAME ==` head."""
    body = " ".join(line.split("#", 1)[0] for line in text.splitlines())
    if "==" in body:
        body = body.split("==", 1)[1]
    names = [n.strip() for n in body.replace("\n", ",").split(",")]
    names = [n for part in names for n in part.split()]
    if not names:
        raise Usage("chain file lists no contracts")
    return names


def read_trace(text: str) -> tuple[ActionEvent, ...]:
    """One `Action(arg, ...)` per line; blank lines and `#` comments are skipped."""
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, raw = parse_event(line)
        out.append(ActionEvent(name, tuple(int(a) if a.isdigit() else a for a in raw)))
    return tuple(out)


def component_decl(c: Component) -> ComponentDecl:
    """Declaration that prints as reparseable text for `c`."""
    return ComponentDecl(
        c.name,
        tuple(sorted(c.params)),
        tuple(c.vars),
        c.init,
        tuple(ActionDef(a.name, a.formals, a.body) for a in c.actions),
    )


def _emit_json(cfg: RunConfig, report: dict) -> None:
    if cfg.json_path:
        text = json.dumps(report, indent=2)
        if cfg.json_path == "-":
            print(text, file=cfg.out or sys.stdout)
        else:
            Path(cfg.json_path).write_text(text + "\n")


# subcommands ---------------------------------------------------------------------------


def _check_one(files, contract_name, inst, ceiling):
    reg = load_files(files)
    c = _contract(reg, contract_name)
    if c.invariant is None:
        res = model_check_fulfillment(c, inst, ceiling=ceiling)
        return c, None, res
    ob = lower(c)
    return c, ob, check_inductive(ob, inst, ceiling=ceiling)


def cmd_check(cfg: RunConfig) -> int:
    a = cfg.args
    reg = _registry(cfg)
    inst = _instance(cfg, reg)
    names = a.contract or []
    if not names:
        raise Usage("check needs --contract NAME")
    for n in names:
        _contract(reg, n)
    if cfg.workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(_check_one, cfg.files, n, inst, cfg.ceiling) for n in names]
            results = [f.result() for f in futs]
    else:
        results = [_check_one(cfg.files, n, inst, cfg.ceiling) for n in names]
    status = EXIT_OK
    reports = []
    for c, ob, res in results:
        if ob is None:
            # no invariant: fall back to exhaustive exploration
            print(f"{c.name}: {'holds' if res.holds else 'VIOLATED'} at {inst.describe()} ({res.states} reachable states)")
            if not res.holds:
                print(res.describe())
                status = EXIT_CEX
            reports.append({"contract": c.name, "method": "reachability", "holds": res.holds, "states": res.states})
            continue
        if res.proved:
            print(
                f"{c.name}: proved at {inst.describe()} "
                f"({res.states} states, {res.transitions} transitions checked)"
            )
        else:
            print(f"{c.name}: NOT inductive at {inst.describe()}")
            print(res.cti.describe(ob.system.var_sorts))
            status = EXIT_CEX
        r = {"contract": c.to_json(), "instance": inst.to_json(), "verdict": res.verdict,
             "statesChecked": res.states, "transitionsChecked": res.transitions}
        if res.cti is not None:
            r["cti"] = res.cti.to_json(ob.system.var_sorts)
        reports.append(r)
    _emit_json(cfg, {"tool": {"name": "civi", "version": __version__}, "results": reports})
    return status


def cmd_compose(cfg: RunConfig) -> int:
    a = cfg.args
    reg = _registry(cfg)
    if not a.components:
        raise Usage("compose needs at least one component name")
    from .loader import composite

    comps = composite(reg, a.components)
    c = compose_all(comps, name=a.name or "_".join(a.components))
    text = show_decl(component_decl(c)) + "\n"
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_infer(cfg: RunConfig) -> int:
    from .inference import houdini, load_pool

    a = cfg.args
    reg = _registry(cfg)
    inst = _instance(cfg, reg)
    if not a.contract:
        raise Usage("infer needs --contract NAME")
    c = _contract(reg, a.contract[0])
    pool = None
    if a.pool_file:
        from .inference import generate_pool

        extra = load_pool(Path(a.pool_file).read_text(), reg)
        pool = generate_pool(lower(c), inst, a.budget) + extra
    log_fh = open(a.log_ctis, "w") if a.log_ctis else None
    ob = lower(c)

    def on_cti(cti, killed):
        if log_fh is not None:
            rec = cti.to_json(ob.system.var_sorts)
            rec["dropped"] = [show(k) for k in killed]
            log_fh.write(json.dumps(rec) + "\n")

    try:
        res = houdini(ob, inst, pool=pool, budget=a.budget, ceiling=cfg.ceiling, on_cti=on_cti)
    finally:
        if log_fh is not None:
            log_fh.close()
    print(f"{c.name}: {res.summary()}")
    if res.success:
        shown = res.kept if a.verbose or len(res.kept) <= MAX_LISTED else res.kept[:MAX_LISTED]
        for k in shown:
            print(f"  /\\ {show(k)}")
        if len(shown) < len(res.kept):
            print(f"  ... {len(res.kept) - len(shown)} more (use -v or --json)")
    else:
        print(f"  reason: {res.reason}")
        if res.ctis:
            print(res.ctis[-1].describe(ob.system.var_sorts))
    _emit_json(cfg, {
        "contract": c.name,
        "instance": inst.to_json(),
        "success": res.success,
        "invariant": [show(k) for k in res.kept],
        "poolSize": res.pool_size,
        "iterations": res.iterations,
        "reason": res.reason,
    })
    return EXIT_OK if res.success else EXIT_CEX


def cmd_trace(cfg: RunConfig) -> int:
    from .sfl import trace_verdicts

    a = cfg.args
    reg = _registry(cfg)
    inst = _instance(cfg, reg)
    if not a.formula or not a.trace:
        raise Usage("trace needs --formula and --trace")
    phi = reg.sfl(a.formula)
    trace = read_trace(Path(a.trace).read_text())
    verdicts = trace_verdicts(phi, trace, inst)
    for i, v in enumerate(verdicts):
        prefix = ", ".join(str(e) for e in trace[:i]) or "<empty>"
        print(f"  {i}: {'T' if v else 'F'}  {prefix}")
    if all(verdicts):
        print("holds at all indices")
    else:
        bad = [i for i, v in enumerate(verdicts) if not v]
        print(f"fails at indices {', '.join(map(str, bad))}")
    _emit_json(cfg, {"formula": show(phi), "trace": [str(e) for e in trace], "verdicts": verdicts})
    return EXIT_OK if all(verdicts) else EXIT_CEX


def cmd_certify(cfg: RunConfig) -> int:
    from .certificate import certify
    from .inference import load_pool

    a = cfg.args
    reg = _registry(cfg)
    inst = _instance(cfg, reg)
    chain = _chain(reg, a.chain)
    if a.reinfer:
        chain = [c.with_invariant(None) for c in chain]
    pool = load_pool(Path(a.pool_file).read_text(), reg) if a.pool_file else None
    cert = certify(chain, inst, budget=a.budget, pool=pool, ceiling=cfg.ceiling)
    print(cert.summary())
    if cert.conclusion is not None and cert.proved:
        parts = S.conjuncts(cert.conclusion.invariant)
        print(f"composed invariant ({len(parts)} conjuncts):")
        shown = parts if a.verbose or len(parts) <= MAX_LISTED else parts[:MAX_LISTED]
        for k in shown:
            print(f"  /\\ {show(k)}")
        if len(shown) < len(parts):
            print(f"  ... {len(parts) - len(shown)} more (use -v or --json)")
    elif cert.cti is not None:
        leaf = cert.leaves[-1]
        ob = leaf.result.obligation
        print(cert.cti.describe(ob.system.var_sorts if ob else None))
    if cfg.json_path:
        text = cert.dumps(include_run=not a.no_run_info)
        if cfg.json_path == "-":
            print(text, file=cfg.out or sys.stdout)
        else:
            Path(cfg.json_path).write_text(text + "\n")
    return EXIT_OK if cert.proved else EXIT_CEX


def cmd_validate_fluent(cfg: RunConfig) -> int:
    from .sfl import validate_fluent

    a = cfg.args
    reg = _registry(cfg)
    inst = _instance(cfg, reg)
    names = a.fluents or sorted(reg.fluents)
    status = EXIT_OK
    out = []
    for n in names:
        if n not in reg.fluents:
            raise Usage(f"unknown fluent {n!r}")
        rep = validate_fluent(reg.fluents[n], inst)
        if rep.ok:
            print(f"{n}: ok ({rep.states_checked} states checked)")
        else:
            status = EXIT_CEX
            for p in rep.problems:
                print(f"{n}: {p.kind}: {p.detail}")
        out.append({"fluent": n, "ok": rep.ok, "problems": [{"kind": p.kind, "detail": p.detail} for p in rep.problems]})
    _emit_json(cfg, {"instance": inst.to_json(), "fluents": out})
    return status


COMMANDS = {
    "check": cmd_check,
    "compose": cmd_compose,
    "infer": cmd_infer,
    "trace": cmd_trace,
    "certify": cmd_certify,
    "validate-fluent": cmd_validate_fluent,
}


# argument parsing ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("files", nargs="*", help="specification files (.civ); defaults to the bundled entry")
    common.add_argument("--entry", default="toy2pc", help="bundled corpus entry used when no files are given")
    common.add_argument("--instance", action="append", default=[], metavar="SPEC",
                        help="instance name or Param=a,b binding (repeatable; overrides declared instances)")
    common.add_argument("--nat-bound", type=int, default=None)
    common.add_argument("--ceiling", type=int, default=None, help="state-space ceiling (default: $CIVI_STATE_CEILING)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--json", dest="json_path", metavar="PATH", help="write a JSON report ('-' for stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="civi", description="Compositional invariant checking for parameterized systems.")
    p.add_argument("--version", action="version", version=f"civi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="check a contract's invariant")
    s.add_argument("--contract", action="append")

    s = sub.add_parser("compose", parents=[common], help="print the parallel composition of components")
    s.add_argument("--name")
    s.add_argument("-o", "--output")

    s = sub.add_parser("infer", parents=[common], help="infer an inductive invariant for a contract")
    s.add_argument("--contract", action="append")
    s.add_argument("--pool-file")
    s.add_argument("--budget", type=int, default=None)
    s.add_argument("--log-ctis", metavar="PATH")

    s = sub.add_parser("trace", parents=[common], help="evaluate an SFL formula on a finite trace")
    s.add_argument("--formula", required=True)
    s.add_argument("--trace", required=True)

    s = sub.add_parser("certify", parents=[common], help="prove a chain of contracts end to end")
    s.add_argument("--chain", help="chain name, NAME.chain, or a file listing contract names")
    s.add_argument("--pool-file")
    s.add_argument("--budget", type=int, default=None)
    s.add_argument("--reinfer", action="store_true", help="ignore declared invariants and infer all of them")
    s.add_argument("--no-run-info", action="store_true", help="omit the timestamp and timings from the JSON")

    sub.add_parser("validate-fluent", parents=[common], help="check fluent machines for well-formedness (names as positionals)")
    return p


def _split_positionals(a: argparse.Namespace) -> None:
    """Separate spec files from component or fluent names among the positionals."""
    files, names = [], []
    for x in a.files:
        (files if x.endswith(".civ") or Path(x).is_file() else names).append(x)
    if a.command == "compose":
        a.components = names
    elif a.command == "validate-fluent":
        a.fluents = names
    elif names:
        raise Usage(f"unexpected arguments: {' '.join(names)}")
    a.files = files or [str(p) for p in entry_files(a.entry)]


def main(argv: list[str] | None = None) -> int:
    from .inference import DEFAULT_BUDGET

    parser = build_parser()
    a, extra = parser.parse_known_args(argv)
    # positionals may follow options (e.g. `compose ToyRM --name X files...`)
    unknown = [x for x in extra if x.startswith("-")]
    if unknown:
        parser.error(f"unrecognized arguments: {' '.join(unknown)}")
    if extra and not hasattr(a, "files"):
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    a.files = list(getattr(a, "files", [])) + extra
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(a, "budget", 0) is None:
        a.budget = DEFAULT_BUDGET
    try:
        _split_positionals(a)
        cfg = RunConfig(a.files, a.instance, a.nat_bound, a.ceiling, max(1, a.workers), a.seed, a.json_path, a, sys.stdout)
        # with `--json -` stdout carries only the JSON; the text report goes to stderr
        quiet = contextlib.redirect_stdout(sys.stderr) if a.json_path == "-" else contextlib.nullcontext()
        with quiet:
            return COMMANDS[a.command](cfg)
    except StateSpaceOverflow as exc:
        print(f"civi: {exc}", file=sys.stderr)
        return EXIT_CEILING
    except RecheckFailed as exc:
        print(f"civi: {exc}", file=sys.stderr)
        return EXIT_CEX
    except UnboundName as exc:
        print(f"civi: {exc}", file=sys.stderr)
        return EXIT_USER
    except (CiviError, OSError) as exc:
        print(f"civi: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
