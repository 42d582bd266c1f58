"""End-to-end certification of a chain of contracts.

Every contract in the chain is discharged on its own (inferring an
invariant when none is given), the proofs are folded left to right with the
fluent composition rules, and the conjoined invariant is then checked again
from scratch on the fully composed system.
"""

from __future__ import annotations

import datetime as _dt
import json
import time
from dataclasses import dataclass, field
from typing import Sequence

from . import __version__
from .contracts import Contract, Cti, InductiveResult, check_inductive, lower
from .errors import ChainIllFormed, RecheckFailed
from .inference import DEFAULT_BUDGET, houdini
from .printer import show
from .rules import ProofStep, compose_contracts, same_formula


@dataclass
class LeafReport:
    contract: Contract
    source: str  # given | inferred
    result: InductiveResult
    seconds: float
    inference: object | None = None

    def to_json(self) -> dict:
        ob = self.result.obligation
        d = self.contract.to_json()
        d["invariantSource"] = self.source
        d["verdict"] = self.result.verdict
        d["statesChecked"] = self.result.states
        d["transitionsChecked"] = self.result.transitions
        d["system"] = list(ob.system.var_names) if ob is not None else []
        d["fluentVariables"] = dict(sorted(ob.renaming.items())) if ob is not None else {}
        if self.result.cti is not None:
            d["cti"] = self.result.cti.to_json(ob.system.var_sorts if ob else None)
        return d


@dataclass
class Certificate:
    chain: tuple[str, ...]
    instance: object
    proved: bool
    leaves: list[LeafReport] = field(default_factory=list)
    steps: list[ProofStep] = field(default_factory=list)
    conclusion: ProofStep | None = None
    safe_conclusion: Contract | None = None
    recheck: InductiveResult | None = None
    failure: str = ""
    timings: dict = field(default_factory=dict)

    @property
    def cti(self) -> Cti | None:
        for leaf in self.leaves:
            if leaf.result.cti is not None:
                return leaf.result.cti
        return None

    def to_json(self, include_run: bool = True) -> dict:
        d = {
            "tool": {"name": "civi", "version": __version__},
            "chain": list(self.chain),
            "instance": self.instance.to_json(),
            "verdict": "proved" if self.proved else "failed",
            "leaves": [leaf.to_json() for leaf in self.leaves],
            "rules": [s.to_json() for s in self.steps],
        }
        if self.failure:
            d["failure"] = self.failure
        if self.conclusion is not None:
            d["conclusion"] = self.conclusion.contract.to_json()
        if self.safe_conclusion is not None:
            d["safeConclusion"] = self.safe_conclusion.to_json()
        if self.recheck is not None:
            d["recheck"] = {
                "verdict": self.recheck.verdict,
                "statesChecked": self.recheck.states,
                "transitionsChecked": self.recheck.transitions,
            }
        if include_run:
            d["run"] = {
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                "seconds": {k: round(v, 4) for k, v in self.timings.items()},
            }
        return d

    def dumps(self, include_run: bool = True) -> str:
        return json.dumps(self.to_json(include_run), indent=2, sort_keys=False)

    def summary(self) -> str:
        lines = [f"chain {' -> '.join(self.chain)} at {self.instance.describe()}"]
        for leaf in self.leaves:
            lines.append(f"  {leaf.contract.name}: {leaf.result.verdict} ({leaf.source} invariant, {leaf.result.states} states)")
        for s in self.steps:
            lines.append(f"  {s.rule}: {' + '.join(p.contract.name for p in s.premises)}")
        if self.recheck is not None:
            lines.append(f"  re-check of conjoined invariant: {self.recheck.verdict} ({self.recheck.states} states)")
        lines.append("PROVED" if self.proved else f"FAILED: {self.failure}")
        return "\n".join(lines)


def check_chain(contracts: Sequence[Contract]) -> None:
    """Shape checks that need no state exploration."""
    if not contracts:
        raise ChainIllFormed("empty chain")
    if len(contracts) == 1:
        return
    for c in contracts[:-1]:
        if c.kind != "action":
            raise ChainIllFormed(f"{c.name} is a {c.kind} contract; every contract but the last must be an action contract")
    if contracts[-1].kind not in ("action", "hybrid"):
        raise ChainIllFormed(f"the last contract {contracts[-1].name} must be an action or hybrid contract")
    for a, b in zip(contracts, contracts[1:]):
        if not same_formula(a.guarantee, b.assume):
            raise ChainIllFormed(
                f"guarantee of {a.name} ({show(a.guarantee)}) does not match assumption of {b.name} ({show(b.assume)})"
            )


def certify(
    contracts: Sequence[Contract],
    instance,
    *,
    infer: bool = True,
    budget: int = DEFAULT_BUDGET,
    pool=None,
    ceiling: int | None = None,
    on_cti=None,
) -> Certificate:
    """Prove each contract, compose the proofs and re-check the result."""
    contracts = list(contracts)
    check_chain(contracts)
    start = time.perf_counter()
    cert = Certificate(tuple(c.name for c in contracts), instance, False)
    leaves: list[ProofStep] = []
    for c in contracts:
        t0 = time.perf_counter()
        source = "given"
        inf = None
        if c.invariant is None:
            if not infer:
                raise ChainIllFormed(f"{c.name} has no invariant and inference is disabled")
            source = "inferred"
            inf = houdini(lower(c), instance, pool=pool, budget=budget, ceiling=ceiling, on_cti=on_cti)
            if not inf.success:
                res = InductiveResult(False, cti=inf.ctis[-1] if inf.ctis else None, obligation=lower(c))
                cert.leaves.append(LeafReport(c, source, res, time.perf_counter() - t0, inf))
                cert.failure = f"could not infer an invariant for {c.name}: {inf.reason}"
                cert.timings["total"] = time.perf_counter() - start
                return cert
            c = c.with_invariant(inf.invariant)
        res = check_inductive(lower(c), instance, ceiling=ceiling)
        dt = time.perf_counter() - t0
        cert.timings[c.name] = dt
        cert.leaves.append(LeafReport(c, source, res, dt, inf))
        if not res.proved:
            cert.failure = f"{c.name}: invariant is not inductive ({res.cti.kind})"
            cert.timings["total"] = time.perf_counter() - start
            return cert
        leaves.append(ProofStep("leaf", c, result=res))

    acc = leaves[0]
    safe = leaves[0]
    for nxt in leaves[1:]:
        rule = "hybrid-comp" if nxt.contract.kind == "hybrid" else "sfl-comp"
        acc = compose_contracts(acc, nxt, rule, instance)
        cert.steps.append(acc)
        safe = compose_contracts(safe, nxt, rule.replace("-comp", "-safe"), instance)
    cert.conclusion = acc
    if len(leaves) > 1:
        cert.safe_conclusion = safe.contract
        t0 = time.perf_counter()
        cert.recheck = check_inductive(lower(acc.contract), instance, ceiling=ceiling)
        cert.timings["recheck"] = time.perf_counter() - t0
        if not cert.recheck.proved:
            raise RecheckFailed(
                f"conjoined invariant is not inductive for the composed system ({cert.recheck.cti.kind})"
            )
    else:
        cert.recheck = leaves[0].result
    cert.proved = True
    cert.timings["total"] = time.perf_counter() - start
    return cert


def invariant_text(step: ProofStep) -> str:
    return show(step.invariant) if step.invariant is not None else ""


__all__ = ["Certificate", "LeafReport", "certify", "check_chain", "invariant_text"]
