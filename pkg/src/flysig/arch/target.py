"""Prototype to target: drop unused operators and hardwire the routing."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from ..kernel import GateKind
from .config import Operator, ProcessorConfig, validate_config
from .elaborate import elaborate


@dataclass
class Resources:
    instances: Counter = field(default_factory=Counter)  # operator kind -> count
    gates: int = 0
    c_elements: int = 0

    def as_dict(self) -> dict:
        d = {f"instances.{k}": v for k, v in sorted(self.instances.items())}
        d["gates"] = self.gates
        d["c_elements"] = self.c_elements
        return d

    def dominated_by(self, other: "Resources") -> bool:
        """True if no count here exceeds the matching count of ``other``."""
        mine, theirs = self.as_dict(), other.as_dict()
        return all(v <= theirs.get(k, 0) for k, v in mine.items())


@dataclass
class TargetReport:
    removed: list[tuple[str, str]]  # (instance, kind)
    kept: list[str]
    before: Resources
    after: Resources

    def removed_by_kind(self) -> Counter:
        return Counter(k for _, k in self.removed)

    def to_text(self) -> str:
        lines = [f"kept {len(self.kept)} operator instance(s): {', '.join(self.kept) or '-'}",
                 f"removed {len(self.removed)} operator instance(s):"]
        lines += [f"  {inst} {kind}" for inst, kind in self.removed]
        b, a = self.before.as_dict(), self.after.as_dict()
        lines.append("resources (prototype -> target):")
        for k in sorted(set(b) | set(a)):
            lines.append(f"  {k}: {b.get(k, 0)} -> {a.get(k, 0)}")
        return "\n".join(lines) + "\n"


def prototype_config(cfg: ProcessorConfig, inventory: Mapping[str, int] | None = None) -> ProcessorConfig:
    """``cfg`` with its operator inventory topped up to ``inventory`` (kind -> count)."""
    out = cfg.copy()
    have = Counter(op.kind for op in out.operators.values())
    for kind, n in sorted((inventory or {}).items()):
        i = 0
        while have[kind] < n:
            name = f"{kind.lower()}_spare{i}"
            i += 1
            if name in out.operators:
                continue
            out.operators[name] = Operator(name, kind)
            have[kind] += 1
    return out


def resources(cfg: ProcessorConfig) -> Resources:
    nl = elaborate(cfg).netlist
    c = sum(g.kind in (GateKind.C_ELEMENT, GateKind.C_ELEMENT3) for g in nl.gates)
    return Resources(Counter(op.kind for op in cfg.operators.values()), len(nl.gates), c)


def derive_target(cfg: ProcessorConfig, inventory: Mapping[str, int] | None = None) -> tuple[ProcessorConfig, TargetReport]:
    """Keep exactly the instances the routing references and freeze the routing.

    ``inventory`` optionally describes the prototype's full operator set
    (kind -> count); instances beyond those declared in ``cfg`` count as
    present in the prototype and show up as removed.
    """
    proto = prototype_config(cfg, inventory)
    used = {r.inst for r in proto.routing.values()}
    target = proto.copy()
    target.operators = {k: v for k, v in proto.operators.items() if k in used}
    target.frozen = True
    validate_config(target)
    removed = [(k, v.kind) for k, v in proto.operators.items() if k not in used]
    report = TargetReport(removed, sorted(used), resources(proto), resources(target))
    return target, report
