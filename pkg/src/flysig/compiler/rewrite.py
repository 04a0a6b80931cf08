"""Graph rewrites: repeated-addend collapse and constant-multiply decomposition."""

from __future__ import annotations

from dataclasses import replace

from ..kernel import SimulationError
from .dfg import Dfg, Node, validate_dfg


def _fresh(dfg_nodes: dict, base: str) -> str:
    i = 0
    while f"{base}{i}" in dfg_nodes:
        i += 1
    return f"{base}{i}"


def _redirect(nodes: dict[str, Node], old: str, new: str) -> None:
    for nid, n in list(nodes.items()):
        if old in n.srcs:
            nodes[nid] = replace(n, srcs=tuple(new if s == old else s for s in n.srcs))


# ---------------------------------------------------------------------------
# Repeated addend


def _is_pipe(n: Node) -> bool:
    return n.kind == "DELAY" and n.value is None and n.shift == 0


def _find_chain(dfg: Dfg, consumers, start: Node):
    """Longest chain start -> [pipeline regs] -> add(., x) -> ... sharing x."""
    for x_pos in (0, 1):
        x = start.srcs[x_pos]
        a = start.srcs[1 - x_pos]
        adds, pipes, members = [start.id], 0, [start.id]
        cur = start.id
        while True:
            users = consumers[cur]
            if len(users) != 1:
                break
            nxt = dfg.nodes[users[0][0]]
            if _is_pipe(nxt):
                members.append(nxt.id)
                pipes += 1
                cur = nxt.id
                continue
            if nxt.kind == "ADD" and x in nxt.srcs and cur in nxt.srcs and nxt.srcs.count(cur) == 1 and \
                    nxt.srcs[1 - nxt.srcs.index(cur)] == x:
                adds.append(nxt.id)
                members.append(nxt.id)
                cur = nxt.id
                continue
            break
        if len(adds) >= 2:
            return a, x, adds, pipes, members
    return None


def optimize_repeated_add(dfg: Dfg) -> Dfg:
    """Collapse a + x + x + ... (k times x) into a + sum of x * 2**i over k's bits.

    Each power-of-two multiple of x comes from a zero-initialised bit-shift
    delay (the "inserted data item"), so a + x + x + x becomes
    a + x + (x shifted by one): one addition and one pipeline register fewer,
    one initialised delay more. The rewrite is applied only when neither the
    addition count nor the delay count grows.
    """
    nodes = dict(dfg.nodes)
    changed = True
    while changed:
        changed = False
        cur = Dfg(dfg.name, dfg.width, nodes)
        consumers = cur.consumers()
        for n in list(nodes.values()):
            if n.kind != "ADD":
                continue
            found = _find_chain(cur, consumers, n)
            if not found:
                continue
            a, x, adds, pipes, members = found
            k = len(adds)
            shifts = [i for i in range(1, dfg.width) if (k >> i) & 1]
            new_adds = (k & 1) + len(shifts)
            new_pipes = pipes - (k - new_adds) - len(shifts)
            if new_adds > k or new_pipes < 0:
                continue
            for m in members:
                del nodes[m]
            tail = members[-1]
            shift_ids = []
            for sh in shifts:
                sid = _fresh(nodes, f"{tail}_x{1 << sh}_")
                nodes[sid] = Node(sid, "DELAY", (x,), shift=sh)
                shift_ids.append(sid)
            steps: list[str | None] = []  # operand to add, or None for a pipeline register
            left = new_pipes
            for opnd in ([x] if k & 1 else []) + shift_ids:
                steps.append(opnd)
                if left:
                    steps.append(None)
                    left -= 1
            steps += [None] * left
            acc = a
            for i, opnd in enumerate(steps):
                nid = tail if i == len(steps) - 1 else _fresh(nodes, f"{tail}_{'a' if opnd else 'r'}")
                nodes[nid] = Node(nid, "ADD", (acc, opnd)) if opnd else Node(nid, "DELAY", (acc,))
                acc = nid
            changed = True
            break
    out = Dfg(dfg.name, dfg.width, _ordered(nodes))
    validate_dfg(out)
    return out


def _ordered(nodes: dict[str, Node]) -> dict[str, Node]:
    rank = {"INPUT": 0, "CONST": 1}
    return dict(sorted(nodes.items(), key=lambda kv: (rank.get(kv[1].kind, 2 if kv[1].kind != "OUTPUT" else 3))))


# ---------------------------------------------------------------------------
# Constant multiplication


def naf_digits(c: int) -> list[int]:
    """Non-adjacent form, least significant digit first (digits in {-1,0,1})."""
    digits = []
    while c:
        if c & 1:
            d = 2 - (c % 4)
            c -= d
        else:
            d = 0
        digits.append(d)
        c //= 2
    return digits


def shift_add_terms(c: int, width: int) -> list[tuple[int, int]]:
    """(sign, shift) terms with sum(sign * x << shift) == c * x mod 2**width.

    Canonical signed digits, except that plain binary wins ties in the number
    of nonzero digits (it needs no subtraction). Terms at or above ``width``
    vanish modulo 2**width.
    """
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    if not lo <= c <= hi:
        raise SimulationError("CONSTANT_OVERFLOW", f"{c} outside [{lo}, {hi}] at width {width}")
    naf = [(d, i) for i, d in enumerate(naf_digits(c)) if d and i < width]
    u = c % (1 << width)
    binary = [(1, i) for i in range(width) if (u >> i) & 1]
    return binary if len(binary) <= len(naf) else naf


def decompose_mul_const(dfg: Dfg) -> Dfg:
    """Replace every MUL_CONST by shifts (bit delays) and additions/subtractions."""
    nodes = dict(dfg.nodes)
    for n in list(nodes.values()):
        if n.kind != "MUL_CONST":
            continue
        x = n.srcs[0]
        terms = shift_add_terms(n.value, dfg.width)
        del nodes[n.id]
        if not terms:
            nodes[n.id] = Node(n.id, "CONST", value=0, line=n.line)
            continue
        if terms == [(1, 0)]:
            _redirect(nodes, n.id, x)
            continue
        # shifted copies of x, built as a chain of bit delays
        shifted: dict[int, str] = {0: x}
        prev, prev_shift = x, 0
        for _, s in sorted(terms, key=lambda t: t[1]):
            if s in shifted:
                continue
            sid = _fresh(nodes, f"{n.id}_s{s}_")
            nodes[sid] = Node(sid, "DELAY", (prev,), shift=s - prev_shift)
            shifted[s] = sid
            prev, prev_shift = sid, s
        terms = sorted(terms, key=lambda t: (-t[0], t[1]))  # positive terms first
        if terms[0][0] > 0:
            acc = shifted[terms[0][1]]
            rest = terms[1:]
        else:
            acc = _fresh(nodes, f"{n.id}_zero")
            nodes[acc] = Node(acc, "CONST", value=0)
            rest = terms
        for i, (sign, s) in enumerate(rest):
            aid = n.id if i == len(rest) - 1 else _fresh(nodes, f"{n.id}_t")
            nodes[aid] = Node(aid, "ADD" if sign > 0 else "SUB", (acc, shifted[s]))
            acc = aid
        if not rest:
            _redirect(nodes, n.id, acc)
    out = Dfg(dfg.name, dfg.width, _ordered(nodes))
    validate_dfg(out)
    return out
