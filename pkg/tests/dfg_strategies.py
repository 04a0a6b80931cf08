"""Hypothesis strategies for random dataflow graphs in the text format."""

from __future__ import annotations

from hypothesis import strategies as st


@st.composite
def dfg_texts(draw, width=None, max_ops=8, allow_mulc=True, allow_feedback=True):
    w = draw(st.sampled_from([6, 8])) if width is None else width
    lim = 1 << (w - 1)
    n_in = draw(st.integers(1, 2))
    names = [f"i{k}" for k in range(n_in)]
    lines = [f"dfg g width={w}"] + [f"in {n}" for n in names]
    n_ops = draw(st.integers(1, max_ops))
    pending_fb = []
    for k in range(n_ops):
        nid = f"n{k}"
        kinds = ["add", "add", "sub", "pipe", "shift", "chain"]
        if allow_mulc:
            kinds.append("mulc")
        if allow_feedback:
            kinds.append("fb")
        kind = draw(st.sampled_from(kinds))
        src = lambda: draw(st.sampled_from(names))
        if kind in ("add", "sub"):
            lines.append(f"op {nid} = {kind} {src()} {src()}")
        elif kind == "mulc":
            lines.append(f"op {nid} = mulc {src()} {draw(st.integers(-lim, lim - 1))}")
        elif kind == "pipe":
            lines.append(f"reg {nid} = {src()}")
        elif kind == "shift":
            lines.append(f"reg {nid} = {src()} shift={draw(st.integers(1, w - 1))}")
        elif kind == "chain":  # a + x + x + ... with optional pipeline registers in between
            a, x = src(), src()
            reps = draw(st.integers(2, 5))
            cur = a
            for j in range(reps):
                lines.append(f"op {nid}_{j} = add {cur} {x}")
                cur = f"{nid}_{j}"
                if draw(st.booleans()):
                    lines.append(f"reg {nid}_p{j} = {cur}")
                    cur = f"{nid}_p{j}"
            lines.append(f"reg {nid} = {cur}")
        else:  # feedback: the register reads a node defined later
            init = draw(st.integers(-lim, lim - 1))
            pending_fb.append((nid, init))
            names.append(nid)
            continue
        names.append(nid)
    # close feedback registers onto the last node, through an adder so the loop computes something
    last = names[-1]
    if any(last == nid for nid, _ in pending_fb):
        lines.append(f"op tail = add {names[0]} {last}")
        last = "tail"
        names.append(last)
    for nid, init in pending_fb:
        lines.append(f"reg {nid} = {last} init={init}")
    lines.append(f"out y = {last}")
    if draw(st.booleans()) and len(names) > n_in + 1:
        lines.append(f"out z = {draw(st.sampled_from(names[n_in:]))}")
    return "\n".join(lines) + "\n"
