"""Certification graphs: the modified prefix on which one thread can run in
isolation and fulfill its outstanding writes.

Construction: keep covered/issued events and the certified thread's prefix up
to its issued writes, push the thread's non-issued writes as late as possible
in coherence, re-source non-determined reads from the latest visible write,
and re-run the thread's program with those read values pinned to recompute
dependent labels.
"""

from __future__ import annotations

from dataclasses import dataclass

from .enumeration import ThreadState, thread_step
from .execgraph import Execution, Read, Write
from .relalg import Rel
from .traversal import Traversal, TraversalConfig


class CertificationError(RuntimeError):
    pass


class ShapeChangeError(CertificationError):
    """Re-execution with pinned reads changed the event shape (e.g. a CAS
    flipped its success); reported, never patched silently."""


def determined(g, covered, issued):
    """The supplementary determined set: C ∪ dom(detour^?;(deps ∪ rfi)*;[I])."""
    d = g.derive()
    chain = d.detour.opt().compose((d.deps | d.rfi).star())
    return frozenset(covered) | chain.preimage(issued)


def cert_events(g, tc, tid, fragment="full"):
    """Events of the certification graph, as source-graph ids."""
    po = g.po
    thread_issued = tc.issued & g.thread_events(tid)
    keep = set(tc.covered) | set(tc.issued) | po.preimage(thread_issued)
    if fragment == "full":
        other_issued = tc.issued - g.thread_events(tid) - g.init_events
        rmw_reads = g.rmw.restrict(range(g.n), other_issued).dom()
        # init sources are always kept, so only genuine program writes count
        # as "local non-RMW" sources that force the read part out
        non_rmw_writes = g.W - g.rmw.codom() - g.init_events
        rfi = g.rf & po
        local_from_plain = rfi.restrict(non_rmw_writes, range(g.n)).codom()
        keep |= rmw_reads - local_from_plain
    return frozenset(keep)


def cert_determined(g, tc, tid, keep, fragment="full"):
    """The determined set used by the construction (with the acquire extension)."""
    d = g.derive()
    base = (
        set(tc.covered)
        | set(tc.issued)
        | {e for e in keep if g.tid_of(e) != tid}
        | d.rfi.opt().compose(d.ppo).preimage(tc.issued)
    )
    if fragment == "full":
        base |= d.rfe.restrict(range(g.n), g.R_acq).codom()
    return frozenset(base) & keep


def cert_co(g, tc, tid, keep):
    """Coherence of the certification graph: non-issued writes of the
    certified thread go as late as possible."""
    issued = frozenset(tc.issued)
    local = frozenset(e for e in keep if g.tid_of(e) == tid)
    paths = (
        g.co.restrict(issued & keep, issued & keep)
        | g.co.restrict(issued & keep, local)
        | g.co.restrict(local, local)
    ).plus()
    writes = sorted(w for w in keep if w in g.W)
    pairs = set(paths.pairs)
    for w in writes:
        for w2 in writes:
            if w == w2 or g.loc_of[w] != g.loc_of[w2]:
                continue
            if (w, w2) in pairs or (w2, w) in pairs:
                continue
            if w in issued and w2 in local and w2 not in issued:
                pairs.add((w, w2))
    co = Rel(g.n, pairs).plus()
    for loc in {g.loc_of[w] for w in writes}:
        ws = frozenset(w for w in writes if g.loc_of[w] == loc)
        if not co.is_total_on(ws):
            raise CertificationError(f"certification co not total on location {loc}")
    return co


def cert_rf(g, tc, tid, keep, det, sc=None, fragment="full"):
    """rf of the certification graph: determined edges kept, other reads
    re-sourced from the co-maximal visible write."""
    co_crt = cert_co(g, tc, tid, keep)
    bvf = g.bvf(det, sc=sc, fragment=fragment)
    pairs = set()
    for w, r in g.rf.pairs:
        if r in det:
            if w not in keep:
                raise CertificationError(
                    f"determined read {g.events[r]} reads from dropped {g.events[w]}"
                )
            pairs.add((w, r))
    for r in sorted(g.R & keep - det):
        loc = g.loc_of[r]
        cands = [
            w for w in g.writes_to(loc) if (w, r) in bvf.pairs
        ]
        outside = [w for w in cands if w not in keep]
        if outside:
            raise CertificationError(
                f"visible write outside the certification graph for {g.events[r]}"
            )
        best = [
            w for w in cands
            if not any((w, w2) in co_crt.pairs and (w2, r) in bvf.pairs for w2 in cands)
        ]
        if len(best) != 1:
            raise CertificationError(
                f"no unique visible write for read {g.events[r]} (got {len(best)})"
            )
        pairs.add((best[0], r))
    return Rel(g.n, pairs), co_crt


def reexecute_labels(g, tid, keep, rf_crt, sprog, unroll=8):
    """Re-run one thread with pinned read values; returns {source id: label}.

    Reads take the (recomputed) value of their certification rf source, in
    program order; dependent labels are recomputed. Any divergence from the
    kept events' shape raises ShapeChangeError.
    """
    target = sorted(
        (e for e in keep if g.tid_of(e) == tid),
        key=lambda i: g.events[i].sn,
    )
    sources = {r: w for w, r in rf_crt.pairs}
    new_labels = {}
    budget = max(1, unroll * max(1, len(sprog)))
    st = ThreadState(list(sprog), tid)
    emitted = 0
    while emitted < len(target):
        if st.terminal:
            raise ShapeChangeError(f"thread {tid} terminated before event {emitted}")
        if st.steps >= budget:
            raise ShapeChangeError(f"thread {tid} exceeded the step budget")
        before = len(st.events)
        if st.needs_value():
            src_id = target[emitted]
            if src_id not in g.R:
                raise ShapeChangeError(
                    f"expected {g.events[src_id]} to be a read at position {emitted}"
                )
            src = sources.get(src_id)
            if src is None:
                raise CertificationError(f"no rf source for {g.events[src_id]}")
            pinned = new_labels[src].val if src in new_labels else g.labels[src].val
            thread_step(st, read_value=pinned)
        else:
            thread_step(st)
        for rec in st.events[before:]:
            if emitted >= len(target):
                raise ShapeChangeError(f"thread {tid} emitted extra events")
            sid = target[emitted]
            old = g.labels[sid]
            new = rec.label
            if (new.kind, getattr(new, "ex", None), new.loc) != (
                old.kind, getattr(old, "ex", None), old.loc
            ):
                raise ShapeChangeError(
                    f"event shape changed at {g.events[sid]}: {old} vs {new}"
                )
            if isinstance(new, (Read, Write)) and getattr(new, "mode", None) != old.mode:
                raise ShapeChangeError(f"mode changed at {g.events[sid]}")
            new_labels[sid] = new
            emitted += 1
    return new_labels


@dataclass
class CertGraph:
    graph: Execution
    keep: tuple  # source ids, ascending; position = id in graph
    determined: frozenset  # source ids
    tc: TraversalConfig  # over graph ids
    source_tc: TraversalConfig
    tid: int
    source_sc: Rel | None = None
    fragment: str = "full"

    def to_graph_id(self, source_id):
        return self.keep.index(source_id)

    def determined_local(self):
        return frozenset(self.keep.index(e) for e in self.determined)


def build_cert_graph(g, tc, tid, sprog=None, sc=None, fragment="full", unroll=8):
    """Compose events, coherence, reads-from, and re-labeling into the
    certification graph and its traversal configuration."""
    keep = cert_events(g, tc, tid, fragment)
    det = cert_determined(g, tc, tid, keep, fragment)
    rf_crt, co_crt = cert_rf(g, tc, tid, keep, det, sc=sc, fragment=fragment)
    needs_relabel = any(e not in det for e in keep if g.tid_of(e) == tid)
    if sprog is not None:
        new_labels = reexecute_labels(g, tid, keep, rf_crt, sprog, unroll=unroll)
    elif not needs_relabel:
        new_labels = {}
    else:
        raise CertificationError("re-execution needs the thread's program")
    for e in det:
        if e in new_labels and new_labels[e] != g.labels[e]:
            raise ShapeChangeError(f"determined event {g.events[e]} changed label")

    keep_sorted = tuple(sorted(keep))
    remap = {old: new for new, old in enumerate(keep_sorted)}
    n = len(keep_sorted)

    def m(rel):
        return Rel(n, ((remap[a], remap[b]) for a, b in rel.pairs
                       if a in remap and b in remap))

    rmw_crt = g.rmw.restrict(range(g.n), det)
    labels = [new_labels.get(e, g.labels[e]) for e in keep_sorted]
    graph = Execution(
        [g.events[e] for e in keep_sorted], labels,
        rmw=m(rmw_crt), data=m(g.data), addr=m(g.addr), ctrl=m(g.ctrl),
        casdep=m(g.casdep), rf=m(rf_crt), co=m(co_crt),
        sc=None if sc is None else m(sc),
    )
    covered = frozenset(
        remap[e] for e in keep_sorted if e in tc.covered or g.tid_of(e) != tid
    )
    issued = frozenset(remap[e] for e in keep_sorted if e in tc.issued)
    return CertGraph(
        graph=graph, keep=keep_sorted, determined=det,
        tc=TraversalConfig(covered, issued), source_tc=tc, tid=tid,
        source_sc=sc, fragment=fragment,
    )


def check_cert_compl(g, tc, cg, sprog=None, unroll=8):
    """The certification-completeness clauses, adapted to this construction
    (dependency clauses source-restricted; coherence preservation on issued
    determined writes; the visibility formula in place of the undefined
    current-release clause). Empty diagnostics means every clause holds."""
    out = []
    gp = cg.graph
    keep = cg.keep
    det = cg.determined
    remap = {old: new for new, old in enumerate(keep)}

    if not det <= set(keep):
        out.append("determined events dropped")
    for e in det:
        if gp.labels[remap[e]] != g.labels[e]:
            out.append(f"label changed on determined {g.events[e]}")

    det_local = frozenset(remap[e] for e in det)
    po_opt = gp.po.opt()
    for i in range(gp.n):
        if not any((i, d) in po_opt.pairs for d in det_local):
            out.append(f"event {gp.events[i]} has no po path to a determined event")

    def m(rel):
        return Rel(gp.n, ((remap[a], remap[b]) for a, b in rel.pairs
                          if a in remap and b in remap))

    if gp.ctrl != m(g.ctrl):
        out.append("ctrl is not the source restriction")
    for name, rel, crt in (("addr", g.addr, gp.addr), ("data", g.data, gp.data)):
        want = m(rel).restrict(range(gp.n), det_local)
        got = crt.restrict(range(gp.n), det_local)
        if want != got:
            out.append(f"{name};[D] differs from the source")

    issued_det = det_local & frozenset(remap[e] for e in cg.source_tc.issued if e in remap)
    if gp.co.restrict(issued_det, issued_det) != m(g.co).restrict(issued_det, issued_det):
        out.append("co changed on determined issued writes")

    src_rf_d = m(g.rf).restrict(range(gp.n), det_local)
    if gp.rf.restrict(range(gp.n), det_local) != src_rf_d:
        out.append("rf changed on determined reads")

    if gp.rmw != m(g.rmw.restrict(range(g.n), det)):
        out.append("rmw is not rmw;[D]")

    # non-determined writes sit co-last or immediately before a same-thread write
    coi = gp.co & gp.po
    imm_co = gp.co.immediate()
    for w in sorted(gp.W - det_local):
        after_det = [d for d in det_local if (w, d) in gp.co.pairs]
        if not after_det:
            continue
        if not any((w, w2) in imm_co.pairs and (w, w2) in coi.pairs for w2 in gp.W):
            out.append(f"non-determined write {gp.events[w]} badly placed in co")

    # non-determined reads take the co-maximal visible write
    rf_src = {r: w for w, r in gp.rf.pairs}
    src_bvf = g.bvf(cg.determined, sc=cg.source_sc, fragment=cg.fragment)
    co_crt_src = Rel(g.n, ((keep[a], keep[b]) for a, b in gp.co.pairs))
    for r_local in sorted(gp.R - det_local):
        r = keep[r_local]
        loc = g.loc_of[r]
        cands = [w for w in g.writes_to(loc) if (w, r) in src_bvf.pairs]
        best = [w for w in cands
                if not any((w, w2) in co_crt_src.pairs and (w2, r) in src_bvf.pairs
                           for w2 in cands)]
        if len(best) != 1 or rf_src.get(r_local) != remap.get(best[0]):
            out.append(f"read {g.events[r]} not sourced from the visible maximum")

    # a strong write whose read part was carved out keeps its (pinned) label
    # but loses its rmw edge; that dangling strongness only strengthens ar
    dangling = {
        remap[w]
        for r, w in g.rmw.pairs
        if w in remap and r not in remap
    }
    wf = [
        d for d in gp.wellformed()
        if not any(d == f"strong write outside codom(rmw): {w}" for w in dangling)
    ]
    if wf:
        out.append(f"certification graph ill-formed: {wf}")

    if sprog is not None:
        try:
            relabeled = reexecute_labels(g, cg.tid, set(keep), _lift_rf(g, gp, keep),
                                         sprog, unroll=unroll)
        except CertificationError as err:
            out.append(f"thread {cg.tid} does not re-execute: {err}")
        else:
            for e, lab in relabeled.items():
                if gp.labels[remap[e]] != lab:
                    out.append(f"re-executed label mismatch at {g.events[e]}")
    for e in keep:
        if g.tid_of(e) not in (cg.tid, -1) and e not in det:
            out.append(f"other-thread event {g.events[e]} is not determined")
    return out


def _lift_rf(g, gp, keep):
    return Rel(g.n, ((keep[a], keep[b]) for a, b in gp.rf.pairs))


def certification_traversal(cg, check_configs=True):
    """Traverse the certification graph from its configuration; all steps must
    belong to the certified thread."""
    trav = Traversal(cg.graph, sc=cg.graph.sc)
    steps = trav.traverse(start=cg.tc, check_configs=check_configs)
    foreign = [s for s in steps if cg.graph.events[s.event].tid != cg.tid]
    if foreign:
        raise CertificationError(f"certification made foreign steps: {foreign}")
    return steps
