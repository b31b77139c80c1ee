"""Hardware-side picture: release splitting, POWER/ARM graph mappings, and
the POWER and ARMv8 consistency checkers.

Mappings are graph-level: each source event keeps its identity, inserted
barriers take half-step serial numbers, and the mapped graph is the minimal
one satisfying the correspondence conditions (correspondence_check accepts
non-minimal targets too).
"""

from __future__ import annotations

from dataclasses import dataclass

from .consistency import Verdict, _check_completeness_totality, _cycle_witness
from .execgraph import Event, Execution, Fence, Read, Write
from .relalg import Rel, union_all


class MappingError(ValueError):
    pass


def _renumber_whole(g):
    """Order-preserving renumbering so every serial number is whole."""
    if all(e.is_init or e.half == 0 for e in g.events):
        return g
    counters = {}
    new_events = []
    for e in g.events:
        if e.is_init:
            new_events.append(e)
            continue
        k = counters.get(e.tid, 0)
        counters[e.tid] = k + 1
        new_events.append(Event(e.tid, k))
    return Execution(
        new_events, g.labels, rmw=g.rmw, data=g.data, addr=g.addr, ctrl=g.ctrl,
        casdep=g.casdep, rf=g.rf, co=g.co, sc=g.sc, model=g.model,
    )


def _forward_close_ctrl(ctrl_pairs, po):
    ctrl = Rel(po.n, ctrl_pairs)
    return ctrl | ctrl.compose(po)


def split_release(g):
    """Insert a release fence before each uncovered release write and weaken
    all release writes to relaxed; the identity when no release writes exist."""
    if not g.W_rel:
        return g
    po = g.po
    fences_rel = g.fences_geq("rel")
    rmw_inv = {w: r for r, w in g.rmw.pairs}

    new_events = []
    for w in sorted(g.W_rel):
        pre = po.preimage((w,))
        covered = False
        for f in fences_rel:
            if (f, w) not in po.pairs:
                continue
            shield = po.preimage((f,)) | {f}
            if all(e in shield or (e, w) in g.rmw.pairs for e in pre):
                covered = True
                break
        if covered:
            continue
        anchor = rmw_inv.get(w, w)
        ev = g.events[anchor]
        if ev.half != 0:
            raise MappingError("split_release expects whole serial numbers")
        new_events.append(Event(ev.tid, ev.whole - 1, 1))

    event_labels = []
    for e, lab in zip(g.events, g.labels):
        if isinstance(lab, Write) and lab.mode == "rel":
            lab = Write("rlx", lab.loc, lab.val, lab.rmw_mode)
        event_labels.append((e, lab))
    for e in new_events:
        event_labels.append((e, Fence("rel")))

    def pairs(rel):
        return [(g.events[a], g.events[b]) for a, b in rel.pairs]

    out = Execution.build(
        event_labels, rmw=pairs(g.rmw), data=pairs(g.data), addr=pairs(g.addr),
        ctrl=pairs(g.ctrl), casdep=pairs(g.casdep), rf=pairs(g.rf),
        co=pairs(g.co), sc=None if g.sc is None else pairs(g.sc),
    )
    closed = _forward_close_ctrl(out.ctrl.pairs, out.po)
    return Execution(
        out.events, out.labels, rmw=out.rmw, data=out.data, addr=out.addr,
        ctrl=closed, casdep=out.casdep, rf=out.rf, co=out.co, sc=out.sc,
    )


_POWER_FENCE = {"acq": "lwsync", "rel": "lwsync", "acqrel": "lwsync", "sc": "sync"}


def to_power(g):
    """Canonical POWER image of a release-free execution."""
    if g.W_rel:
        raise MappingError("release writes present; run split_release first")
    g = _renumber_whole(g)
    po = g.po
    rmw_pairs = g.rmw.pairs

    isync_after = set()
    acq_rmw_reads = {r for r, w in rmw_pairs if r in g.R_acq}
    for r in g.R_acq - g.rmw.dom():
        isync_after.add(r)
    for r, w in rmw_pairs:
        if r in acq_rmw_reads:
            isync_after.add(w)

    event_labels = []
    inserted = {}
    for i, (e, lab) in enumerate(zip(g.events, g.labels)):
        if isinstance(lab, Read):
            plab = Read(None, lab.loc, lab.val, lab.ex)
        elif isinstance(lab, Write):
            plab = Write(None, lab.loc, lab.val, None) if not e.is_init else lab
        else:
            plab = Fence(_POWER_FENCE[lab.mode])
        event_labels.append((e, plab))
        if i in isync_after:
            f = Event(e.tid, e.whole, 1)
            inserted[i] = f
            event_labels.append((f, Fence("isync")))

    def ev(i):
        return g.events[i]

    def pairs(rel):
        return [(ev(a), ev(b)) for a, b in rel.pairs]

    out = Execution.build(
        event_labels, rmw=pairs(g.rmw), data=pairs(g.data), addr=pairs(g.addr),
        ctrl=pairs(g.ctrl), rf=pairs(g.rf), co=pairs(g.co), model="power",
    )
    # ctrl extensions range over the target's po so inserted isyncs are covered
    tpo = out.po
    tix = {e: i for i, e in enumerate(out.events)}
    ctrl = set(out.ctrl.pairs)
    t_rmw = out.rmw.pairs
    t_data = out.data.pairs
    # every acquire read controls all later events (ld;cmp;bc;isync)
    for r in g.R_acq:
        tr = tix[ev(r)]
        for b in tpo.image((tr,)):
            if (tr, b) not in t_rmw:
                ctrl.add((tr, b))
    # exclusive reads control later events, except a fadd's own write
    for r in g.R_ex:
        tr = tix[ev(r)]
        for b in tpo.image((tr,)):
            if (tr, b) in t_rmw and (tr, b) in t_data:
                continue
            ctrl.add((tr, b))
    # data into an exclusive write controls everything after that write
    for x, w in g.data.pairs:
        if w in g.rmw.codom():
            tx, tw = tix[ev(x)], tix[ev(w)]
            for b in tpo.image((tw,)):
                ctrl.add((tx, b))
    # CAS dependency controls everything after the exclusive read
    for x, r in g.casdep.pairs:
        tx, tr = tix[ev(x)], tix[ev(r)]
        for b in tpo.image((tr,)):
            ctrl.add((tx, b))
    closed = _forward_close_ctrl(ctrl, tpo)
    return Execution(
        out.events, out.labels, rmw=out.rmw, data=out.data, addr=out.addr,
        ctrl=closed, rf=out.rf, co=out.co, model="power",
    )


_ARM_READ = {"rlx": "rlx", "acq": "Q"}
_ARM_WRITE = {"rlx": "rlx", "rel": "L"}
_ARM_FENCE = {"acq": "ld", "rel": "sy", "acqrel": "sy", "sc": "sy"}


def to_arm(g):
    """Canonical ARMv8 image; a dmb.ld is placed after each strong RMW write."""
    g = _renumber_whole(g)
    po = g.po
    rmw_pairs = g.rmw.pairs

    event_labels = []
    for i, (e, lab) in enumerate(zip(g.events, g.labels)):
        if isinstance(lab, Read):
            alab = Read(_ARM_READ[lab.mode], lab.loc, lab.val, lab.ex)
        elif isinstance(lab, Write):
            alab = Write(_ARM_WRITE[lab.mode], lab.loc, lab.val, None) if not e.is_init else lab
        else:
            alab = Fence(_ARM_FENCE[lab.mode])
        event_labels.append((e, alab))
        if i in g.W_strong:
            event_labels.append((Event(e.tid, e.whole, 1), Fence("ld")))

    def ev(i):
        return g.events[i]

    def pairs(rel):
        return [(ev(a), ev(b)) for a, b in rel.pairs]

    out = Execution.build(
        event_labels, rmw=pairs(g.rmw), data=pairs(g.data), addr=pairs(g.addr),
        ctrl=pairs(g.ctrl), rf=pairs(g.rf), co=pairs(g.co), model="arm",
    )
    tpo = out.po
    tix = {e: i for i, e in enumerate(out.events)}
    ctrl = set(out.ctrl.pairs)
    t_rmw = out.rmw.pairs
    t_data = out.data.pairs
    for r in g.R_ex:
        tr = tix[ev(r)]
        for b in tpo.image((tr,)):
            if (tr, b) in t_rmw and (tr, b) in t_data:
                continue
            ctrl.add((tr, b))
    for x, r in g.casdep.pairs:
        tx, tr = tix[ev(x)], tix[ev(r)]
        for b in tpo.image((tr,)):
            ctrl.add((tx, b))
    closed = _forward_close_ctrl(ctrl, tpo)
    return Execution(
        out.events, out.labels, rmw=out.rmw, data=out.data, addr=out.addr,
        ctrl=closed, rf=out.rf, co=out.co, model="arm",
    )


# -- POWER consistency --------------------------------------------------------------


@dataclass
class PowerRels:
    sync: Rel
    lwsync: Rel
    fence: Rel
    ctrl_isync: Rel
    rdw: Rel
    detour: Rel
    ii: Rel
    ic: Rel
    ci: Rel
    cc: Rel
    ppo: Rel
    hb: Rel
    prop1: Rel
    prop2: Rel
    prop: Rel


def power_ppo_fixpoint(gp, armv7=False):
    """Least simultaneous fixpoint of the ii/ic/ci/cc rule table."""
    po = gp.po
    rf, co = gp.rf, gp.co
    rfi = rf & po
    rfe = rf - po
    coe = co - po
    fr = rf.inverse().compose(co)
    fre = fr - po
    id_RW = gp.ident(gp.RW)
    id_R, id_W = gp.ident(gp.R), gp.ident(gp.W)

    def fence_order(mode):
        return id_RW.seq(po, gp.ident(gp.fences_with_mode(mode)), po, id_RW)

    sync = fence_order("sync")
    lwsync = fence_order("lwsync") - Rel(
        gp.n, ((a, b) for a in gp.W for b in gp.R)
    )
    fence = sync | lwsync
    ctrl_isync = id_R.seq(gp.ctrl, gp.ident(gp.fences_with_mode("isync")), po)
    rdw = fre.compose(rfe) & po
    detour = coe.compose(rfe) & po

    ii = gp.addr | gp.data | rdw | rfi
    ic = Rel(gp.n)
    ci = ctrl_isync | detour
    cc = gp.data | gp.ctrl | gp.addr.compose(po.opt())
    if not armv7:
        cc = cc | gp.po_loc

    while True:
        ii2 = ii | ci | ic.compose(ci) | ii.compose(ii)
        ic2 = ic | ii2 | cc | ic.compose(cc) | ii2.compose(ic)
        ci2 = ci | ci.compose(ii2) | cc.compose(ci)
        cc2 = cc | ci2 | ci2.compose(ic2) | cc.compose(cc)
        if (ii2, ic2, ci2, cc2) == (ii, ic, ci, cc):
            break
        ii, ic, ci, cc = ii2, ic2, ci2, cc2

    ppo = id_R.seq(ii, id_R) | id_R.seq(ic, id_W)
    hb = ppo | fence | rfe
    prop1 = id_W.seq(rfe.opt(), fence, hb.star(), id_W)
    prop2 = (coe | fre).opt().seq(
        rfe.opt(), fence.compose(hb.star()).opt(), sync, hb.star()
    )
    return PowerRels(
        sync=sync, lwsync=lwsync, fence=fence, ctrl_isync=ctrl_isync, rdw=rdw,
        detour=detour, ii=ii, ic=ic, ci=ci, cc=cc, ppo=ppo, hb=hb,
        prop1=prop1, prop2=prop2, prop=prop1 | prop2,
    )


def check_power(gp, at_axiom=False, armv7=False):
    rels = power_ppo_fixpoint(gp, armv7=armv7)
    out = []
    _check_completeness_totality(gp, out)
    po_loc = gp.po_loc
    fr = gp.rf.inverse().compose(gp.co)
    fre = fr - gp.po
    scpl = union_all(gp.n, [po_loc, gp.rf, fr, gp.co])
    if not scpl.is_acyclic():
        out.append(("sc-per-loc", _cycle_witness(scpl, gp)))
    observation = fre.seq(rels.prop, rels.hb.star())
    refl = [i for i in range(gp.n) if (i, i) in observation.pairs]
    if refl:
        out.append(("observation", [str(gp.events[refl[0]])]))
    if not (gp.co | rels.prop).is_acyclic():
        out.append(("propagation", _cycle_witness(gp.co | rels.prop, gp)))
    coe = gp.co - gp.po
    atomicity = gp.rmw & fre.compose(coe)
    if atomicity:
        out.append(("atomicity", sorted(atomicity.pairs)))
    if not rels.hb.is_acyclic():
        out.append(("power-no-thin-air", _cycle_witness(rels.hb, gp)))
    if at_axiom:
        at = gp.rmw.dom() | gp.rmw.codom()
        extra = gp.co | gp.ident(at).seq(gp.po, gp.ident(at))
        if not extra.is_acyclic():
            out.append(("at-order", _cycle_witness(extra, gp)))
    return Verdict("power", out)


# -- ARM consistency ----------------------------------------------------------------


def check_arm(ga):
    po = ga.po
    rf, co = ga.rf, ga.co
    rfi, rfe = rf & po, rf - po
    coi, coe = co & po, co - po
    fr = rf.inverse().compose(co)
    fre = fr - po
    id_W = ga.ident(ga.W)
    w_ex = ga.rmw.codom()
    r_q = frozenset(i for i in ga.R if ga.labels[i].mode == "Q")
    w_l = frozenset(i for i in ga.W if ga.labels[i].mode == "L")

    obs = rfe | fre | coe
    dob = (
        (ga.addr | ga.data).compose(rfi.opt())
        | (ga.ctrl | ga.data).seq(id_W, coi.opt())
        | ga.addr.seq(po, id_W)
    )
    aob = ga.rmw | ga.ident(w_ex).seq(rfi, ga.ident(r_q))
    bob = (
        po.seq(ga.ident(ga.fences_with_mode("sy")), po)
        | ga.ident(ga.R).seq(po, ga.ident(ga.fences_with_mode("ld")), po)
        | ga.ident(r_q).compose(po)
        | po.seq(ga.ident(w_l), coi.opt())
    )

    out = []
    _check_completeness_totality(ga, out)
    scpl = union_all(ga.n, [ga.po_loc, rf, fr, co])
    if not scpl.is_acyclic():
        out.append(("sc-per-loc", _cycle_witness(scpl, ga)))
    external = union_all(ga.n, [obs, dob, aob, bob])
    if not external.is_acyclic():
        out.append(("external", _cycle_witness(external, ga)))
    atomicity = ga.rmw & fre.compose(coe)
    if atomicity:
        out.append(("atomicity", sorted(atomicity.pairs)))
    return Verdict("arm", out)


# -- correspondence checks ------------------------------------------------------------


def correspondence_check_power(g, gp):
    """Def-4.2-style conditions between a (renumbered, release-free) source
    and an arbitrary candidate POWER target; diagnostics, not exceptions."""
    g = _renumber_whole(g)
    out = []
    src = {e for e in g.events}
    tgt = {e for e in gp.events}
    expected_new = set()
    for r in g.R_acq - g.rmw.dom():
        e = g.events[r]
        expected_new.add(Event(e.tid, e.whole, 1))
    for r, w in g.rmw.pairs:
        if r in g.R_acq:
            e = g.events[w]
            expected_new.add(Event(e.tid, e.whole, 1))
    if tgt != src | expected_new:
        out.append("event set mismatch")
        return out

    def p_index(event):
        return gp.index_of(event)

    for i, (e, lab) in enumerate(zip(g.events, g.labels)):
        plab = gp.labels[p_index(e)]
        if isinstance(lab, Read):
            ok = isinstance(plab, Read) and (plab.loc, plab.val) == (lab.loc, lab.val)
        elif isinstance(lab, Write):
            if e.is_init:
                ok = isinstance(plab, Write) and (plab.loc, plab.val) == (lab.loc, lab.val)
            else:
                ok = isinstance(plab, Write) and (plab.loc, plab.val) == (lab.loc, lab.val)
        else:
            ok = isinstance(plab, Fence) and plab.mode == _POWER_FENCE[lab.mode]
        if not ok:
            out.append(f"label mismatch at {e}")
    for e in expected_new:
        plab = gp.labels[p_index(e)]
        if not (isinstance(plab, Fence) and plab.mode == "isync"):
            out.append(f"inserted event {e} is not an isync")

    def lift(rel):
        return {(g.events[a], g.events[b]) for a, b in rel.pairs}

    def lift_p(rel):
        return {(gp.events[a], gp.events[b]) for a, b in rel.pairs}

    if lift(g.rmw) != lift_p(gp.rmw):
        out.append("rmw changed")
    if lift(g.data) != lift_p(gp.data):
        out.append("data changed")
    if lift(g.addr) != lift_p(gp.addr):
        out.append("addr changed")
    if lift(g.rf) != lift_p(gp.rf) or lift(g.co) != lift_p(gp.co):
        out.append("rf/co changed")
    ctrl_p = lift_p(gp.ctrl)
    rmw_p = lift_p(gp.rmw)
    data_p = lift_p(gp.data)
    if not lift(g.ctrl) <= ctrl_p:
        out.append("source ctrl dropped")
    po = g.po
    for r in g.R_acq:
        for b in po.image((r,)):
            pr = (g.events[r], g.events[b])
            if pr not in rmw_p and pr not in ctrl_p:
                out.append(f"acquire-read ctrl missing: {pr}")
    for r in g.R_ex:
        for b in po.image((r,)):
            pr = (g.events[r], g.events[b])
            if pr not in ctrl_p and not (pr in rmw_p and pr in data_p):
                out.append(f"exclusive-read ctrl missing: {pr}")
    for x, w in g.data.pairs:
        if w in g.rmw.codom():
            for b in po.image((w,)):
                if (g.events[x], g.events[b]) not in ctrl_p:
                    out.append(f"data-to-exclusive ctrl missing: ({g.events[x]},{g.events[b]})")
    for x, r in g.casdep.pairs:
        for b in po.image((r,)):
            if (g.events[x], g.events[b]) not in ctrl_p:
                out.append(f"casdep ctrl missing: ({g.events[x]},{g.events[b]})")
    return out


def correspondence_check_arm(g, ga):
    g = _renumber_whole(g)
    out = []
    expected_new = set()
    for w in g.W_strong:
        e = g.events[w]
        expected_new.add(Event(e.tid, e.whole, 1))
    if {e for e in ga.events} != {e for e in g.events} | expected_new:
        out.append("event set mismatch")
        return out
    for e, lab in zip(g.events, g.labels):
        alab = ga.labels[ga.index_of(e)]
        if isinstance(lab, Read):
            ok = isinstance(alab, Read) and alab.mode == _ARM_READ[lab.mode] and \
                (alab.loc, alab.val) == (lab.loc, lab.val)
        elif isinstance(lab, Write):
            if e.is_init:
                ok = isinstance(alab, Write) and (alab.loc, alab.val) == (lab.loc, lab.val)
            else:
                ok = isinstance(alab, Write) and alab.mode == _ARM_WRITE[lab.mode] and \
                    (alab.loc, alab.val) == (lab.loc, lab.val)
        else:
            ok = isinstance(alab, Fence) and alab.mode == _ARM_FENCE[lab.mode]
        if not ok:
            out.append(f"label mismatch at {e}")
    for e in expected_new:
        alab = ga.labels[ga.index_of(e)]
        if not (isinstance(alab, Fence) and alab.mode == "ld"):
            out.append(f"inserted event {e} is not a dmb.ld")

    def lift(gr, rel):
        return {(gr.events[a], gr.events[b]) for a, b in rel.pairs}

    if lift(g, g.rmw) != lift(ga, ga.rmw) or lift(g, g.data) != lift(ga, ga.data) \
            or lift(g, g.addr) != lift(ga, ga.addr):
        out.append("rmw/data/addr changed")
    ctrl_a = lift(ga, ga.ctrl)
    rmw_a = lift(ga, ga.rmw)
    data_a = lift(ga, ga.data)
    if not lift(g, g.ctrl) <= ctrl_a:
        out.append("source ctrl dropped")
    po = g.po
    for r in g.R_ex:
        for b in po.image((r,)):
            pr = (g.events[r], g.events[b])
            if pr not in ctrl_a and not (pr in rmw_a and pr in data_a):
                out.append(f"exclusive-read ctrl missing: {pr}")
    for x, r in g.casdep.pairs:
        for b in po.image((r,)):
            if (g.events[x], g.events[b]) not in ctrl_a:
                out.append(f"casdep ctrl missing: ({g.events[x]},{g.events[b]})")
    return out


# -- composed model checkers and the empirical theorems -------------------------------


def check_imm_via_power(g, at_axiom=False, armv7=False):
    return check_power(to_power(split_release(g)), at_axiom=at_axiom, armv7=armv7)


def check_imm_via_arm(g):
    return check_arm(to_arm(g))


def empirical_mapping_theorem(program, target, unroll=8, max_candidates=None):
    """Hardware-consistency of the mapped graph must imply IMM-consistency.

    Returns a report dict; any counterexample is a bug in the mapping or the
    checkers, not expected behavior.
    """
    from .consistency import check_imm
    from .enumeration import candidate_executions

    checked = 0
    counterexamples = []
    for cand in candidate_executions(program, unroll=unroll, max_candidates=max_candidates):
        g = cand.execution
        if target == "power":
            mapped = to_power(split_release(g))
            hv = check_power(mapped)
        elif target == "arm":
            mapped = to_arm(g)
            hv = check_arm(mapped)
        else:
            raise ValueError(target)
        checked += 1
        if hv.consistent:
            iv = check_imm(g)
            if not iv.consistent:
                counterexamples.append({
                    "graph": g.to_json(),
                    "imm_violations": iv.axioms(),
                })
    return {"target": target, "checked": checked, "counterexamples": counterexamples}
