"""Replay of harvested signed pointers at every USE site."""

from __future__ import annotations

from pacfi.analyzer.corpus import allowed_targets, context_value
from pacfi.pa.model import AuthFault, BranchOutcome, branch_to, invert_key, pac_auth, pac_sign
from pacfi.pa.schemes import stable_hash64
from pacfi.sim.scenario import GADGET, TEXT_BASE, Outcome, Scenario, Transcript

DATA_BASE = 0xFFFF_0000_2000_0000


def function_address(name: str) -> int:
    """Stable, aligned kernel text address for a function name."""
    return TEXT_BASE + (stable_hash64(name) % (1 << 24)) * 16


def _authenticates(value: int, ctx: int, key, layout) -> bool:
    try:
        return branch_to(pac_auth(value, ctx, key, layout), layout) is BranchOutcome.OK
    except AuthFault:
        return False


def simulate_replay(scn: Scenario, script=None) -> Outcome:
    """Sign every GEN pointer, let the attacker harvest all of them, substitute at every USE.

    ``script`` (a list of ``(use_site_name, slot_address)``) replaces the
    attacker's exhaustive substitution order, so a transcript can be replayed.
    """
    if scn.corpus is None:
        raise ValueError("replay needs a corpus")
    level = scn.defense.level
    corpus = scn.corpus.at(level)
    layout = scn.defense.layout()
    key = scn.key()
    tr = Transcript(limit=None)

    memory: dict[int, int] = {}
    signer: dict[int, tuple] = {}  # slot -> (gen site, pointer name, modifier): ground truth only
    slot = DATA_BASE
    for g in corpus.gen_sites:
        for ptr in (g.pointers or (f"{g.name}.target",)):
            mod = context_value(g, level)
            memory[slot] = pac_sign(function_address(ptr), mod, key, layout).value
            signer[slot] = (g, ptr, mod)
            tr.add("kernel", "sign", site=g.name, pointer=ptr, slot=f"{slot:#x}")
            slot += 8

    harvested = sorted(memory) if scn.capabilities.read_all else []
    tr.add("attacker", "harvest", count=len(harvested))

    uses = {u.name: u for u in corpus.use_sites}
    if script is None:
        plan = [(u.name, s) for u in corpus.use_sites for s in harvested] if scn.capabilities.write_all else []
    else:
        plan = [(name, int(s, 16) if isinstance(s, str) else s) for name, s in script]

    success_set, collisions, legitimate = set(), set(), set()
    for use_name, s in plan:
        u = uses[use_name]
        mod_u = context_value(u, level)
        ok = _authenticates(memory[s], mod_u, key, layout)
        g, ptr, mod_g = signer[s]
        tr.add("attacker", "substitute", use=use_name, slot=f"{s:#x}", result="ok" if ok else "fault")
        if not ok:
            continue
        pair = (use_name, s)
        if mod_g != mod_u:
            collisions.add(pair)  # PAC collision, not a context replay
            continue
        success_set.add(pair)
        if u.flow is not None and u.flow == g.flow:
            legitimate.add(pair)
    hijacks = success_set - legitimate

    # cross-EL forgery: user space signs the gadget under each public USE context with
    # its own key, which is the kernel key unless kernel and user keys are split
    user_key = invert_key(key) if scn.defense.key_split else key
    forged_uses = []
    if scn.capabilities.write_all:
        for u in corpus.use_sites:
            mod_u = context_value(u, level)
            ok = _authenticates(pac_sign(GADGET, mod_u, user_key, layout).value, mod_u, key, layout)
            tr.add("attacker", "user-forge", use=u.name, result="ok" if ok else "fault")
            if ok:
                forged_uses.append(u.name)
    per_use = {}
    for use_name, _ in sorted(success_set):
        per_use[use_name] = per_use.get(use_name, 0) + 1
    details = {
        "level": level.value,
        "pointers": len(memory),
        "use_sites": len(uses),
        "success_set": len(success_set),
        "legitimate": len(legitimate),
        "hijacks": len(hijacks),
        "collisions": len(collisions),
        "allowed_targets": sum(allowed_targets(corpus).values()),
        "per_use": per_use,
        "hijacked_uses": sorted({u for u, _ in hijacks}),
        "key_split": scn.defense.key_split,
        "cross_el_forgeries": len(forged_uses),
    }
    return Outcome("replay", bool(hijacks) or bool(forged_uses), attempts=len(plan), time=len(plan),
                   transcript=tr.freeze(), details=details)


def replay_script(outcome: Outcome) -> list[tuple[str, str]]:
    """The substitutions of a replay transcript, in order."""
    return [(dict(a.data)["use"], dict(a.data)["slot"]) for a in outcome.transcript if a.kind == "substitute"]
