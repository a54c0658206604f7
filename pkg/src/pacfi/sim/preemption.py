"""Abusing preemption-context signing as a signing oracle.

The attacker makes the kernel save (and sign) a context whose x0 holds an
attacker-chosen pointer, reads the signed save area back, and writes it over a
later context saved on the same kernel stack. The kernel's restore path then
verifies the forged area against that later save's trusted timestamp.
"""

from __future__ import annotations

import random
from dataclasses import replace

from pacfi.pa.model import KeyRole
from pacfi.pa.schemes import NUM_GPRS, ContextScheme, PreemptionContext, sign_context, verify_context
from pacfi.sim.scenario import GADGET, TEXT_BASE, Outcome, Scenario, Transcript

X0_CHAIN_INDEX = NUM_GPRS + 1  # position of x0 in the chain order spsr, elr, x30 .. x0


def _kernel_text(rng: random.Random) -> int:
    return TEXT_BASE + rng.randrange(1 << 20) * 4


def _saved_context(rng: random.Random, base: int, x0: int) -> PreemptionContext:
    regs = [_kernel_text(rng) if i in (29, 30) else rng.getrandbits(64) for i in range(NUM_GPRS)]
    regs[0] = x0
    return PreemptionContext.from_values(base, regs, elr=_kernel_text(rng), spsr=0x3C5)


def _selective_forgery(victim: PreemptionContext, leaked: PreemptionContext,
                       scheme: ContextScheme) -> PreemptionContext:
    """Victim area with only x0 (and, per-register, its signature) swapped in."""
    forged = victim.with_reg(0, leaked.regs[0])
    if scheme is ContextScheme.INDEPENDENT:
        pacs = list(victim.reg_pacs)
        pacs[X0_CHAIN_INDEX] = leaked.reg_pacs[X0_CHAIN_INDEX]
        forged = replace(forged, reg_pacs=tuple(pacs))
    return forged


def simulate_signing_oracle_preemption(scn: Scenario) -> Outcome:
    rng = random.Random(f"preempt:{scn.seed}")
    key = scn.key(KeyRole.APGA)
    scheme = scn.defense.preempt_scheme
    layout = scn.defense.layout()
    tr = Transcript(limit=None)
    base = 0xFFFF_8000_4000_0000 + rng.randrange(1 << 16) * 0x4000  # kernel stack of the thread
    clock = rng.randrange(1, 1 << 32)

    # step 1: attacker-chosen pointer sits in x0 when the thread is preempted
    t_attack = clock
    chosen = _saved_context(rng, base, GADGET)
    tr.add("attacker", "plant", register="x0", value=f"{GADGET:#x}")
    # step 2: the interrupt path signs that context (fixed interleaving point: the nested
    # exception arrives right after the save area is written)
    leaked = sign_context(chosen, key, scheme, t_attack, layout)
    tr.add("kernel", "sign-context", scheme=scheme.value, base=f"{base:#x}", timestamp=t_attack)
    if not scn.capabilities.read_all:
        return Outcome("preemption", False, attempts=0, transcript=tr.freeze(),
                       details={"scheme": scheme.value, "reason": "attacker cannot read the save area"})
    # step 3: read the spilled, signed save area
    tr.add("attacker", "read-save-area", base=f"{base:#x}")

    # a later, legitimate preemption of the same thread
    clock += rng.randrange(1, 1 << 16)
    t_victim = clock
    victim = sign_context(_saved_context(rng, base, _kernel_text(rng)), key, scheme, t_victim, layout)
    tr.add("kernel", "sign-context", scheme=scheme.value, base=f"{base:#x}", timestamp=t_victim)

    # step 4: substitute and let the kernel restore
    attempts = 0
    won = None
    for strategy, forged in (("selective-swap", _selective_forgery(victim, leaked, scheme)),
                             ("whole-area-replay", leaked)):
        if not scn.capabilities.write_all:
            break
        attempts += 1
        accepted = verify_context(forged, key, scheme, t_victim, layout)
        tr.add("attacker", "substitute", strategy=strategy, accepted=accepted)
        if accepted and forged.regs[0] == GADGET:
            won = strategy
            tr.add("kernel", "restore", x0=f"{forged.regs[0]:#x}")
            break
        tr.add("kernel", "reject", strategy=strategy)
    details = {"scheme": scheme.value, "timebind": scheme is ContextScheme.TIMEBIND,
               "winning_strategy": won, "interleaving": "after-save"}
    return Outcome("preemption", won is not None, attempts=attempts, time=t_victim - t_attack,
                   transcript=tr.freeze(), details=details)
