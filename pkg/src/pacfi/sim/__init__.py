"""Attack simulation against the PA model."""

from pacfi.sim.bruteforce import guess_script, simulate_bruteforce
from pacfi.sim.preemption import simulate_signing_oracle_preemption
from pacfi.sim.replay import function_address, replay_script, simulate_replay
from pacfi.sim.scenario import (
    ATTACKS, GADGET, TEXT_BASE, Action, Capabilities, Defense, Outcome, Scenario, Transcript,
    load_scenario,
)
from pacfi.sim.toctou import Machine, SimError, simulate_toctou


def simulate(scn: Scenario, **kw) -> Outcome:
    """Run the attack named by ``scn.attack``."""
    if scn.attack == "replay":
        return simulate_replay(scn, **kw)
    if scn.attack == "bruteforce":
        return simulate_bruteforce(scn, **kw)
    if scn.attack == "preemption":
        return simulate_signing_oracle_preemption(scn)
    return simulate_toctou(scn)


def replay_transcript(scn: Scenario, outcome: Outcome) -> Outcome:
    """Re-run ``scn`` driven by the attacker actions recorded in ``outcome``."""
    if scn.attack == "replay":
        return simulate_replay(scn, script=replay_script(outcome))
    if scn.attack == "bruteforce":
        return simulate_bruteforce(scn, script=guess_script(outcome))
    return simulate(scn)


__all__ = [
    "ATTACKS", "GADGET", "TEXT_BASE", "Action", "Capabilities", "Defense", "Machine", "Outcome",
    "Scenario", "SimError", "Transcript", "function_address", "guess_script", "load_scenario",
    "replay_script", "replay_transcript", "simulate", "simulate_bruteforce", "simulate_replay",
    "simulate_signing_oracle_preemption", "simulate_toctou",
]
