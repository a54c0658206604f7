"""PAC guessing against a fixed USE context, with optional back-off."""

from __future__ import annotations

import math

import numpy as np

from pacfi.pa.backoff import BackoffTable, backoff_gate, expected_bruteforce_attempts
from pacfi.pa.model import AuthFault, BranchOutcome, branch_to, compute_pac, pac_auth
from pacfi.pa.schemes import stable_hash64
from pacfi.sim.scenario import GADGET, Outcome, Scenario, Transcript


def _context(scn: Scenario) -> int:
    return int(scn.params.get("context", stable_hash64("bruteforce:use-site")))


def _guess_order(seed: int, trial: int, bits: int) -> np.ndarray:
    return np.random.default_rng([seed, trial]).permutation(1 << bits)


def _correct_field(scn: Scenario, ctx: int) -> int:
    layout = scn.defense.layout()
    pac = compute_pac(GADGET, ctx, scn.key(), layout)
    return pac ^ layout.extract_pac(GADGET) if layout.enhanced_pac2 else pac


def _slow_trial(scn: Scenario, ctx: int, guesses, table: BackoffTable | None, tr: Transcript):
    """Write each guess into the target slot and let the kernel authenticate it."""
    layout = scn.defense.layout()
    key = scn.key()
    attempts, elapsed, waited = 0, 0, 0
    for g in guesses:
        if scn.max_attempts is not None and attempts >= scn.max_attempts:
            break
        attempts += 1
        forged = layout.deposit_pac(GADGET, int(g))
        try:
            ok = branch_to(pac_auth(forged, ctx, key, layout), layout) is BranchOutcome.OK
        except AuthFault:
            ok = False
        delay = backoff_gate(table, ctx, ok) if table is not None else 0
        waited += delay
        elapsed += delay + 1
        tr.add("attacker", "guess", pac=int(g), result="ok" if ok else "fault", delay=delay)
        if ok:
            return True, attempts, elapsed, waited
    return False, attempts, elapsed, waited


def simulate_bruteforce(scn: Scenario, script=None, slow: bool = False) -> Outcome:
    """Guess PAC values without replacement until the forged pointer authenticates.

    Each trial enumerates a seeded permutation of the PAC space. Without
    back-off the attempt count is the position of the correct code in that
    permutation; ``slow=True`` (or back-off, or a ``script`` of guesses) runs
    every guess through the authentication model instead.
    """
    bits = scn.defense.pac_bits
    ctx = _context(scn)
    tr = Transcript()
    correct = _correct_field(scn, ctx)
    per_trial, times, delays, wins = [], [], [], 0
    for t in range(scn.trials):
        table = BackoffTable(scn.defense.base_delay) if scn.defense.backoff else None
        if script is not None:
            ok, n, elapsed, waited = _slow_trial(scn, ctx, script, table, tr)
        else:
            order = _guess_order(scn.seed, t, bits)
            if slow or table is not None:
                ok, n, elapsed, waited = _slow_trial(scn, ctx, order, table, tr)
            else:
                pos = int(np.flatnonzero(order == correct)[0]) + 1
                limit = scn.max_attempts
                ok = limit is None or pos <= limit
                n = pos if ok else limit
                elapsed, waited = n, 0
        per_trial.append(n)
        times.append(elapsed)
        delays.append(waited)
        wins += ok
        tr.add("attacker", "trial", trial=t, attempts=n, success=bool(ok))
    total_time = sum(times)
    details = {
        "pac_bits": bits,
        "trials": scn.trials,
        "successes": wins,
        "mean_attempts": sum(per_trial) / len(per_trial) if per_trial else 0.0,
        "expected_attempts": expected_bruteforce_attempts(bits),
        "max_attempts": max(per_trial, default=0),
        "backoff": scn.defense.backoff,
        "backoff_delay": str(sum(delays)) if sum(delays).bit_length() > 53 else sum(delays),
        "log2_time": math.log2(total_time) if total_time else 0.0,
        "transcript_dropped": tr.dropped,
    }
    if scn.trials <= 1000:
        details["attempts_per_trial"] = per_trial
    return Outcome("bruteforce", wins > 0, attempts=sum(per_trial), time=total_time,
                   transcript=tr.freeze(), details=details)


def guess_script(outcome: Outcome) -> list[int]:
    return [dict(a.data)["pac"] for a in outcome.transcript if a.kind == "guess"]
