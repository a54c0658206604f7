"""Quick end-to-end check of golden vectors and shipped fixtures."""

from __future__ import annotations

import json
from importlib import resources

from pacfi.analyzer import annotate, estimate_diversity_score, parse_ir
from pacfi.asm import parse_listing
from pacfi.pa.model import KeyRole, PaKey, pac_sign
from pacfi.pa.schemes import ContextScheme
from pacfi.pa.siphash import siphash24
from pacfi.resources import read_fixture
from pacfi.sim import Defense, Scenario, simulate
from pacfi.validator import validate_image


def _data(name: str) -> dict:
    return json.loads(resources.files("pacfi").joinpath("data", name).read_text(encoding="utf-8"))


def _siphash():
    vec = _data("siphash_vectors.json")
    key = int.from_bytes(bytes.fromhex(vec["key"]), "little")
    bad = [n for n, d in enumerate(vec["digests_u64"]) if siphash24(key, bytes(range(n))) != int(d, 16)]
    return not bad, f"{len(vec['digests_u64']) - len(bad)}/{len(vec['digests_u64'])} digests"


def _pac_golden():
    cases = _data("pac_golden.json")["cases"]
    ok = sum(
        pac_sign(int(c["ptr"], 16), int(c["ctx"], 16), PaKey.from_seed(c["key_seed"], KeyRole(c["role"]))).value
        == int(c["signed"], 16)
        for c in cases
    )
    return ok == len(cases), f"{ok}/{len(cases)} signed pointers"


def _validator_patterns():
    counts = validate_image(parse_listing(read_fixture("validator-ex.s"))).counts()
    want = {"P1": {"Definite": 1, "Potential": 0}, "P2": {"Definite": 1, "Potential": 0},
            "P3": {"Definite": 1, "Potential": 2}, "P4": {"Definite": 0, "Potential": 0}}
    return counts == want, json.dumps(counts, sort_keys=True)


def _validator_clean():
    n = {f: len(validate_image(parse_listing(read_fixture(f))).findings)
         for f in ("validator-ex-repaired.s", "clean-blraa.s", "el1_irq.s")}
    return not any(n.values()), ", ".join(f"{k}={v}" for k, v in n.items())


def _diversity():
    ds = estimate_diversity_score(parse_ir(read_fixture("objbind.ir")), "s1", "p").ds
    caps = [estimate_diversity_score(parse_ir(read_fixture("depth6.ir")), "deep", "cb", cap).ds for cap in range(1, 7)]
    mono = all(a <= b for a, b in zip(caps, caps[1:]))
    return ds == 3 and mono, f"s1.p ds={ds}; depth caps 1..6 -> {caps}"


def _annotations():
    irq = annotate(parse_ir(read_fixture("irqaction.ir")), 5).text().strip()
    kref = annotate(parse_ir(read_fixture("kref.ir")), 5).text().strip()
    ok = irq == "irqaction: objbind(name, handler)" and kref == "kref_put: retbind(release)"
    return ok, f"{irq!r}; {kref!r}"


def _preemption():
    res = {s.value: simulate(Scenario("preemption", seed=1, defense=Defense(preempt_scheme=s))).success
           for s in ContextScheme}
    return res == {"independent": True, "base-chain": True, "timebind": False}, json.dumps(res, sort_keys=True)


def _toctou():
    listing = read_fixture("toctou.s")
    res = {fn: simulate(Scenario("toctou", listing=listing, function=fn)).success
           for fn in ("spill_reload", "spill_reload_repaired")}
    return res == {"spill_reload": True, "spill_reload_repaired": False}, json.dumps(res, sort_keys=True)


def _bruteforce():
    out = simulate(Scenario("bruteforce", seed=0, trials=100, defense=Defense(pac_bits=4)))
    d = out.details
    return d["successes"] == 100 and d["max_attempts"] <= 16, f"mean {d['mean_attempts']:.2f}, max {d['max_attempts']}"


CHECKS = [
    ("siphash-2-4 reference vectors", _siphash),
    ("pac golden vectors", _pac_golden),
    ("validator violation patterns", _validator_patterns),
    ("validator repaired listings", _validator_clean),
    ("diversity score fixtures", _diversity),
    ("annotation placement", _annotations),
    ("preemption signing oracle", _preemption),
    ("toctou spill", _toctou),
    ("4-bit brute force", _bruteforce),
]


def run_selftest() -> list[dict]:
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check()
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": bool(passed), "detail": detail})
    return results
