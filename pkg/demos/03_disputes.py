"""Cheating providers get caught by the contract; honest parties keep their money."""
from fairp2p.adversary import AdversarySpec
from fairp2p.protocols import SessionConfig
from fairp2p.simnet import check_invariants, run


def corrupt(party, **deviation):
    return AdversarySpec.from_dict({"corrupted": [party], "deviations": {party: deviation}})


cases = [
    ("download", "provider encrypts chunk 3 under an off-tree key", corrupt("P", wrong_key=3)),
    ("download", "provider reveals keys for one chunk too few", corrupt("P", short_reveal=True)),
    ("download", "consumer files a complaint against good content", corrupt("C", false_pom=True)),
    ("stream", "provider hands over a wrong key for chunk 2", corrupt("P", wrong_key=2)),
    ("stream", "consumer stops acknowledging after chunk 4", corrupt("C", withhold_from=5)),
]

# %% Run each case and show the settlement and balance changes
for mode, story, spec in cases:
    cfg = SessionConfig(n=8, eta=64, price_p=10, price_c=30, mode=mode)
    tr = run(cfg, spec, seed=3)
    s = tr.settlements[0]
    verdicts = check_invariants(tr, cfg, spec)
    print(f"[{mode}] {story}")
    print(f"    outcome {s['outcome']} ctr={s['ctr']} penalized={s['penalized']}")
    print("    deltas", {p: tr.delta(p) for p in ("P", "D", "C")})
    print(f"    {sum(v.passed for v in verdicts)}/{len(verdicts)} invariants hold")
