"""Streaming: each chunk becomes readable a fixed number of rounds after the previous one."""
from fairp2p.protocols import SessionConfig
from fairp2p.simnet import run

# %% Decryption round of every chunk in a 16-chunk stream
tr = run(SessionConfig(n=16, eta=64, price_p=10, price_c=30, mode="stream"), seed=2)
rounds = [tr.decrypt_rounds["C"][i] for i in range(1, 17)]
print("decrypted at rounds:", rounds)
print("gaps:", sorted({b - a for a, b in zip(rounds, rounds[1:])}))

# %% Halting time grows linearly with n in both modes
for mode in ("download", "stream"):
    for n in (8, 64, 256):
        tr = run(SessionConfig(n=n, eta=64, price_p=10, price_c=30, mode=mode), seed=n)
        print(f"{mode:8s} n={n:3d}: all parties halted by round {max(tr.halt_rounds.values())}")
