"""Walk through one honest download session and look at who paid whom."""
from fairp2p.protocols import SessionConfig, pad_content
from fairp2p.simnet import run

# %% Some content: a short text, padded into 64-byte chunks
text = ("Chunks travel through a deliverer who never sees plaintext. " * 6).encode()
chunks, n, size = pad_content(text, 64)
print(f"{size} bytes -> {n} chunks of 64 bytes")

# %% Prices: the deliverer earns 10 per chunk, the consumer pays 30 per chunk
cfg = SessionConfig(n=n, eta=64, price_p=10, price_c=30)
tr = run(cfg, seed=1, content=chunks)

# %% Everyone halted, the contract sold all chunks
print("rounds:", tr.rounds, "halted at:", tr.halt_rounds)
print("settlement:", tr.settlements[0])

# %% Balance changes: C pays n*30, D earns n*10, P keeps the difference
for party in ("P", "D", "C"):
    print(f"  {party}: {tr.delta(party):+d}")

# %% The consumer recovered exactly the padded content
recovered = b"".join(tr.outputs["C"])[:size]
print("content recovered:", recovered == text)

# %% Contract traffic, by transaction kind
print("on-chain calls:", tr.contract_counters["by_kind"])
print("on-chain bytes this session:", tr.settlements[0]["onchain_bytes"])
