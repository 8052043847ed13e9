"""How many key-tree nodes does the provider reveal after ctr chunks?"""
from fairp2p.keytree import gen_sub_keys, leaf_span, recover_keys, reveal_keys

mk = b"\x07" * 32

# %% With 8 chunks, delivering 7 needs three nodes: one for 1-4, one for 5-6, the leaf for 7
for ctr in (7, 8):
    rk = reveal_keys(8, ctr, mk)
    spans = [leaf_span(8, p) for p in rk.positions]
    chunks = [(lo - 6, hi - 6) for lo, hi in spans]
    print(f"ctr={ctr}: positions {rk.positions}, chunk ranges {chunks}")

# %% The revealed nodes expand back into exactly the first ctr leaf keys
kt = gen_sub_keys(8, mk)
print("recovers leaf keys:", recover_keys(8, 7, reveal_keys(8, 7, mk)) == kt[7:14])

# %% Reveal size follows the number of set bits in ctr, never above log2(n)
n = 1024
sizes = [len(reveal_keys(n, ctr, mk)) for ctr in range(1, n + 1)]
print(f"n={n}: largest reveal {max(sizes)} nodes, average {sum(sizes) / n:.2f}")
