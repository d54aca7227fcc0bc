# %% [markdown]
# # Registering and auditing on a four-node network
#
# A `Deployment` runs four PBFT replicas in a deterministic simulator and
# drives them through the same argparse client a terminal user gets.

# %%
from synthrank.experiments.corpus import load_corpus
from synthrank.experiments.harness import Deployment, documents
from synthrank import canonical
from synthrank.ledger import make_address

corpus = load_corpus()
docs = documents(corpus, "correctness")
dep = Deployment(seed=0)

# %%
for verb in ("qi", "cw", "wmp", "wmm", "method"):
    key = "data_scientist" if verb == "method" else "product_manager"
    code, text = dep.cli(verb, dep.write_file(verb, docs[verb]), "--key", key)
    print(verb, code, text.strip())

# %% [markdown]
# A wrong role is refused by every replica, not just the one we talk to.

# %%
code, text = dep.cli("cw", dep.write_file("cw", docs["cw"]), "--key", "auditor", check=False)
print(code, text.strip())

# %%
dep.compute(sorted(docs["cw"]))
print(dep.cli("ranks")[1])

# %% [markdown]
# The auditor resubmits the source files; processors recompute everything
# and compare with what is on chain.

# %%
print(dep.audit(docs)[1])

# %%
dep.settle()
print(dep.honest_roots())

# %% [markdown]
# Now alter a stored weight behind the ledger's back and audit again.

# %%
dep.settle()
addr = make_address("wm_plus", "A")
stored = canonical.decode(dep.network.nodes[0].state.get(addr))
stored["weights"]["PCD"] = 0.5
dep.network.tamper_state(addr, canonical.encode(stored))
print(dep.audit(docs, check=False)[1])
dep.close()
