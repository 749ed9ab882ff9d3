# # Choosing the number of aspects by coherence
#
# A corpus with six planted aspects is trained at several K and each model
# is scored by mean UMass coherence over its top words.

# %%
from latent_aspects.model_selection import coherence_csv, sweep_k
from latent_aspects.synthetic import PER_WORD, disjoint_phi, generate

corpus, _ = generate(6, 60, 400, 30, 5 / 6, 0.01, PER_WORD, seed=1, phi=disjoint_phi(6, 60))

# %%
# Short chains keep the demo quick. Each planted aspect has ten words, so
# ten top words per aspect are scored.
results = sweep_k(corpus, [2, 4, 6, 8, 10], seed=0, top_m=10,
                  iterations=300, burn_in=100, sample_lag=10)
print(coherence_csv(results))

# %% [markdown]
# Coherence climbs until K reaches the planted count and then flattens:
# extra aspects split real ones and their top words still co-occur. Picking
# K from the curve is left to the reader, as with any elbow plot.

# %%
scores = [r.mean_coherence for r in results]
lo, hi = min(scores), max(scores)
for r in results:
    bar = "#" * (1 + int(40 * (r.mean_coherence - lo) / (hi - lo)))
    print(f"K={r.K:>2} {r.mean_coherence:9.3f} {bar}")
