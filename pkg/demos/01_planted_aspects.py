# # Recovering planted aspects
#
# We sample a synthetic corpus from four aspects with disjoint vocabularies,
# train the Gibbs sampler on it and check how close each learned word
# distribution is to the planted one.

# %%
import numpy as np

from latent_aspects import train
from latent_aspects.synthetic import PER_WORD, disjoint_phi, generate

corpus, truth = generate(K=4, V=40, n_docs=500, doc_len=40, alpha=5 / 4, beta=0.01,
                         mode=PER_WORD, seed=0, phi=disjoint_phi(4, 40))
print(len(corpus), "reviews,", corpus.n_tokens, "tokens,", len(corpus.vocabulary), "words")

# %% [markdown]
# Each aspect puts mass 1/10 on its own block of ten words. The prior on
# the review mixtures is 5/K, the sampler's default.

# %%
model = train(corpus, K=4, seed=0)

# %%
# Total variation distance between every learned and planted row.
planted = truth.phi_for(corpus.vocabulary)
tv = 0.5 * np.abs(model.phi[:, None, :] - planted[None, :, :]).sum(axis=2)
print(np.round(tv, 3))

# Learned aspects come out in arbitrary order; the closest planted row is
# the match.
for k, row in enumerate(tv):
    print(f"aspect {k} -> planted {row.argmin()}  (TV {row.min():.3f})")

# %%
for k, words in enumerate(model.top_words(5)):
    print(k, [corpus.vocabulary.words[w] for w, _ in words])
