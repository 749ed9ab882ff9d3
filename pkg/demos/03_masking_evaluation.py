# # Latent aspect evaluation by masking
#
# Gold aspect words are deleted from a growing share of test reviews, and
# we measure whether the model still ranks an aspect containing the gold
# word near the top. A tiny taxonomy lets an out-of-vocabulary gold word
# ("sushi") count through its most similar vocabulary word.

# %%
from latent_aspects.corpus import PreprocessConfig, build_corpus, default_stopwords, preprocess
from latent_aspects.evaluation import LabeledReview, summary_csv, sweep_masking
from latent_aspects.sampler import train
from latent_aspects.similarity import Taxonomy, nearest_in_vocab

reviews = [
    "Great food and a tasty menu", "The menu had good food", "Food was tasty and fresh",
    "Staff were rude and service slow", "Friendly staff, quick service", "The service staff smiled",
    "Free wifi at the bar", "The bar wifi was slow", "Wifi and bar drinks all night",
] * 10
config = PreprocessConfig(stopwords=default_stopwords())
corpus = build_corpus(reviews, config)
model = train(corpus, K=3, iterations=300, burn_in=100, seed=0)
for k, row in enumerate(model.top_words(4)):
    print(k, [corpus.vocabulary.words[w] for w, _ in row])

# %%
taxonomy = Taxonomy(
    freq={"entity": 0, "food": 2, "sushi": 3, "dish": 5, "service": 10},
    parents={"food": ["entity"], "sushi": ["food"], "dish": ["food"], "service": ["entity"]},
    word_to_concepts={"food": ["food"], "sushi": ["sushi"], "dish": ["dish"],
                      "servic": ["service"], "staff": ["service"]},
)
print(nearest_in_vocab(taxonomy, "sushi", corpus.vocabulary))

# %%
def labeled(rid, text, gold):
    return LabeledReview(rid, preprocess(text, config), [" ".join(preprocess(g, config)) for g in gold], text)

testset = [
    labeled("a", "The sushi was tasty", ["sushi"]),
    labeled("b", "Rude staff all night", ["staff"]),
    labeled("c", "Slow wifi but a fine bar", ["wifi", "bar"]),
    labeled("d", "A good menu", ["menu"]),
    labeled("e", "Quick friendly service", ["service"]),
]
reports = sweep_masking(model, testset, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], taxonomy=taxonomy, seed=0)
print(summary_csv(reports))

# %% [markdown]
# At fraction 0 the gold words are still in the text, so this measures
# explicit aspect detection. At 1.0 every gold word is gone and only the
# surrounding context can point at the aspect.
