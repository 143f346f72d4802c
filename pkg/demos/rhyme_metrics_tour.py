# A walk through the rhyme and beat metrics on a small synthetic corpus.
# Run with:  python3 demos/rhyme_metrics_tour.py

from rapgen import SynthSpec, generate_synthetic_corpus, render_song
from rapgen.metrics import (beat_interval_distributions, beat_intervals, combo_n, rhyme_density,
                            rhyme_repetition_rate, wasserstein_1d)

# %% a corpus whose rhyme structure we know in advance
spec = SynthSpec(n_songs=6, sentences_per_song=6, ngram=2, chain_length=3, beat_pattern=(2, 2, 4), seed=1)
corpus = generate_synthetic_corpus(spec)
print(render_song(corpus.songs[0]))   # '*' marks the word a beat lands on

# %% rhyme metrics vs the generator's own bookkeeping
print("RD     ", rhyme_density(corpus.songs, corpus.vowels), "truth", corpus.ground_truth["rd"])
for n in (1, 2, 3):
    print(f"Combo-{n}", combo_n(corpus.songs, corpus.vowels, n), "truth", corpus.ground_truth[f"combo{n}"])
print("repeat ", rhyme_repetition_rate(corpus.songs, corpus.vowels))

# %% beat intervals: words between consecutive beats, in generation order
print(beat_intervals(corpus.songs[0])[:10])
fod, sod = beat_interval_distributions(corpus.songs)
print("FOD", fod.as_dict())
print("SOD", sod.as_dict())

# a corpus with a different beat pattern sits some distance away
other = generate_synthetic_corpus(SynthSpec(n_songs=6, beat_pattern=(1, 3), seed=2))
fod2, sod2 = beat_interval_distributions(other.songs)
print("W1 FOD", wasserstein_1d(fod, fod2), " W1 SOD", wasserstein_1d(sod, sod2))
