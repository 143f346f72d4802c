# Train a desk-size model on synthetic rhymes, then generate with and without the rhyme constraint.
# Takes a minute or two on a laptop CPU.  python3 demos/train_and_generate.py

import time

from rapgen import (EncodeConfig, GenControls, ModelConfig, SynthSpec, TrainConfig, TransformerLM, Vocab,
                    encode_corpus, generate_many, generate_synthetic_corpus, perplexity, render_song, train)
from rapgen.metrics import combo_n, rhyme_accuracy

corpus = generate_synthetic_corpus(SynthSpec(n_songs=30, sentences_per_song=5, chain_length=2, ngram=1, seed=3))
vocab = Vocab.from_songs(corpus.songs)
seqs = encode_corpus(corpus.songs, corpus.vowels, vocab, EncodeConfig())
print(len(vocab), "tokens in vocabulary,", sum(s.n_real for s in seqs), "training tokens")

# %% training (reverse-order streams, five summed embeddings)
model = TransformerLM.init(ModelConfig.desk(len(vocab), corpus.vowels.n_vowels), 0)
print(model.n_parameters(), "parameters")
t0 = time.time()
model, report = train(model, seqs, TrainConfig(max_steps=1500, seed=1), vocab.pad)
print(f"loss {report.losses[0]:.3f} -> {report.final_loss:.3f} in {time.time() - t0:.0f}s")
print("PPL", perplexity(model, seqs, vocab.pad))
print("RA ", rhyme_accuracy(model, seqs, vocab, vocab.token_vowels(corpus.vowels), vocab.pad))

# %% generation; alpha=0 forces every sentence to rhyme with the one before
for constrain in (True, False):
    songs = []
    for i, song in enumerate(corpus.songs[:10]):
        controls = GenControls(song.sentences[0], n_sentences=6, mode="argmax", alpha=0.0,
                               constrain=constrain, rng_seed=i)
        songs += generate_many(model, vocab, corpus.vowels, controls, 1)
    print("constrained" if constrain else "free", "Combo-1", combo_n(songs, corpus.vowels, 1))
    print(render_song(songs[0]))
