"""Rhyme- and beat-aware rap lyric modelling on numpy."""
__version__ = "0.1.0"

from .align import (AlignmentResult, FrequencyThresholds, TimedBeat, TimedWord, align_beats, align_file,
                    align_song, beat_frequency, parse_timestamps)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .corpus import (BEAT, PAD, SEP, START, EncodeConfig, FeatureSequence, FreqLabel, Sentence, Song,
                     StructureError, Vocab, decode_sequence, encode_corpus, encode_training_sequence,
                     parse_corpus, parse_song, read_corpus, render_corpus, render_song, write_corpus)
from .decode import (GenControls, GenerationError, RhymeState, adjusted_distribution, constraint_active,
                     generate, generate_many, generate_transcripts, update_rhyme_state)
from .metrics import (IntervalDistribution, MetricsReport, beat_accuracy, beat_interval_distributions,
                      beat_intervals, combo_n, evaluate, rhyme_accuracy, rhyme_density, rhyme_repetition_rate,
                      wasserstein_1d)
from .model import (ConfigError, ModelConfig, TrainConfig, TrainingError, TransformerLM, init_model,
                    mean_nll, perplexity, train)
from .synth import SynthSpec, frequency_corpus, generate_synthetic_corpus
from .vowel import (NULL_VOWEL, VowelDictionary, builtin_dictionary, load_dictionary, same_rhyme, vowel_of)
