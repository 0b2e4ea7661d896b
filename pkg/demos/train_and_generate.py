#!/usr/bin/env python3
"""End-to-end walk through the library API on the bundled toy data.

Trains the topic detector on keyword-disjoint articles, checks its
paragraph assignments against the gold ones, overfits the abstract
generator on the 20-example toy corpus, generates abstracts in both
topic-mixing modes, scores them with ROUGE, and round-trips the model
through a checkpoint file.
"""

import tempfile
from pathlib import Path

import numpy as np

from topicsum.checkpoint import load_into, save_tensors
from topicsum.corpus import article_token_sequences, build_detector_dataset
from topicsum.detector import DetectorModel, MeanEmbeddingEncoder, detect_topics, train_detector
from topicsum.generator import DecodeConfig, GeneratorModel, generate_abstract, train_generator
from topicsum.rouge import evaluate_corpus
from topicsum.synthetic import toy_detector_articles, toy_schema, toy_summarization_corpus
from topicsum.text import Vocabulary

# ---------------------------------------------------------------------------
# 1. topic detector on keyword-disjoint articles

print("== detector ==")
articles = toy_detector_articles(n_articles=120, seed=0)
schema = toy_schema()
vocab = Vocabulary.build(article_token_sequences(articles), cap=500)
splits = build_detector_dataset(articles, schema, vocab, seed=42)
print(f"paragraph examples: train={len(splits.train)} "
      f"valid={len(splits.valid)} test={len(splits.test)}")

rng = np.random.default_rng(0)
encoder = MeanEmbeddingEncoder(len(vocab), embed_dim=32, output_dim=32, rng=rng)
detector = DetectorModel(encoder, n_classes=len(schema.topics) + 1, rng=rng)
for row in train_detector(detector, splits.train, splits.valid, epochs=4, lr=3e-5):
    print(f"epoch {row['epoch']}  train_loss={row['train_loss']:.4f}  "
          f"valid_accuracy={row['valid_accuracy']:.3f}")

# ---------------------------------------------------------------------------
# 2. detected topic assignments vs. the gold ones

corpus = toy_summarization_corpus(n_examples=20, seed=0)
hits = 0
total = 0
for example, gold in zip(corpus.examples, corpus.assignments):
    # the detector reads ids from its own (article) vocabulary
    ids = [vocab.encode(p) for p in example.paragraph_tokens]
    detected = detect_topics(ids, detector)
    hits += sum(1 for d, g in zip(detected, gold) if d == g)
    total += len(gold)
print(f"detected assignments match gold on {hits}/{total} paragraphs")

# ---------------------------------------------------------------------------
# 3. overfitting the generator on the toy corpus

print()
print("== generator ==")
model = GeneratorModel(len(corpus.vocab), len(corpus.schema.topics),
                       embed_dim=48, hidden_dim=64, seed=0)
history = train_generator(model, corpus.examples, corpus.assignments, [], [],
                          corpus.schema, corpus.vocab, epochs=60,
                          lr_first=2e-3, lr_rest=2e-3, seed=0)
for row in history[::12] + [history[-1]]:
    print(f"epoch {row['epoch']:2d}  train_loss={row['train_loss']:.4f}  "
          f"sentence_nll={row['train_nll']:.4f}")

# ---------------------------------------------------------------------------
# 4. generation in both topic-mixing modes

gold_abstracts = [example.abstract_tokens for example in corpus.examples]
for mode in ("soft", "hard"):
    config = DecodeConfig(topic_mode=mode, beam_size=1,
                          max_sentences=6, max_sentence_tokens=10)
    generated = [generate_abstract(model, ex.paragraph_tokens, assignment,
                                   corpus.schema, corpus.vocab, config)
                 for ex, assignment in zip(corpus.examples, corpus.assignments)]
    report = evaluate_corpus(generated, gold_abstracts)
    print(f"{mode:4s} mode: ROUGE-1={report.mean_rouge_1:.3f}  "
          f"ROUGE-2={report.mean_rouge_2:.3f}  ROUGE-L={report.mean_rouge_l:.3f}")

config = DecodeConfig(topic_mode="soft", beam_size=1,
                      max_sentences=6, max_sentence_tokens=10)
sample = generate_abstract(model, corpus.examples[0].paragraph_tokens,
                           corpus.assignments[0], corpus.schema, corpus.vocab, config)
print("sample abstract for", corpus.examples[0].title)
for sentence in sample:
    print("   ", " ".join(sentence))

# ---------------------------------------------------------------------------
# 5. checkpoint round trip

print()
print("== checkpoint ==")
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "generator.ckpt"
    save_tensors(path, model.parameters())
    clone = GeneratorModel(len(corpus.vocab), len(corpus.schema.topics),
                           embed_dim=48, hidden_dim=64, seed=123)
    load_into(clone.parameters(), path)
    regenerated = generate_abstract(clone, corpus.examples[0].paragraph_tokens,
                                    corpus.assignments[0], corpus.schema,
                                    corpus.vocab, config)
    print(f"saved {path.stat().st_size} bytes, "
          f"reloaded abstract identical: {regenerated == sample}")
