"""Topic-grouped encoding and pointer-generator abstract decoding.

The pipeline per article: paragraphs are grouped by their detected topic
(NOISE dropped, each group truncated), a BiGRU encodes every group into
per-token states and one group vector, a recurrent topic predictor walks
sentence by sentence (emitting a stop probability and a topic-mixed
decoder initialization), and a pointer-generator GRU decodes each sentence
with attention over all group token states, able to copy out-of-vocabulary
input tokens through extended ids.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .corpus import SummarizationExample, TopicSchema
from .text import BOS_ID, EOS_ID, UNK_ID, Vocabulary

__all__ = [
    "DecodeConfig",
    "TopicGroup",
    "TopicGroups",
    "group_paragraphs",
    "GRUCell",
    "GeneratorModel",
    "TopicEncoding",
    "encode_topics",
    "TopicStep",
    "predict_topic_step",
    "attention_step",
    "token_distribution",
    "decode_sentence",
    "generate_abstract",
    "teacher_forced_outputs",
    "compute_losses",
    "example_loss",
    "train_generator",
    "init_embeddings",
]

logger = logging.getLogger(__name__)


@dataclass
class DecodeConfig:
    """Knobs shared by generation and training-time decoding."""

    topic_mode: str = "soft"
    stop_threshold: float = 0.5
    max_sentences: int = 10
    max_sentence_tokens: int = 60
    beam_size: int = 5
    ttg_cap: int = 400

    def __post_init__(self):
        if self.topic_mode not in ("soft", "hard"):
            raise ValueError(f"topic_mode must be 'soft' or 'hard', got '{self.topic_mode}'")
        if not 0.0 < self.stop_threshold < 1.0:
            raise ValueError(f"stop_threshold must lie in (0, 1), got {self.stop_threshold}")
        if self.max_sentences < 1 or self.max_sentence_tokens < 1:
            raise ValueError("sentence and token caps must be at least 1")
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be at least 1, got {self.beam_size}")
        if self.ttg_cap < 1:
            raise ValueError(f"ttg_cap must be at least 1, got {self.ttg_cap}")


# ---------------------------------------------------------------------------
# topic grouping

@dataclass
class TopicGroup:
    """All input tokens assigned to one topic, in input order."""

    tokens: list[str]
    token_ids: list[int]       # vocabulary ids, OOV as UNK
    extended_ids: list[int]    # vocabulary ids, OOV mapped past the vocab end

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class TopicGroups:
    """One TopicGroup per schema topic plus the example's OOV token list."""

    groups: list[TopicGroup]
    oov_tokens: list[str]
    vocab_size: int

    @property
    def extended_size(self) -> int:
        return self.vocab_size + len(self.oov_tokens)

    @property
    def total_tokens(self) -> int:
        return sum(len(g) for g in self.groups)

    def target_id(self, token: str, vocab: Vocabulary) -> int:
        """Gold-side encoding: vocab id, else this example's extended id,
        else UNK (the token is absent from both vocab and input)."""
        if token in vocab:
            return vocab.token_to_id(token)
        try:
            return self.vocab_size + self.oov_tokens.index(token)
        except ValueError:
            return UNK_ID


def group_paragraphs(paragraphs: Sequence[Sequence[str]], assignments: Sequence[int],
                     schema: TopicSchema, vocab: Vocabulary, cap: int = 400) -> TopicGroups:
    """Concatenate paragraphs per assigned topic, drop NOISE, truncate each
    group to `cap` tokens, and assign extended ids to OOV input tokens."""
    if len(paragraphs) != len(assignments):
        raise ValueError(f"{len(paragraphs)} paragraphs but {len(assignments)} topic assignments")
    if cap < 1:
        raise ValueError(f"truncation cap must be at least 1, got {cap}")
    n_topics = len(schema.topics)
    noise = schema.noise_index
    buckets: list[list[str]] = [[] for _ in range(n_topics)]
    for tokens, topic in zip(paragraphs, assignments):
        if topic == noise:
            continue
        if not 0 <= topic < n_topics:
            raise ValueError(f"topic assignment {topic} outside [0, {noise}]")
        buckets[topic].extend(tokens)
    oov_tokens: list[str] = []
    oov_index: dict[str, int] = {}
    groups: list[TopicGroup] = []
    for bucket in buckets:
        kept = bucket[:cap]
        ids = vocab.encode(kept)
        extended = []
        for token, token_id in zip(kept, ids):
            if token_id != UNK_ID or token in vocab:
                extended.append(token_id)
                continue
            if token not in oov_index:
                oov_index[token] = len(oov_tokens)
                oov_tokens.append(token)
            extended.append(len(vocab) + oov_index[token])
        groups.append(TopicGroup(tokens=list(kept), token_ids=ids, extended_ids=extended))
    return TopicGroups(groups=groups, oov_tokens=oov_tokens, vocab_size=len(vocab))


# ---------------------------------------------------------------------------
# model

class GRUCell:
    """Single GRU cell over [1, hidden] row states."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.W_z = ad.parameter(rng, (input_dim, hidden_dim))
        self.U_z = ad.parameter(rng, (hidden_dim, hidden_dim))
        self.b_z = ad.zero_parameter((1, hidden_dim))
        self.W_r = ad.parameter(rng, (input_dim, hidden_dim))
        self.U_r = ad.parameter(rng, (hidden_dim, hidden_dim))
        self.b_r = ad.zero_parameter((1, hidden_dim))
        self.W_h = ad.parameter(rng, (input_dim, hidden_dim))
        self.U_h = ad.parameter(rng, (hidden_dim, hidden_dim))
        self.b_h = ad.zero_parameter((1, hidden_dim))

    def step(self, x: ad.Tensor, h: ad.Tensor) -> ad.Tensor:
        update = ad.sigmoid(ad.affine(x, self.W_z, self.b_z) + ad.matmul(h, self.U_z))
        reset = ad.sigmoid(ad.affine(x, self.W_r, self.b_r) + ad.matmul(h, self.U_r))
        candidate = ad.tanh(ad.affine(x, self.W_h, self.b_h) + ad.matmul(reset * h, self.U_h))
        return (1.0 - update) * candidate + update * h

    def parameters(self) -> dict[str, ad.Tensor]:
        return {"W_z": self.W_z, "U_z": self.U_z, "b_z": self.b_z,
                "W_r": self.W_r, "U_r": self.U_r, "b_r": self.b_r,
                "W_h": self.W_h, "U_h": self.U_h, "b_h": self.b_h}


class GeneratorModel:
    """All trainable tensors of the abstract generator."""

    def __init__(self, vocab_size: int, n_topics: int, embed_dim: int = 300,
                 hidden_dim: int = 512, seed: int = 0,
                 embeddings: np.ndarray | None = None):
        if n_topics < 1:
            raise ValueError(f"need at least one topic, got {n_topics}")
        rng = np.random.default_rng(seed)
        self.vocab_size = vocab_size
        self.n_topics = n_topics
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        if embeddings is None:
            self.embed = ad.parameter(rng, (vocab_size, embed_dim))
        else:
            if embeddings.shape != (vocab_size, embed_dim):
                raise ValueError(f"embedding table shape {embeddings.shape}, "
                                 f"expected {(vocab_size, embed_dim)}")
            self.embed = ad.Tensor(embeddings, requires_grad=True)
        # topic-group encoder
        self.enc_fwd = GRUCell(embed_dim, hidden_dim, rng)
        self.enc_bwd = GRUCell(embed_dim, hidden_dim, rng)
        self.enc_token_W = ad.parameter(rng, (2 * hidden_dim, hidden_dim))
        self.enc_token_b = ad.zero_parameter((1, hidden_dim))
        self.enc_topic_W = ad.parameter(rng, (2 * hidden_dim, hidden_dim))
        self.enc_topic_b = ad.zero_parameter((1, hidden_dim))
        # sentence-level topic predictor
        self.pred_cell = GRUCell(hidden_dim, hidden_dim, rng)
        self.topic_W = ad.parameter(rng, (hidden_dim, n_topics))
        self.topic_b = ad.zero_parameter((1, n_topics))
        self.stop_W = ad.parameter(rng, (hidden_dim, 1))
        self.stop_b = ad.zero_parameter((1, 1))
        # attention
        self.attn_token_W = ad.parameter(rng, (hidden_dim, hidden_dim))
        self.attn_state_W = ad.parameter(rng, (hidden_dim, hidden_dim))
        self.attn_b = ad.zero_parameter((1, hidden_dim))
        self.attn_v = ad.parameter(rng, (hidden_dim, 1))
        # sentence decoder
        self.dec_cell = GRUCell(embed_dim, hidden_dim, rng)
        self.out_hidden_W = ad.parameter(rng, (2 * hidden_dim, hidden_dim))
        self.out_hidden_b = ad.zero_parameter((1, hidden_dim))
        self.out_vocab_W = ad.parameter(rng, (hidden_dim, vocab_size))
        self.out_vocab_b = ad.zero_parameter((1, vocab_size))
        # copy gate (its state weight is distinct from the attention one)
        self.gate_context_W = ad.parameter(rng, (hidden_dim, 1))
        self.gate_state_W = ad.parameter(rng, (hidden_dim, 1))
        self.gate_input_W = ad.parameter(rng, (embed_dim, 1))
        self.gate_b = ad.zero_parameter((1, 1))

    def parameters(self) -> dict[str, ad.Tensor]:
        params: dict[str, ad.Tensor] = {"embed": self.embed}
        for prefix, cell in (("enc_fwd", self.enc_fwd), ("enc_bwd", self.enc_bwd),
                             ("pred_cell", self.pred_cell), ("dec_cell", self.dec_cell)):
            for name, tensor in cell.parameters().items():
                params[f"{prefix}.{name}"] = tensor
        params.update({
            "enc_token_W": self.enc_token_W, "enc_token_b": self.enc_token_b,
            "enc_topic_W": self.enc_topic_W, "enc_topic_b": self.enc_topic_b,
            "topic_W": self.topic_W, "topic_b": self.topic_b,
            "stop_W": self.stop_W, "stop_b": self.stop_b,
            "attn_token_W": self.attn_token_W, "attn_state_W": self.attn_state_W,
            "attn_b": self.attn_b, "attn_v": self.attn_v,
            "out_hidden_W": self.out_hidden_W, "out_hidden_b": self.out_hidden_b,
            "out_vocab_W": self.out_vocab_W, "out_vocab_b": self.out_vocab_b,
            "gate_context_W": self.gate_context_W, "gate_state_W": self.gate_state_W,
            "gate_input_W": self.gate_input_W, "gate_b": self.gate_b,
        })
        return params


# ---------------------------------------------------------------------------
# encoding

@dataclass
class TopicEncoding:
    """BiGRU view of the grouped input: one vector per topic, one state per
    kept input token (None when every group is empty)."""

    topic_vectors: ad.Tensor                 # [n_topics, hidden]
    token_states: ad.Tensor | None           # [total_tokens, hidden]
    positions: list[tuple[int, str]] = field(default_factory=list)  # (extended id, surface)


def bigru_states(model: GeneratorModel, token_ids: Sequence[int]):
    """Forward/backward GRU state stacks for one token sequence.

    Returns (forward [n, H], backward [n, H], final forward [1, H],
    final backward [1, H]); backward row t has consumed tokens n-1..t.
    """
    n = len(token_ids)
    if n == 0:
        raise ValueError("bigru_states needs a non-empty sequence")
    vectors = ad.embedding_lookup(model.embed, token_ids)  # [n, embed]
    hidden = model.hidden_dim
    state = ad.zeros((1, hidden))
    forward: list[ad.Tensor] = []
    for t in range(n):
        state = model.enc_fwd.step(ad.row(vectors, t), state)
        forward.append(state)
    state = ad.zeros((1, hidden))
    backward: list[ad.Tensor] = [None] * n  # type: ignore[list-item]
    for t in reversed(range(n)):
        state = model.enc_bwd.step(ad.row(vectors, t), state)
        backward[t] = state
    fwd = forward[0] if n == 1 else ad.concat(forward, axis=0)
    bwd = backward[0] if n == 1 else ad.concat(backward, axis=0)
    return fwd, bwd, forward[-1], backward[0]


def encode_topics(model: GeneratorModel, grouped: TopicGroups) -> TopicEncoding:
    """Encode every non-empty group; empty groups get a zero topic vector."""
    if len(grouped.groups) != model.n_topics:
        raise ValueError(f"{len(grouped.groups)} groups for a {model.n_topics}-topic model")
    topic_rows: list[ad.Tensor] = []
    state_blocks: list[ad.Tensor] = []
    positions: list[tuple[int, str]] = []
    for group in grouped.groups:
        if len(group) == 0:
            topic_rows.append(ad.zeros((1, model.hidden_dim)))
            continue
        fwd, bwd, final_fwd, final_bwd = bigru_states(model, group.token_ids)
        token_states = ad.affine(ad.concat([fwd, bwd], axis=1),
                                 model.enc_token_W, model.enc_token_b)      # [n, H]
        topic_vector = ad.affine(ad.concat([final_fwd, final_bwd], axis=1),
                                 model.enc_topic_W, model.enc_topic_b)      # [1, H]
        topic_rows.append(topic_vector)
        state_blocks.append(token_states)
        positions.extend(zip(group.extended_ids, group.tokens))
    topic_vectors = topic_rows[0] if len(topic_rows) == 1 else ad.concat(topic_rows, axis=0)
    token_states = None
    if state_blocks:
        token_states = state_blocks[0] if len(state_blocks) == 1 else ad.concat(state_blocks, axis=0)
    return TopicEncoding(topic_vectors=topic_vectors, token_states=token_states,
                         positions=positions)


# ---------------------------------------------------------------------------
# topic predictor

@dataclass
class TopicStep:
    state: ad.Tensor          # recurrent predictor state, [1, H]
    topic_probs: ad.Tensor    # [1, n_topics]
    topic_context: ad.Tensor  # mixed (soft) or selected (hard) topic vector
    decoder_init: ad.Tensor   # state + topic context
    stop_prob: ad.Tensor      # [1, 1]


def predict_topic_step(model: GeneratorModel, prev_state: ad.Tensor,
                       prev_context: ad.Tensor, topic_vectors: ad.Tensor,
                       mode: str = "soft") -> TopicStep:
    """One predictor step: advance the GRU on the previous topic context,
    score topics, mix (or select) a topic vector, and score stopping."""
    state = model.pred_cell.step(prev_context, prev_state)
    topic_probs = ad.softmax(ad.affine(state, model.topic_W, model.topic_b), axis=1)
    if mode == "soft":
        context = ad.matmul(topic_probs, topic_vectors)          # [1, H]
    elif mode == "hard":
        best = int(np.argmax(topic_probs.data))
        context = ad.row(topic_vectors, best)
    else:
        raise ValueError(f"topic_mode must be 'soft' or 'hard', got '{mode}'")
    decoder_init = state + context
    stop_prob = ad.sigmoid(ad.affine(state, model.stop_W, model.stop_b))
    return TopicStep(state=state, topic_probs=topic_probs, topic_context=context,
                     decoder_init=decoder_init, stop_prob=stop_prob)


# ---------------------------------------------------------------------------
# attention and the output distribution

def attention_step(model: GeneratorModel, state: ad.Tensor,
                   token_states: ad.Tensor | None):
    """Additive attention of the decoder state over all token states.

    Returns (weights [n, 1], context [1, H]).
    """
    if token_states is None or token_states.data.shape[0] == 0:
        raise ValueError("attention requires at least one encoded input token")
    scores = ad.matmul(
        ad.tanh(ad.matmul(token_states, model.attn_token_W)
                + ad.affine(state, model.attn_state_W, model.attn_b)),
        model.attn_v)                                            # [n, 1]
    weights = ad.softmax(scores, axis=0)
    context = ad.matmul(ad.transpose(weights), token_states)     # [1, H]
    return weights, context


def token_distribution(model: GeneratorModel, state: ad.Tensor, context: ad.Tensor,
                       dec_input: ad.Tensor, weights: ad.Tensor,
                       grouped: TopicGroups) -> ad.Tensor:
    """Mix the vocabulary softmax with the copy distribution.

    Output is [1, vocab + n_oov]; the copy mass lands on the extended id of
    every attended input position, so OOV input tokens stay reachable.
    """
    features = ad.concat([state, context], axis=1)               # [1, 2H]
    logits = ad.affine(ad.affine(features, model.out_hidden_W, model.out_hidden_b),
                       model.out_vocab_W, model.out_vocab_b)     # [1, V]
    vocab_probs = ad.softmax(logits, axis=1)
    p_gen = ad.sigmoid(ad.matmul(context, model.gate_context_W)
                       + ad.matmul(state, model.gate_state_W)
                       + ad.matmul(dec_input, model.gate_input_W)
                       + model.gate_b)                           # [1, 1]
    extended_ids = [ext for ext, _ in _attended_positions(weights, grouped)]
    copy_probs = ad.scatter_sum(ad.transpose(weights), extended_ids, grouped.extended_size)
    n_oov = grouped.extended_size - grouped.vocab_size
    if n_oov:
        vocab_probs = ad.concat([vocab_probs, ad.zeros((1, n_oov))], axis=1)
    return vocab_probs * p_gen + copy_probs * (1.0 - p_gen)


def _attended_positions(weights: ad.Tensor, grouped: TopicGroups) -> list[tuple[int, str]]:
    positions = [(ext, tok) for group in grouped.groups
                 for ext, tok in zip(group.extended_ids, group.tokens)]
    if weights.data.shape[0] != len(positions):
        raise ValueError(f"{weights.data.shape[0]} attention weights for "
                         f"{len(positions)} input positions")
    return positions


# ---------------------------------------------------------------------------
# sentence decoding

def _input_vector(model: GeneratorModel, token_id: int) -> ad.Tensor:
    # extended ids (copied OOV tokens) feed back as UNK
    vocab_id = token_id if token_id < model.vocab_size else UNK_ID
    return ad.embedding_lookup(model.embed, [vocab_id])


@dataclass
class _Hypothesis:
    tokens: list[int]          # emitted extended ids, EOS excluded
    log_prob: float
    state: ad.Tensor
    prev_id: int


def decode_sentence(model: GeneratorModel, decoder_init: ad.Tensor,
                    encoding: TopicEncoding, grouped: TopicGroups,
                    vocab: Vocabulary, config: DecodeConfig) -> list[str]:
    """Beam-search one sentence (beam 1 is greedy).  Hypotheses are pruned
    by summed log-probability; the returned sentence maximizes the
    length-normalized log-probability among finished hypotheses."""
    beam = config.beam_size
    live = [_Hypothesis(tokens=[], log_prob=0.0, state=decoder_init, prev_id=BOS_ID)]
    finished: list[tuple[float, list[int]]] = []
    while live:
        candidates: list[tuple[float, int, _Hypothesis, ad.Tensor]] = []
        for hyp in live:
            x = _input_vector(model, hyp.prev_id)
            state = model.dec_cell.step(x, hyp.state)
            weights, context = attention_step(model, state, encoding.token_states)
            dist = token_distribution(model, state, context, x, weights, grouped)
            log_probs = np.log(np.maximum(dist.data[0], 1e-12))
            if beam < log_probs.size:
                top = np.argpartition(-log_probs, beam)[:beam + 1]
            else:
                top = np.arange(log_probs.size)
            for token_id in top:
                candidates.append((hyp.log_prob + float(log_probs[token_id]),
                                   int(token_id), hyp, state))
        # deterministic order: higher score first, lower token id on ties
        candidates.sort(key=lambda c: (-c[0], c[1]))
        next_live: list[_Hypothesis] = []
        slots = 0  # finished hypotheses consume beam slots, so beam 1 is greedy
        for score, token_id, hyp, state in candidates:
            if slots >= beam:
                break
            slots += 1
            emitted = len(hyp.tokens) + 1
            if token_id == EOS_ID:
                finished.append((score / emitted, hyp.tokens))
                continue
            tokens = hyp.tokens + [token_id]
            if len(tokens) >= config.max_sentence_tokens:
                finished.append((score / emitted, tokens))
                continue
            next_live.append(_Hypothesis(tokens=tokens, log_prob=score,
                                         state=state, prev_id=token_id))
        live = next_live
        if finished and not live:
            break
    best = max(finished, key=lambda item: item[0])
    surfaces = []
    for token_id in best[1]:
        if token_id < len(vocab):
            surfaces.append(vocab.id_to_token(token_id))
        else:
            surfaces.append(grouped.oov_tokens[token_id - len(vocab)])
    return surfaces


def generate_abstract(model: GeneratorModel, paragraphs: Sequence[Sequence[str]],
                      assignments: Sequence[int], schema: TopicSchema,
                      vocab: Vocabulary, config: DecodeConfig) -> list[list[str]]:
    """Generate an abstract (list of token-list sentences) for one article.

    Raises if every paragraph lands in NOISE (no input to attend over).
    """
    grouped = group_paragraphs(paragraphs, assignments, schema, vocab, config.ttg_cap)
    if grouped.total_tokens == 0:
        raise ValueError("no usable input: every paragraph was assigned to NOISE or empty")
    encoding = encode_topics(model, grouped)
    hidden = model.hidden_dim
    state = ad.zeros((1, hidden))
    context = ad.zeros((1, hidden))
    sentences: list[list[str]] = []
    for _ in range(config.max_sentences):
        step = predict_topic_step(model, state, context, encoding.topic_vectors,
                                  config.topic_mode)
        state, context = step.state, step.topic_context
        if step.stop_prob.item() > config.stop_threshold:
            break
        sentences.append(decode_sentence(model, step.decoder_init, encoding,
                                         grouped, vocab, config))
    return sentences


# ---------------------------------------------------------------------------
# training-time teacher forcing and losses

def teacher_forced_outputs(model: GeneratorModel, encoding: TopicEncoding,
                           grouped: TopicGroups, gold_sentences: Sequence[Sequence[str]],
                           vocab: Vocabulary, mode: str = "soft"):
    """Run predictor and decoder with gold inputs.

    Returns (per-sentence token distributions, per-sentence gold extended
    ids with EOS appended, stop probabilities for the m+1 predictor steps).
    """
    m = len(gold_sentences)
    if m == 0:
        raise ValueError("gold abstract has no sentences")
    hidden = model.hidden_dim
    state = ad.zeros((1, hidden))
    context = ad.zeros((1, hidden))
    sentence_dists: list[list[ad.Tensor]] = []
    sentence_targets: list[list[int]] = []
    stop_probs: list[ad.Tensor] = []
    for sentence in gold_sentences:
        if not sentence:
            raise ValueError("gold sentences must be non-empty")
        step = predict_topic_step(model, state, context, encoding.topic_vectors, mode)
        state, context = step.state, step.topic_context
        stop_probs.append(step.stop_prob)
        targets = [grouped.target_id(tok, vocab) for tok in sentence] + [EOS_ID]
        inputs = [BOS_ID] + [vocab.token_to_id(tok) for tok in sentence]
        dec_state = step.decoder_init
        dists: list[ad.Tensor] = []
        for input_id, _target in zip(inputs, targets):
            x = _input_vector(model, input_id)
            dec_state = model.dec_cell.step(x, dec_state)
            weights, attn_context = attention_step(model, dec_state, encoding.token_states)
            dists.append(token_distribution(model, dec_state, attn_context, x,
                                            weights, grouped))
        sentence_dists.append(dists)
        sentence_targets.append(targets)
    final = predict_topic_step(model, state, context, encoding.topic_vectors, mode)
    stop_probs.append(final.stop_prob)
    return sentence_dists, sentence_targets, stop_probs


def compute_losses(sentence_dists: Sequence[Sequence[ad.Tensor]],
                   sentence_targets: Sequence[Sequence[int]],
                   stop_probs: Sequence[ad.Tensor],
                   stop_weight: float = 1.0):
    """Sentence NLL averaged within and then across sentences, plus the
    stop cross-entropy averaged over the m+1 predictor steps.

    Gold-token probabilities are clamped at 1e-12 before the log, so a
    zero-probability target contributes a large finite loss.  Returns
    (sentence_loss, stop_loss, total) as [1, 1] tensors.
    """
    m = len(sentence_dists)
    if m == 0:
        raise ValueError("need at least one sentence")
    if len(sentence_targets) != m:
        raise ValueError(f"{m} distribution lists but {len(sentence_targets)} target lists")
    if len(stop_probs) != m + 1:
        raise ValueError(f"expected {m + 1} stop probabilities, got {len(stop_probs)}")
    sentence_losses: list[ad.Tensor] = []
    for dists, targets in zip(sentence_dists, sentence_targets):
        if len(dists) != len(targets):
            raise ValueError(f"{len(dists)} distributions for {len(targets)} targets")
        if not dists:
            raise ValueError("empty sentence in loss computation")
        terms = [ad.mul(ad.log(ad.pick(dist, 0, target), floor=1e-12), -1.0)
                 for dist, target in zip(dists, targets)]
        total = reduce(ad.add, terms)
        sentence_losses.append(ad.mul(total, 1.0 / len(terms)))
    sentence_loss = ad.mul(reduce(ad.add, sentence_losses), 1.0 / m)
    stop_terms: list[ad.Tensor] = []
    for step_index, stop in enumerate(stop_probs, start=1):
        if step_index > m:  # the final step supervises "stop now"
            stop_terms.append(ad.mul(ad.log(stop, floor=1e-12), -1.0))
        else:
            stop_terms.append(ad.mul(ad.log(1.0 - stop, floor=1e-12), -1.0))
    stop_loss = ad.mul(reduce(ad.add, stop_terms), 1.0 / (m + 1))
    total_loss = sentence_loss + ad.mul(stop_loss, stop_weight)
    return sentence_loss, stop_loss, total_loss


def example_loss(model: GeneratorModel, example: SummarizationExample,
                 assignments: Sequence[int], schema: TopicSchema, vocab: Vocabulary,
                 mode: str = "soft", stop_weight: float = 1.0, ttg_cap: int = 400):
    """Teacher-forced losses for one example; see compute_losses."""
    grouped = group_paragraphs(example.paragraph_tokens, assignments, schema, vocab, ttg_cap)
    if grouped.total_tokens == 0:
        raise ValueError(f"example '{example.title}': every paragraph is NOISE or empty")
    encoding = encode_topics(model, grouped)
    dists, targets, stops = teacher_forced_outputs(model, encoding, grouped,
                                                   example.abstract_tokens, vocab, mode)
    return compute_losses(dists, targets, stops, stop_weight)


def train_generator(model: GeneratorModel, train: Sequence[SummarizationExample],
                    train_assignments: Sequence[Sequence[int]],
                    valid: Sequence[SummarizationExample],
                    valid_assignments: Sequence[Sequence[int]],
                    schema: TopicSchema, vocab: Vocabulary, epochs: int = 10,
                    lr_first: float = 1e-4, lr_rest: float = 1e-5,
                    mode: str = "soft", stop_weight: float = 1.0,
                    ttg_cap: int = 400, seed: int = 42) -> list[dict]:
    """Teacher-forced Adam training with the two-phase learning rate
    (lr_first for epoch 1, lr_rest afterwards); keeps the best-validation
    checkpoint.  Returns one history row per epoch: epoch, lr, train_loss,
    valid_loss, wall_seconds (losses are mean per-example totals; train_nll
    carries the mean sentence NLL for convergence tracking)."""
    if len(train) != len(train_assignments):
        raise ValueError(f"{len(train)} examples but {len(train_assignments)} assignment lists")
    if len(valid) != len(valid_assignments):
        raise ValueError(f"{len(valid)} validation examples but {len(valid_assignments)} assignment lists")
    if not train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    optimizer = ad.Adam(model.parameters(), lr=lr_first)
    history: list[dict] = []
    best_loss = float("inf")
    best_state: dict[str, np.ndarray] = {}

    def valid_loss() -> float:
        if not valid:
            return float("nan")
        totals = []
        for example, assignment in zip(valid, valid_assignments):
            _, _, total = example_loss(model, example, assignment, schema, vocab,
                                       mode, stop_weight, ttg_cap)
            totals.append(total.item())
        return float(np.mean(totals))

    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        optimizer.lr = lr_first if epoch == 1 else lr_rest
        train_totals = []
        train_nlls = []
        for index in rng.permutation(len(train)):
            example = train[index]
            with ad.tape() as recording:
                nll, _, total = example_loss(model, example, train_assignments[index],
                                             schema, vocab, mode, stop_weight, ttg_cap)
                recording.backward(total)
            optimizer.step()
            optimizer.zero_grad()
            train_totals.append(total.item())
            train_nlls.append(nll.item())
        epoch_valid = valid_loss()
        history.append({
            "epoch": epoch,
            "lr": optimizer.lr,
            "train_loss": float(np.mean(train_totals)),
            "train_nll": float(np.mean(train_nlls)),
            "valid_loss": epoch_valid,
            "wall_seconds": time.perf_counter() - started,
        })
        score = epoch_valid if valid else float(np.mean(train_totals))
        if score < best_loss:
            best_loss = score
            best_state = {name: p.data.copy() for name, p in model.parameters().items()}
    if best_state:
        for name, p in model.parameters().items():
            p.data[...] = best_state[name]
    return history


# ---------------------------------------------------------------------------
# embedding initialization

def init_embeddings(vocab: Vocabulary, dim: int = 300, pretrained_path=None,
                    corpus: Sequence[Sequence[str]] | None = None,
                    seed: int = 0) -> np.ndarray:
    """Embedding table for the vocabulary.

    Without a pretrained file: uniform(-0.1, 0.1).  With one ("word v1 ..
    vdim" per line): in-file words take their vectors; any other word takes
    the mean vector of up to 10 in-file tokens around its first corpus
    occurrence (5 each side); words without context keep the uniform row.
    """
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim)).astype(np.float32)
    if pretrained_path is None:
        return table
    pretrained: dict[str, np.ndarray] = {}
    with open(pretrained_path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{pretrained_path}:{lineno}: expected a word and {dim} "
                                 f"values, got {len(parts)} fields")
            try:
                vector = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError as exc:
                raise ValueError(f"{pretrained_path}:{lineno}: non-numeric value ({exc})") from exc
            pretrained[parts[0]] = vector
    unresolved: set[str] = set()
    for token_id in range(len(vocab)):
        token = vocab.id_to_token(token_id)
        vector = pretrained.get(token)
        if vector is not None:
            table[token_id] = vector
        else:
            unresolved.add(token)
    if corpus is None or not unresolved:
        return table
    first_context: dict[str, np.ndarray] = {}
    for sequence in corpus:
        if not unresolved:
            break
        for position, token in enumerate(sequence):
            if token in unresolved and token not in first_context:
                window = list(sequence[max(0, position - 5):position])
                window += list(sequence[position + 1:position + 6])
                vectors = [pretrained[w] for w in window if w in pretrained]
                if vectors:
                    first_context[token] = np.mean(vectors, axis=0)
                unresolved.discard(token)
    for token, vector in first_context.items():
        table[vocab.token_to_id(token)] = vector
    return table
