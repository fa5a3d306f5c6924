"""Bag-of-words corpora: UCI-format IO, synthetic generation, splits.

The on-disk format is the UCI bag-of-words layout: three header lines
(document count D, vocabulary size W, nonzero count NNZ) followed by
exactly NNZ lines of ``docID wordID count`` with 1-based IDs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, CorpusFormatError


@dataclass(frozen=True)
class Document:
    """Distinct word ids and their counts for one document."""

    word_ids: np.ndarray
    counts: np.ndarray

    @property
    def length(self) -> int:
        """Total tokens, counting multiplicity."""
        return int(self.counts.sum())

    @property
    def n_distinct(self) -> int:
        return int(self.word_ids.shape[0])


@dataclass
class Corpus:
    docs: list[Document]
    vocab: list[str]

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def total_tokens(self) -> int:
        return sum(doc.length for doc in self.docs)


def _make_document(word_ids, counts, vocab_size: int) -> Document:
    ids = np.asarray(word_ids, dtype=np.int64)
    cnt = np.asarray(counts, dtype=np.int64)
    if ids.shape != cnt.shape or ids.ndim != 1:
        raise ConfigurationError("word_ids and counts must be equal-length 1-D")
    if ids.size and ((ids < 0).any() or (ids >= vocab_size).any()):
        raise ConfigurationError(f"word id out of range [0, {vocab_size})")
    if (cnt < 1).any():
        raise ConfigurationError("counts must be >= 1")
    return Document(ids, cnt)


def _parse_int(token: str, path, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CorpusFormatError(
            f"{path}:{line_no}: {what} is not an integer: {token!r}"
        )


def load_uci_bow(docword_path, vocab_path) -> Corpus:
    """Parse UCI bag-of-words files into a Corpus (IDs become 0-based)."""
    with open(vocab_path) as fh:
        vocab = [line.strip() for line in fh if line.strip()]
    with open(docword_path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise CorpusFormatError(f"{docword_path}: missing header lines")
    n_docs = _parse_int(lines[0].strip(), docword_path, 1, "document count")
    n_words = _parse_int(lines[1].strip(), docword_path, 2, "vocabulary size")
    nnz = _parse_int(lines[2].strip(), docword_path, 3, "nonzero count")
    if n_docs < 1 or n_words < 1 or nnz < 0:
        raise CorpusFormatError(f"{docword_path}: nonpositive header values")
    if n_words != len(vocab):
        raise CorpusFormatError(
            f"{vocab_path}: {len(vocab)} terms but header says {n_words}"
        )
    body = [(i + 4, line) for i, line in enumerate(lines[3:]) if line.strip()]
    if len(body) != nnz:
        raise CorpusFormatError(
            f"{docword_path}: header says {nnz} triples, found {len(body)}"
        )
    per_doc: list[dict[int, int]] = [dict() for _ in range(n_docs)]
    for line_no, line in body:
        parts = line.split()
        if len(parts) != 3:
            raise CorpusFormatError(
                f"{docword_path}:{line_no}: expected 'docID wordID count', "
                f"got {line!r}"
            )
        doc_id = _parse_int(parts[0], docword_path, line_no, "docID")
        word_id = _parse_int(parts[1], docword_path, line_no, "wordID")
        count = _parse_int(parts[2], docword_path, line_no, "count")
        if not 1 <= doc_id <= n_docs:
            raise CorpusFormatError(
                f"{docword_path}:{line_no}: docID {doc_id} outside [1, {n_docs}]"
            )
        if not 1 <= word_id <= n_words:
            raise CorpusFormatError(
                f"{docword_path}:{line_no}: wordID {word_id} outside [1, {n_words}]"
            )
        if count < 1:
            raise CorpusFormatError(
                f"{docword_path}:{line_no}: count must be >= 1, got {count}"
            )
        slot = per_doc[doc_id - 1]
        key = word_id - 1
        slot[key] = slot.get(key, 0) + count
    docs = []
    for mapping in per_doc:
        ids = np.array(sorted(mapping), dtype=np.int64)
        cnt = np.array([mapping[i] for i in ids], dtype=np.int64)
        docs.append(Document(ids, cnt))
    return Corpus(docs=docs, vocab=vocab)


def write_uci_bow(corpus: Corpus, docword_path, vocab_path) -> None:
    """Inverse of load_uci_bow (1-based IDs, sorted by doc then word)."""
    triples = []
    for d, doc in enumerate(corpus.docs):
        for w, c in zip(doc.word_ids, doc.counts):
            triples.append((d + 1, int(w) + 1, int(c)))
    with open(docword_path, "w") as fh:
        fh.write(f"{corpus.n_docs}\n{corpus.vocab_size}\n{len(triples)}\n")
        for t in triples:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")
    with open(vocab_path, "w") as fh:
        for term in corpus.vocab:
            fh.write(term + "\n")


def synthetic_corpus(
    n_docs: int,
    vocab_size: int,
    k_topics: int,
    seed: int,
    doc_length: tuple[int, int] = (40, 80),
    topic_concentration: float = 0.3,
    background_mass: float = 0.05,
) -> tuple[Corpus, np.ndarray]:
    """Documents drawn from k planted topics with block support.

    Topic k concentrates (1 - background_mass) of its probability on its
    own contiguous vocabulary block, which keeps the topics far apart and
    makes recovery measurable. Returns (corpus, true topic rows).
    """
    if k_topics < 1 or vocab_size < k_topics or n_docs < 1:
        raise ConfigurationError(
            "need k_topics >= 1 and vocab_size >= k_topics and n_docs >= 1"
        )
    rng = np.random.default_rng(seed)
    topics = np.full((k_topics, vocab_size), background_mass / vocab_size)
    block = vocab_size // k_topics
    for k in range(k_topics):
        lo = k * block
        hi = vocab_size if k == k_topics - 1 else (k + 1) * block
        weights = rng.random(hi - lo) + 0.5
        weights /= weights.sum()
        topics[k, lo:hi] += (1.0 - background_mass) * weights
    topics /= topics.sum(axis=1, keepdims=True)

    docs = []
    lo_len, hi_len = doc_length
    for _ in range(n_docs):
        theta = rng.dirichlet(np.full(k_topics, topic_concentration))
        n_tokens = int(rng.integers(lo_len, hi_len + 1))
        z = rng.choice(k_topics, size=n_tokens, p=theta)
        counts = np.zeros(vocab_size, dtype=np.int64)
        for k in range(k_topics):
            m = int((z == k).sum())
            if m:
                words = rng.choice(vocab_size, size=m, p=topics[k])
                np.add.at(counts, words, 1)
        ids = np.nonzero(counts)[0]
        docs.append(Document(ids.astype(np.int64), counts[ids]))
    vocab = [f"w{i}" for i in range(vocab_size)]
    return Corpus(docs=docs, vocab=vocab), topics


def heldout_split(corpus: Corpus, n_heldout: int, seed: int) -> tuple[Corpus, Corpus]:
    """Random (train, heldout) split with n_heldout documents held out."""
    if not 0 < n_heldout < corpus.n_docs:
        raise ConfigurationError(
            f"n_heldout must be in (0, {corpus.n_docs}), got {n_heldout}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(corpus.n_docs)
    held = set(order[:n_heldout].tolist())
    train_docs = [corpus.docs[i] for i in range(corpus.n_docs) if i not in held]
    held_docs = [corpus.docs[i] for i in sorted(held)]
    return (
        Corpus(docs=train_docs, vocab=corpus.vocab),
        Corpus(docs=held_docs, vocab=corpus.vocab),
    )
