"""
Text Features
Bag-of-embeddings representation of Modeling Data Window notes.

Notes are concatenated in time order, tokenized, and the embedding vectors
of in-vocabulary tokens are summed into one fixed-length vector.
"""

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigurationError, EmbeddingFormatError
from utils.windowing import ModelingDataWindow

logger = logging.getLogger(__name__)

_ALNUM_RUN = re.compile(r"[^\W_]+", re.UNICODE)


# =====================================================
# TOKENIZATION
# =====================================================

def tokenize(text: str) -> List[str]:
    """Lowercase runs of letters/digits; anything else separates tokens"""
    return _ALNUM_RUN.findall(text.lower())


TOKENIZERS: Dict[str, Callable[[str], List[str]]] = {
    "alnum_lower": tokenize,
}


def get_tokenizer(name: str) -> Callable[[str], List[str]]:
    try:
        return TOKENIZERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown tokenizer {name!r}") from None


# =====================================================
# EMBEDDING TABLE
# =====================================================

@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    vocab: Dict[str, int]
    vectors: np.ndarray  # (len(vocab), dimension), read-only

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab[token]]

    @classmethod
    def from_entries(cls, entries: Dict[str, Sequence[float]], dimension: Optional[int] = None) -> "EmbeddingTable":
        tokens = list(entries)
        if dimension is None:
            if not tokens:
                raise EmbeddingFormatError("cannot infer dimension of an empty table")
            dimension = len(entries[tokens[0]])
        vectors = np.zeros((len(tokens), dimension), dtype=np.float64)
        for i, token in enumerate(tokens):
            row = np.asarray(entries[token], dtype=np.float64)
            if row.shape != (dimension,):
                raise EmbeddingFormatError(f"vector for {token!r} has length {row.size}, expected {dimension}")
            if not np.all(np.isfinite(row)):
                raise EmbeddingFormatError(f"vector for {token!r} has non-finite components")
            vectors[i] = row
        vectors.setflags(write=False)
        return cls(dimension=dimension, vocab={t: i for i, t in enumerate(tokens)}, vectors=vectors)


def load_embeddings(path, dimension: Optional[int] = None) -> EmbeddingTable:
    """
    Read a GloVe text-format file: token followed by `dimension` floats.

    Args:
        path: UTF-8 embedding file
        dimension: expected vector length; inferred from the first line if None

    Raises:
        EmbeddingFormatError: ragged line, non-numeric or non-finite component,
            duplicate token (with the line number)
    """
    path = Path(path)
    vocab: Dict[str, int] = {}
    rows: List[List[float]] = []

    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.rstrip()
            if not stripped:
                continue
            parts = stripped.split(" ")
            token, components = parts[0], parts[1:]
            if dimension is None:
                dimension = len(components)
                if dimension == 0:
                    raise EmbeddingFormatError("line has no vector components", line_number)
            if len(components) != dimension:
                raise EmbeddingFormatError(
                    f"ragged line: {len(components)} components, expected {dimension}", line_number
                )
            try:
                values = [float(c) for c in components]
            except ValueError:
                raise EmbeddingFormatError(f"non-numeric component for token {token!r}", line_number) from None
            if not all(math.isfinite(v) for v in values):
                raise EmbeddingFormatError(f"non-finite component for token {token!r}", line_number)
            if token in vocab:
                raise EmbeddingFormatError(f"duplicate token {token!r}", line_number)
            vocab[token] = len(rows)
            rows.append(values)

    if not rows:
        raise EmbeddingFormatError(f"no embeddings in {path}")

    vectors = np.array(rows, dtype=np.float64)
    vectors.setflags(write=False)
    logger.info("Loaded %d embeddings of dimension %d from %s", len(vocab), dimension, path)
    return EmbeddingTable(dimension=dimension, vocab=vocab, vectors=vectors)


def write_embeddings(table: EmbeddingTable, path) -> None:
    """GloVe text format; repr() floats reload to the identical value"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for token, index in table.vocab.items():
            handle.write(token)
            for value in table.vectors[index]:
                handle.write(" ")
                handle.write(repr(float(value)))
            handle.write("\n")


# =====================================================
# FEATURIZATION
# =====================================================

@dataclass(frozen=True)
class TextFeature:
    vector: np.ndarray
    token_count: int
    oov_count: int


def mdw_text(mdw: ModelingDataWindow) -> str:
    """Notes in time order joined by single spaces"""
    notes = sorted(mdw.notes, key=lambda n: n.time)
    return " ".join(n.text for n in notes)


def featurize_tokens(tokens: Sequence[str], table: EmbeddingTable, mean_pool: bool = False) -> TextFeature:
    indices = [table.vocab[t] for t in tokens if t in table.vocab]
    oov = len(tokens) - len(indices)

    if indices:
        # Sum via per-token counts: order of tokens cannot change the result
        unique, counts = np.unique(np.asarray(indices, dtype=np.int64), return_counts=True)
        vector = counts.astype(np.float64) @ table.vectors[unique]
        if mean_pool:
            vector = vector / len(indices)
    else:
        vector = np.zeros(table.dimension, dtype=np.float64)

    return TextFeature(vector=vector, token_count=len(tokens), oov_count=oov)


def featurize_text(
    mdw: ModelingDataWindow,
    table: EmbeddingTable,
    tokenizer: Callable[[str], List[str]] = tokenize,
    mean_pool: bool = False,
) -> TextFeature:
    """Summed embedding of all MDW note text; OOV tokens are skipped and counted"""
    return featurize_tokens(tokenizer(mdw_text(mdw)), table, mean_pool=mean_pool)


def text_feature_labels(dimension: int) -> List[str]:
    return [f"text_{i:03d}" for i in range(dimension)]


def featurize_text_matrix(
    mdws: Sequence[ModelingDataWindow],
    table: EmbeddingTable,
    tokenizer: Callable[[str], List[str]] = tokenize,
    mean_pool: bool = False,
) -> Tuple[np.ndarray, List[str], Dict[str, int]]:
    """
    Featurize many windows.

    Returns:
        (n x dimension matrix, feature labels, token tally)
    """
    matrix = np.zeros((len(mdws), table.dimension), dtype=np.float64)
    tally = {"tokens": 0, "oov": 0}
    for i, mdw in enumerate(mdws):
        feature = featurize_text(mdw, table, tokenizer=tokenizer, mean_pool=mean_pool)
        matrix[i] = feature.vector
        tally["tokens"] += feature.token_count
        tally["oov"] += feature.oov_count

    if tally["tokens"]:
        logger.info(
            "Text features: %d rows, %d tokens, %.1f%% out of vocabulary",
            len(mdws),
            tally["tokens"],
            100.0 * tally["oov"] / tally["tokens"],
        )
    return matrix, text_feature_labels(table.dimension), tally
