"""Chunk store with source-labeled metadata and cosine-similarity search.

Pages are chunked one page per chunk and embedded through a pluggable
provider; retrieval filters by source label, takes the top-k by cosine
similarity, then drops candidates below a per-label confidence threshold
(0.4 for label 1, 0.6 for label 0 by default). A threshold sweep over a
labeled pair set produces the precision/recall/F1 curves used to pick those
cutoffs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ProviderError, UndefinedSimilarityError

# Per-source-label similarity cutoffs.
DEFAULT_LABEL_THRESHOLDS = {1: 0.4, 0: 0.6}

_STORE_MAGIC = "repjudge-chunk-store"


def cosine_similarity(q: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped to [0, 1].

    Raw cosine ranges over [-1, 1]; scores here are defined on [0, 1], so
    negative values clamp to 0. Zero vectors and dimension mismatches are
    errors.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != v.shape:
        raise ConfigurationError(f"vector dimensions differ: {q.shape} vs {v.shape}")
    nq = float(np.linalg.norm(q))
    nv = float(np.linalg.norm(v))
    if nq == 0.0 or nv == 0.0:
        raise UndefinedSimilarityError("cosine similarity of a zero vector is undefined")
    return max(0.0, float(np.dot(q, v) / (nq * nv)))


@dataclass(frozen=True)
class Chunk:
    text: str
    embedding: np.ndarray
    label: int
    source_type: str
    page_index: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ConfigurationError("chunk label must be 0 or 1")
        object.__setattr__(self, "embedding", np.asarray(self.embedding, dtype=np.float32))


@dataclass(frozen=True)
class LabeledPair:
    query_embedding: np.ndarray
    chunk_embedding: np.ndarray
    relevant: bool
    query_text: str = ""
    chunk_text: str = ""


class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic bag-of-tokens embedding for tests and offline demos.

    Tokens hash to signed buckets; vectors are L2-normalized, so texts
    sharing tokens land near each other. Not a semantic model. The default
    width keeps token collisions rare for page-sized corpora.
    """

    def __init__(self, dimension: int = 512):
        self.dimension = dimension

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        tokens = [t for t in "".join(c.lower() if c.isalnum() else " " for c in text).split()]
        if not tokens:
            tokens = ["<empty>"]
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "little") % self.dimension
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            norm = 1.0
        return (vec / norm).astype(np.float32)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._embed_one(t) for t in texts])


class PrecomputedEmbedder:
    """Looks embeddings up from a JSON file mapping text -> vector."""

    def __init__(self, path: Union[str, Path]):
        table = json.loads(Path(path).read_text("utf-8"))
        self._table = {k: np.asarray(v, dtype=np.float32) for k, v in table.items()}
        dims = {v.shape[0] for v in self._table.values()}
        if len(dims) != 1:
            raise ConfigurationError("precomputed embeddings must share one dimension")
        self.dimension = dims.pop()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            if text not in self._table:
                raise ProviderError(f"no precomputed embedding for {text[:60]!r}")
            rows.append(self._table[text])
        return np.stack(rows)


class HttpEmbedder:
    """Client for an external embedding endpoint.

    POSTs ``{"texts": [...]}`` and expects ``{"embeddings": [[...], ...]}``.
    """

    def __init__(self, url: str, dimension: int, timeout: float = 30.0):
        self.url = url
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import urllib.request

        payload = json.dumps({"texts": list(texts)}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except Exception as exc:
            raise ProviderError(f"embedding endpoint failed: {exc}") from exc
        return np.asarray(body["embeddings"], dtype=np.float32)


@dataclass
class ChunkStore:
    dimension: int
    chunks: list[Chunk] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.chunks)

    def embeddings(self) -> np.ndarray:
        if not self.chunks:
            return np.zeros((0, self.dimension), dtype=np.float32)
        return np.stack([c.embedding for c in self.chunks])


def ingest(
    pages: Sequence[tuple[str, int, str, int]],  # (text, label, source_type, page_index)
    embedder: Embedder,
) -> ChunkStore:
    """One chunk per page; metadata retained verbatim."""
    store = ChunkStore(dimension=embedder.dimension)
    if not pages:
        return store
    texts = [p[0] for p in pages]
    try:
        vectors = embedder.embed(texts)
    except ProviderError:
        # Re-run page by page so the failing page index is reported.
        vectors = []
        for i, text in enumerate(texts):
            try:
                vectors.append(embedder.embed([text])[0])
            except ProviderError as exc:
                raise ProviderError(str(exc), page_index=pages[i][3]) from exc
        vectors = np.stack(vectors)
    if vectors.shape != (len(pages), embedder.dimension):
        raise ProviderError(
            f"provider returned shape {vectors.shape}, expected {(len(pages), embedder.dimension)}"
        )
    for (text, label, source_type, page_index), vec in zip(pages, vectors):
        store.chunks.append(
            Chunk(
                text=text,
                embedding=vec,
                label=int(label),
                source_type=source_type,
                page_index=int(page_index),
            )
        )
    return store


def retrieve(
    query: np.ndarray,
    store: ChunkStore,
    label: int,
    k: int,
    threshold: Optional[float] = None,
) -> list[tuple[Chunk, float]]:
    """Top-k chunks of the requested label, then threshold filtering.

    The cutoff defaults to the per-label confidence threshold. May return
    fewer than k results (or none).
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if label not in (0, 1):
        raise ConfigurationError("label must be 0 or 1")
    cutoff = DEFAULT_LABEL_THRESHOLDS[label] if threshold is None else threshold
    scored = []
    for idx, chunk in enumerate(store.chunks):
        if chunk.label != label:
            continue
        scored.append((cosine_similarity(query, chunk.embedding), idx))
    scored.sort(key=lambda s: (-s[0], s[1]))
    top = scored[:k]
    return [(store.chunks[idx], sim) for sim, idx in top if sim >= cutoff]


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    best_threshold: float
    best_f1: float

    def to_dict(self) -> dict:
        return {
            "points": [
                {"threshold": p.threshold, "precision": p.precision, "recall": p.recall, "f1": p.f1}
                for p in self.points
            ],
            "best_threshold": self.best_threshold,
            "best_f1": self.best_f1,
        }


def sweep_threshold(pairs: Sequence[LabeledPair], grid: Sequence[float]) -> SweepResult:
    """Classify each pair as a match iff its similarity reaches the
    threshold; report P/R/F1 per threshold and the argmax-F1 cutoff
    (ties take the smallest threshold)."""
    if not pairs:
        raise ConfigurationError("pair set must be non-empty")
    if not len(grid):
        raise ConfigurationError("threshold grid must be non-empty")
    sims = [cosine_similarity(p.query_embedding, p.chunk_embedding) for p in pairs]
    labels = [p.relevant for p in pairs]
    points = []
    for threshold in sorted(grid):
        tp = sum(1 for s, rel in zip(sims, labels) if s >= threshold and rel)
        fp = sum(1 for s, rel in zip(sims, labels) if s >= threshold and not rel)
        fn = sum(1 for s, rel in zip(sims, labels) if s < threshold and rel)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        points.append(SweepPoint(float(threshold), precision, recall, f1))
    best = max(points, key=lambda p: (p.f1, -p.threshold))
    return SweepResult(points=tuple(points), best_threshold=best.threshold, best_f1=best.f1)


# --------------------------------------------------------------------------
# Store persistence: JSON header line, little-endian float32 embedding
# block, then JSON chunk records.
# --------------------------------------------------------------------------

def save_store(store: ChunkStore, path: Union[str, Path]) -> None:
    header = {
        "format": _STORE_MAGIC,
        "dimension": store.dimension,
        "count": len(store.chunks),
    }
    records = [
        {
            "text": c.text,
            "label": c.label,
            "sourceType": c.source_type,
            "pageIndex": c.page_index,
        }
        for c in store.chunks
    ]
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        block = store.embeddings().astype("<f4").tobytes()
        f.write(block)
        f.write(json.dumps(records).encode("utf-8"))


def load_store(path: Union[str, Path]) -> ChunkStore:
    data = Path(path).read_bytes()
    newline = data.index(b"\n")
    header = json.loads(data[:newline].decode("utf-8"))
    if header.get("format") != _STORE_MAGIC:
        raise ConfigurationError(f"{path} is not a chunk store file")
    dim, count = int(header["dimension"]), int(header["count"])
    block_len = dim * count * 4
    block_start = newline + 1
    vectors = np.frombuffer(
        data, dtype="<f4", count=dim * count, offset=block_start
    ).reshape(count, dim)
    records = json.loads(data[block_start + block_len :].decode("utf-8"))
    if len(records) != count:
        raise ConfigurationError("chunk record count does not match the header")
    store = ChunkStore(dimension=dim)
    for rec, vec in zip(records, vectors):
        store.chunks.append(
            Chunk(
                text=rec["text"],
                embedding=vec.copy(),
                label=int(rec["label"]),
                source_type=rec["sourceType"],
                page_index=int(rec["pageIndex"]),
            )
        )
    return store
