import logging
from abc import ABC
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence

import numpy as np

from .auditlog import AUDIT_EMBED, AuditLog, AuditReplay
from .config import BackendDescriptor
from .errors import DimensionMismatchError, MalformedResponseError
from .remote import OpenAIClientMixin

logger = logging.getLogger(__name__)

MOCK_DIMENSIONS = 256
MAX_CACHED_EMBEDDINGS = 100_000
FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK_64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes, seed: int = 0) -> int:
    value = FNV_OFFSET_BASIS ^ (seed & MASK_64)
    for byte in data:
        value ^= byte
        value = (value * FNV_PRIME) & MASK_64
    return value


def char_trigrams(text: str) -> List[str]:
    padded = f"^{text.lower()}$"
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def mock_embed(text: str, seed: int = 0) -> np.ndarray:
    """
    Hashed bag of lowercased character trigrams, padded with "^" and "$", in 256 bins and L2-normalized.
    The empty string maps to the zero vector.
    """
    vector = np.zeros(MOCK_DIMENSIONS, dtype=np.float64)
    if not text:
        return vector
    for trigram in char_trigrams(text):
        vector[fnv1a_64(trigram.encode("utf-8"), seed) % MOCK_DIMENSIONS] += 1.0
    return vector / np.linalg.norm(vector)


def unit(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm == 0:
        return vector
    return vector / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; 0 when either vector is zero."""
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0 or norm_v == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


class Embeddings(ABC):
    """
    Common logic for every embedding provider: empty strings map to the zero vector without a backend call,
    identical strings are embedded once while they stay in the bounded LRU cache (`cache_size` entries), and all
    vectors of a run share one dimension.
    """

    def __init__(self, descriptor: BackendDescriptor, audit_log: Optional[AuditLog] = None):
        self.descriptor = descriptor
        self.audit_log = audit_log
        self.dimensions: Optional[int] = None
        self.cache_size = MAX_CACHED_EMBEDDINGS
        self._cache: "OrderedDict[str, np.ndarray]" = OrderedDict()

    async def embed_texts(self, texts: List[str]) -> List[np.ndarray]:
        raise NotImplementedError

    async def embed_batch(self, texts: Sequence[str]) -> List[np.ndarray]:
        if not texts:
            raise ValueError("embed_batch requires at least one text")
        found: Dict[str, np.ndarray] = {}
        missing = []
        for text in dict.fromkeys(texts):
            if not text:
                continue
            if text in self._cache:
                self._cache.move_to_end(text)
                found[text] = self._cache[text]
            else:
                missing.append(text)
        if missing:
            vectors = await self.embed_texts(missing)
            if len(vectors) != len(missing):
                raise MalformedResponseError(f"Expected {len(missing)} embeddings, received {len(vectors)}", missing)
            for text, vector in zip(missing, vectors):
                self._check_dimensions(vector, text)
                raw = np.asarray(vector, dtype=np.float64)
                found[text] = unit(raw)
                self._remember(text, found[text])
                if self.audit_log:
                    # Raw values, so that a replay normalizes them bit-identically
                    await self.audit_log.record(AUDIT_EMBED, self.descriptor.model_name, text, raw.tolist())
        zero = np.zeros(self.dimensions or 0, dtype=np.float64)
        return [found[text] if text else zero for text in texts]

    def _remember(self, text: str, vector: np.ndarray):
        self._cache[text] = vector
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)

    def _check_dimensions(self, vector: np.ndarray, text: str):
        dimensions = len(vector)
        if self.dimensions is None:
            self.dimensions = dimensions
        elif dimensions != self.dimensions:
            raise DimensionMismatchError(
                f"Embedding dimension changed from {self.dimensions} to {dimensions} within a run", [text]
            )


class OpenAIEmbeddingService(OpenAIClientMixin, Embeddings):
    """
    Embeddings from an OpenAI-compatible JSON endpoint: POST {model, input: [texts]}, vectors read in input order
    """

    api_name = "embeddings"

    def __init__(self, descriptor: BackendDescriptor, audit_log: Optional[AuditLog] = None, verbose: bool = False):
        OpenAIClientMixin.__init__(self, descriptor, verbose)
        Embeddings.__init__(self, descriptor, audit_log)

    async def embed_texts(self, texts: List[str]) -> List[np.ndarray]:
        client = await self.create_client()
        vectors: List[np.ndarray] = []
        batch_size = self.descriptor.batch_size
        for start in range(0, len(texts), batch_size):
            batch = texts[start : start + batch_size]

            async def request():
                return await client.embeddings.create(model=self.descriptor.model_name, input=batch)

            response = await self.with_retries(request, batch)
            try:
                data = sorted(response.data, key=lambda item: item.index)
                batch_vectors = [np.asarray(item.embedding, dtype=np.float64) for item in data]
            except (AttributeError, TypeError, ValueError) as error:
                raise MalformedResponseError(f"Malformed embeddings response: {error}", batch) from error
            if len(batch_vectors) != len(batch):
                raise MalformedResponseError(
                    f"Expected {len(batch)} embeddings, received {len(batch_vectors)}", batch
                )
            if self.verbose:
                print(f"Batch Completed. Batch size {len(batch)}")
            vectors.extend(batch_vectors)
        return vectors


class MockEmbeddingService(Embeddings):
    """
    In-process, bit-deterministic embedder built on mock_embed
    """

    def __init__(self, descriptor: BackendDescriptor, audit_log: Optional[AuditLog] = None):
        super().__init__(descriptor, audit_log)
        self.dimensions = MOCK_DIMENSIONS

    async def embed_texts(self, texts: List[str]) -> List[np.ndarray]:
        return [mock_embed(text, self.descriptor.seed) for text in texts]


class ReplayEmbeddingService(Embeddings):
    """
    Answers from an audit log written by an earlier run, without network access
    """

    def __init__(self, descriptor: BackendDescriptor, replay: AuditReplay):
        super().__init__(descriptor)
        self.replay = replay

    async def embed_texts(self, texts: List[str]) -> List[np.ndarray]:
        return [
            np.asarray(self.replay.answer(AUDIT_EMBED, self.descriptor.model_name, text), dtype=np.float64)
            for text in texts
        ]
