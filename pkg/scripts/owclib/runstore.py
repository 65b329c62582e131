import asyncio
import glob
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

from .config import ARTIFACT_VERSION
from .errors import EmptyStoreError, IngestError, ResumeRefusedError
from .records import SampleRecord, ScoreKey, ScoreRecord

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
SAMPLES_FILE = "samples.jsonl"
SEGMENT_PATTERN = "scores-{:05d}.jsonl"
ANALYSES_DIR = "analyses"


def dump_line(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False) + "\n"


class RunStore:
    """
    A run directory: manifest.json with the config snapshot and hash, samples.jsonl, and one
    append-only scores-NNNNN.jsonl segment per scoring session. Every score is written as one
    complete line and flushed; a torn last line left by a crash is skipped on read.
    """

    def __init__(self, root: str):
        self.root = root
        self._lock = asyncio.Lock()
        self._segment: Optional[TextIO] = None

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.root, MANIFEST_FILE)

    @property
    def analyses_dir(self) -> str:
        return os.path.join(self.root, ANALYSES_DIR)

    def exists(self) -> bool:
        return os.path.exists(self.manifest_path)

    def read_manifest(self) -> Optional[Dict[str, Any]]:
        if not self.exists():
            return None
        try:
            with open(self.manifest_path, encoding="utf-8") as manifest_file:
                return json.load(manifest_file)
        except (OSError, json.JSONDecodeError) as error:
            raise IngestError(f"Cannot read run manifest: {error}", self.manifest_path) from error

    def initialize(self, snapshot: Dict[str, Any], config_hash: str):
        """Writes the manifest on first use. The snapshot of an existing run is never rewritten."""
        os.makedirs(self.root, exist_ok=True)
        if self.exists():
            return
        manifest = {"artifact_version": ARTIFACT_VERSION, "config": snapshot, "config_hash": config_hash}
        with open(self.manifest_path, "w", encoding="utf-8") as manifest_file:
            json.dump(manifest, manifest_file, indent=2, sort_keys=True, ensure_ascii=False)
            manifest_file.write("\n")

    def write_samples(self, samples: Iterable[SampleRecord]):
        merged = {(sample.dataset_id, sample.sample_id): sample for sample in self.read_samples()}
        merged.update({(sample.dataset_id, sample.sample_id): sample for sample in samples})
        os.makedirs(self.root, exist_ok=True)
        with open(os.path.join(self.root, SAMPLES_FILE), "w", encoding="utf-8") as samples_file:
            for _, sample in sorted(merged.items()):
                samples_file.write(dump_line(sample.to_dict()))

    def read_samples(self) -> List[SampleRecord]:
        path = os.path.join(self.root, SAMPLES_FILE)
        if not os.path.exists(path):
            return []
        samples: List[SampleRecord] = []
        with open(path, encoding="utf-8") as samples_file:
            for line_number, line in enumerate(samples_file, start=1):
                try:
                    samples.append(SampleRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as error:
                    raise IngestError(f"Malformed stored sample: {error}", path, line_number) from error
        return samples

    def segment_paths(self) -> List[str]:
        return sorted(glob.glob(os.path.join(self.root, "scores-*.jsonl")))

    def begin_session(self):
        os.makedirs(self.root, exist_ok=True)
        path = os.path.join(self.root, SEGMENT_PATTERN.format(len(self.segment_paths())))
        self._segment = open(path, "a", encoding="utf-8")
        logger.info("Writing scores to %s", path)

    def end_session(self):
        if self._segment:
            self._segment.close()
            self._segment = None

    async def append(self, record: ScoreRecord):
        line = dump_line(record.to_dict())
        async with self._lock:
            if self._segment is None:
                self.begin_session()
            assert self._segment is not None
            self._segment.write(line)
            self._segment.flush()

    def read_scores(self) -> Dict[ScoreKey, ScoreRecord]:
        """
        Latest record per key across segments, except that a successful score is never replaced
        by a later failure
        """
        scores: Dict[ScoreKey, ScoreRecord] = {}
        for path in self.segment_paths():
            with open(path, encoding="utf-8") as segment:
                for line_number, line in enumerate(segment, start=1):
                    if not line.endswith("\n"):
                        logger.warning("%s:%d: skipping torn record", path, line_number)
                        continue
                    try:
                        record = ScoreRecord.from_dict(json.loads(line))
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                        logger.warning("%s:%d: skipping unreadable record", path, line_number)
                        continue
                    current = scores.get(record.key)
                    if current is None or current.failed or not record.failed:
                        scores[record.key] = record
        return scores

    def canonical_scores(self) -> List[ScoreRecord]:
        return [record for _, record in sorted(self.read_scores().items())]

    def canonical_text(self) -> str:
        return "".join(dump_line(record.to_dict()) for record in self.canonical_scores())

    def require_scores(self) -> List[ScoreRecord]:
        scores = self.canonical_scores()
        if not scores:
            raise EmptyStoreError(f"Run store {self.root} holds no scores")
        return scores

    def read_analysis(self, name: str) -> Optional[Any]:
        path = os.path.join(self.analyses_dir, name)
        if not os.path.exists(path):
            return None
        try:
            with open(path, encoding="utf-8") as analysis_file:
                return json.load(analysis_file)
        except json.JSONDecodeError as error:
            raise IngestError(f"Malformed stored analysis: {error.msg}", path, error.lineno) from error

    def write_analysis(self, name: str, data: Any):
        os.makedirs(self.analyses_dir, exist_ok=True)
        with open(os.path.join(self.analyses_dir, name), "w", encoding="utf-8") as analysis_file:
            json.dump(data, analysis_file, indent=2, sort_keys=True, ensure_ascii=False)
            analysis_file.write("\n")


def checkpoint_and_resume(
    run_store: RunStore, pending_keys: Sequence[ScoreKey], config_hash: str, force: bool = False
) -> List[ScoreKey]:
    """
    Returns the keys that still need a score: those never scored and those whose last attempt failed.
    Refuses to continue a run recorded under a different configuration unless forced.
    """
    manifest = run_store.read_manifest()
    if manifest is not None and manifest.get("config_hash") != config_hash:
        if not force:
            raise ResumeRefusedError(manifest.get("config_hash", ""), config_hash)
        logger.warning("Resuming run %s under a different configuration", run_store.root)
    done = {key for key, record in run_store.read_scores().items() if not record.failed}
    remaining = [key for key in pending_keys if key not in done]
    scored = len(pending_keys) - len(remaining)
    logger.info("%d of %d keys already scored, %d remaining", scored, len(pending_keys), len(remaining))
    return remaining
