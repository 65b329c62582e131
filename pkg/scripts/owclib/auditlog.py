import asyncio
import json
import logging
import os
from collections import defaultdict
from typing import Any, DefaultDict, Dict, List, Tuple

from .errors import IngestError, MalformedResponseError

logger = logging.getLogger(__name__)

AUDIT_EMBED = "embed"
AUDIT_JUDGE = "judge"


class AuditLog:
    """
    Append-only JSONL log of backend requests and raw responses. Writes are serialized,
    one complete line per call.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = asyncio.Lock()
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    async def record(self, kind: str, model_name: str, request: Any, response: Any):
        line = json.dumps(
            {"kind": kind, "model": model_name, "request": request, "response": response},
            sort_keys=True,
            ensure_ascii=False,
        )
        async with self._lock:
            with open(self.path, "a", encoding="utf-8") as audit_file:
                audit_file.write(line + "\n")
                audit_file.flush()


class AuditReplay:
    """
    Answers backend requests from a previously written audit log. Repeated requests are answered
    in the order they were logged; once exhausted, the last logged answer is repeated.
    """

    def __init__(self, entries: Dict[Tuple[str, str, str], List[Any]]):
        self.entries = entries
        self._cursor: DefaultDict[Tuple[str, str, str], int] = defaultdict(int)

    @classmethod
    def load(cls, path: str) -> "AuditReplay":
        entries: DefaultDict[Tuple[str, str, str], List[Any]] = defaultdict(list)
        try:
            with open(path, encoding="utf-8") as audit_file:
                for line_number, line in enumerate(audit_file, start=1):
                    if not line.strip():
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError as error:
                        raise IngestError(f"Malformed audit entry: {error.msg}", path, line_number) from error
                    key = (entry["kind"], entry["model"], json.dumps(entry["request"], ensure_ascii=False))
                    entries[key].append(entry["response"])
        except OSError as error:
            raise IngestError(f"Cannot read audit log: {error}", path) from error
        logger.info("Loaded %d distinct audited requests from %s", len(entries), path)
        return cls(dict(entries))

    def answer(self, kind: str, model_name: str, request: Any) -> Any:
        key = (kind, model_name, json.dumps(request, ensure_ascii=False))
        responses = self.entries.get(key)
        if not responses:
            raise MalformedResponseError(f"No audited {kind} response for request", [str(request)])
        index = min(self._cursor[key], len(responses) - 1)
        self._cursor[key] += 1
        return responses[index]
