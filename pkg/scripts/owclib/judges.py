import json
import logging
import re
from abc import ABC
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from tenacity import AsyncRetrying, retry_if_exception_type, stop_after_attempt

from .auditlog import AUDIT_JUDGE, AuditLog, AuditReplay
from .config import DEFAULT_MAX_PROMPT_CHARS, BackendDescriptor, config_digest
from .embeddings import cosine, mock_embed
from .errors import AdjudicationError, ConfigError, IngestError, JudgeParseError, MalformedResponseError
from .remote import OpenAIClientMixin
from .text import STOPWORD_SET, normalize, tokenize

logger = logging.getLogger(__name__)

DEFAULT_QUESTION = "What type of object is in this image?"
MAX_VERDICT_ATTEMPTS = 3

INCLUSION_PROMPT = (
    "You are a model that determines whether an answer is a good reply to a question given also its target value."
    "\n\n"
    "This is the question: {question}\n"
    "This is the answer: {answer}\n"
    "This is the target value: {target}\n\n"
    "If the answer describes the target, reply positively. "
    "If the answer includes the target value or a synonym of it, reply positively. "
    "If the target is generic but it is related to the answer, reply positively. "
    'Reply only with "1" if yes, or "0" if no.'
)

PAIRWISE_PROMPT = (
    "You are a model that discriminates whether labels A or B better align with a target value.\n\n"
    "This is label A: {label_a}\n"
    "This is label B: {label_b}\n"
    "This is the target value: {target}\n\n"
    "Does A align better with the target value? Does B align better with the target value? "
    'Reply only with "1" if A wins over B, or "0" if B wins over A.'
)

INCLUSION_PATTERN = re.compile(
    r"This is the answer: (?P<answer>.*?)\nThis is the target value: (?P<target>.*?)\n\nIf the answer describes",
    re.DOTALL,
)
PAIRWISE_PATTERN = re.compile(
    r"This is label A: (?P<label_a>.*?)\nThis is label B: (?P<label_b>.*?)\n"
    r"This is the target value: (?P<target>.*?)\n\nDoes A align",
    re.DOTALL,
)
VERDICT_PATTERN = re.compile(r"(?<![\w.])([01])(?!\w|\.\d)")


class Winner(str, Enum):
    A = "A"
    B = "B"


def parse_binary_verdict(reply_text: str) -> int:
    match = VERDICT_PATTERN.search(reply_text)
    if match is None:
        raise JudgeParseError(reply_text)
    return int(match.group(1))


def render_inclusion_prompt(
    answer: str, target: str, question: str = DEFAULT_QUESTION, max_chars: int = DEFAULT_MAX_PROMPT_CHARS
) -> str:
    prompt = INCLUSION_PROMPT.format(question=question, answer=answer, target=target)
    overflow = len(prompt) - max_chars
    if overflow > 0:
        keep = max(0, len(answer) - overflow)
        logger.warning("Judge prompt is %d characters over budget, truncating answer to %d characters", overflow, keep)
        prompt = INCLUSION_PROMPT.format(question=question, answer=answer[:keep], target=target)
    return prompt


def render_pairwise_prompt(
    label_a: str, label_b: str, target: str, max_chars: int = DEFAULT_MAX_PROMPT_CHARS
) -> str:
    prompt = PAIRWISE_PROMPT.format(label_a=label_a, label_b=label_b, target=target)
    if len(prompt) > max_chars:
        frame = len(PAIRWISE_PROMPT.format(label_a="", label_b="", target=target))
        keep = max(0, (max_chars - frame) // 2)
        logger.warning("Pairwise prompt is over budget, truncating both labels to %d characters", keep)
        prompt = PAIRWISE_PROMPT.format(label_a=label_a[:keep], label_b=label_b[:keep], target=target)
    return prompt


class Judge(ABC):
    """
    A provider that completes a rendered judge prompt. Callers parse the reply.
    """

    def __init__(self, descriptor: BackendDescriptor, audit_log: Optional[AuditLog] = None):
        self.descriptor = descriptor
        self.audit_log = audit_log

    async def complete(self, prompt: str) -> str:
        raise NotImplementedError

    async def judge_binary(self, rendered_prompt: str) -> str:
        if not rendered_prompt:
            raise ValueError("judge_binary requires a non-empty prompt")
        reply = await self.complete(rendered_prompt)
        if self.audit_log:
            await self.audit_log.record(AUDIT_JUDGE, self.descriptor.model_name, rendered_prompt, reply)
        return reply


async def adjudicate(judge: Judge, prompt: str, max_attempts: int = MAX_VERDICT_ATTEMPTS) -> Tuple[int, str]:
    """
    Asks the judge until its reply holds a verdict, at most max_attempts times.
    Returns the verdict and the raw reply it was parsed from.
    """
    async for attempt in AsyncRetrying(
        retry=retry_if_exception_type(JudgeParseError),
        stop=stop_after_attempt(max_attempts),
        reraise=True,
    ):
        with attempt:
            reply = await judge.judge_binary(prompt)
            verdict = parse_binary_verdict(reply)
    return verdict, reply


async def judge_pairwise(
    judge: Judge,
    label_a: str,
    label_b: str,
    target: str,
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> Winner:
    prompt = render_pairwise_prompt(label_a, label_b, target, max_chars)
    try:
        verdict, _ = await adjudicate(judge, prompt)
    except JudgeParseError as error:
        raise AdjudicationError(error.reply) from error
    return Winner.A if verdict == 1 else Winner.B


class OpenAIJudgeService(OpenAIClientMixin, Judge):
    """
    Judge served behind an OpenAI-compatible chat-completions endpoint, decoded at temperature 0
    """

    api_name = "chat completions"

    def __init__(self, descriptor: BackendDescriptor, audit_log: Optional[AuditLog] = None, verbose: bool = False):
        OpenAIClientMixin.__init__(self, descriptor, verbose)
        Judge.__init__(self, descriptor, audit_log)

    async def complete(self, prompt: str) -> str:
        client = await self.create_client()

        async def request():
            return await client.chat.completions.create(
                model=self.descriptor.model_name,
                messages=[{"role": "user", "content": prompt}],
                temperature=0,
            )

        response = await self.with_retries(request, [prompt])
        if not response.choices:
            raise MalformedResponseError("Chat completion returned no choices", [prompt])
        return response.choices[0].message.content or ""


class JudgeRuleKind(str, Enum):
    Exact = "exact"
    TokenOverlap = "token_overlap"
    Cosine = "cosine"
    Pair = "pair"
    Constant = "constant"


class PairwiseMode(str, Enum):
    Cosine = "cosine"
    Constant = "constant"


@dataclass(frozen=True)
class JudgeRule:
    kind: JudgeRuleKind
    reply: str = "1"
    threshold: float = 0.5
    answer: str = ""
    target: str = ""

    def fires(self, answer: str, target: str, seed: int) -> bool:
        answer, target = normalize(answer), normalize(target)
        if self.kind == JudgeRuleKind.Exact:
            return bool(answer) and answer == target
        if self.kind == JudgeRuleKind.TokenOverlap:
            content_answer = {token for token in tokenize(answer) if token not in STOPWORD_SET}
            content_target = {token for token in tokenize(target) if token not in STOPWORD_SET}
            return bool(content_answer & content_target)
        if self.kind == JudgeRuleKind.Cosine:
            return cosine(mock_embed(answer, seed), mock_embed(target, seed)) >= self.threshold
        if self.kind == JudgeRuleKind.Pair:
            return answer == normalize(self.answer) and target == normalize(self.target)
        return True


DEFAULT_RULES = [JudgeRule(JudgeRuleKind.Exact), JudgeRule(JudgeRuleKind.TokenOverlap)]


class MockJudgeService(Judge):
    """
    Rule-table judge. For inclusion prompts the first rule that fires gives the reply, otherwise default_reply.
    For pairwise prompts the label closer to the target under the mock embedder wins, A on ties,
    or a constant reply is returned.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        rules: Optional[List[JudgeRule]] = None,
        default_reply: str = "0",
        pairwise: PairwiseMode = PairwiseMode.Cosine,
        pairwise_reply: str = "1",
        audit_log: Optional[AuditLog] = None,
    ):
        super().__init__(descriptor, audit_log)
        self.rules = list(DEFAULT_RULES if rules is None else rules)
        self.default_reply = default_reply
        self.pairwise = pairwise
        self.pairwise_reply = pairwise_reply

    @classmethod
    def from_dict(
        cls, descriptor: BackendDescriptor, data: Dict[str, Any], audit_log: Optional[AuditLog] = None
    ) -> "MockJudgeService":
        try:
            rules = [
                JudgeRule(
                    kind=JudgeRuleKind(rule["kind"]),
                    reply=str(rule.get("reply", "1")),
                    threshold=float(rule.get("threshold", 0.5)),
                    answer=rule.get("answer", ""),
                    target=rule.get("target", ""),
                )
                for rule in data.get("rules", [asdict(rule) for rule in DEFAULT_RULES])
            ]
            return cls(
                descriptor,
                rules=rules,
                default_reply=str(data.get("default_reply", "0")),
                pairwise=PairwiseMode(data.get("pairwise", PairwiseMode.Cosine.value)),
                pairwise_reply=str(data.get("pairwise_reply", "1")),
                audit_log=audit_log,
            )
        except (KeyError, ValueError) as error:
            raise ConfigError(f"Invalid mock judge rule table: {error}") from error

    @staticmethod
    def load_rules(path: str) -> Dict[str, Any]:
        try:
            with open(path, encoding="utf-8") as rules_file:
                return json.load(rules_file)
        except OSError as error:
            raise IngestError(f"Cannot read mock judge rules: {error}", path) from error
        except json.JSONDecodeError as error:
            raise IngestError(f"Malformed mock judge rules: {error.msg}", path, error.lineno) from error

    def digest(self) -> str:
        table = {
            "rules": [{**asdict(rule), "kind": rule.kind.value} for rule in self.rules],
            "default_reply": self.default_reply,
            "pairwise": self.pairwise.value,
            "pairwise_reply": self.pairwise_reply,
        }
        return config_digest(table)

    async def complete(self, prompt: str) -> str:
        seed = self.descriptor.seed
        pairwise = PAIRWISE_PATTERN.search(prompt)
        if pairwise:
            if self.pairwise == PairwiseMode.Constant:
                return self.pairwise_reply
            target = mock_embed(normalize(pairwise.group("target")), seed)
            score_a = cosine(mock_embed(normalize(pairwise.group("label_a")), seed), target)
            score_b = cosine(mock_embed(normalize(pairwise.group("label_b")), seed), target)
            return "1" if score_a >= score_b else "0"
        inclusion = INCLUSION_PATTERN.search(prompt)
        if inclusion:
            for rule in self.rules:
                if rule.fires(inclusion.group("answer"), inclusion.group("target"), seed):
                    return rule.reply
        return self.default_reply


class ReplayJudgeService(Judge):
    def __init__(self, descriptor: BackendDescriptor, replay: AuditReplay):
        super().__init__(descriptor)
        self.replay = replay

    async def complete(self, prompt: str) -> str:
        return str(self.replay.answer(AUDIT_JUDGE, self.descriptor.model_name, prompt))
