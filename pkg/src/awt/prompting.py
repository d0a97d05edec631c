"""Two-step dataset-aware prompting for class descriptions.

Step 1 asks a chat model for dataset-conditioned questions (each carrying a
'{}' placeholder for the class name); step 2 answers every question per
class to collect diverse visual descriptions.  A fixture client replays
recorded responses keyed by request hash, so the whole flow runs offline
and bit-reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import ClientError, MissingPlaceholder, QuotaExhausted, UnparseableReply

API_KEY_ENV = "AWT_LLM_API_KEY"
DEFAULT_MODEL = "gpt-3.5-turbo"
DEFAULT_QUESTION_COUNT = 10
DEFAULT_TEMPERATURE = 0.9

STEP1_TEMPLATE = "Generate questions to classify images from a dataset, which {description}."
STEP1_BASE = "Generate questions to classify images."

_PLACEHOLDER_VARIANTS = re.compile(
    r"[\{\[<]\s*(?:class(?:[ _-]?name)?|category|object|label)\s*[\}\]>]", re.IGNORECASE
)
_LINE_PREFIX = re.compile(r"^\s*(?:[-*•]+|\(?\d+\s*[.):\]]|[Qq]\d+\s*[.:)])\s*")


@dataclass(frozen=True)
class DatasetSpec:
    """Dataset name, free-text description, and its class names."""

    name: str
    description: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("dataset name must be nonempty")
        if not self.class_names:
            raise ValueError("dataset needs at least one class name")
        object.__setattr__(self, "class_names", tuple(self.class_names))


@dataclass(frozen=True)
class QuestionSet:
    """Question templates, each containing exactly one '{}' placeholder."""

    questions: tuple[str, ...]

    def __post_init__(self):
        if not self.questions:
            raise UnparseableReply("question set is empty")
        for q in self.questions:
            if q.count("{}") != 1:
                raise MissingPlaceholder(q)
        object.__setattr__(self, "questions", tuple(self.questions))

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class DescriptionSet:
    """Generated descriptions for one class with their question provenance."""

    class_name: str
    descriptions: tuple[str, ...]
    provenance: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.descriptions) != len(self.provenance):
            raise ValueError("provenance must align with descriptions")
        if any(not d for d in self.descriptions):
            raise ValueError("descriptions must be nonempty strings")
        object.__setattr__(self, "descriptions", tuple(self.descriptions))
        object.__setattr__(self, "provenance", tuple(self.provenance))


def render_step1_prompt(spec: DatasetSpec, q_count: int) -> str:
    """Step-1 prompt; pure template, byte-identical for identical inputs."""
    if q_count < 1:
        raise ValueError("q_count must be >= 1")
    base = STEP1_TEMPLATE.format(description=spec.description) if spec.description else STEP1_BASE
    noun = "question" if q_count == 1 else "questions"
    return (
        f"{base} Write exactly {q_count} numbered {noun}, "
        "each containing '{}' as a placeholder for the class name."
    )


def render_step2_prompt(question: str, class_name: str, count: int) -> str:
    """Step-2 prompt: one question instantiated with the class name."""
    noun = "description" if count == 1 else "descriptions"
    return (
        f"{question.replace('{}', class_name)} "
        f"Answer with {count} short visual {noun} of {class_name}, one per line."
    )


def _split_lines(reply: str) -> list[str]:
    lines = []
    for raw in reply.splitlines():
        line = _LINE_PREFIX.sub("", raw).strip()
        if line:
            lines.append(line)
    return lines


def parse_questions(llm_reply: str, expected: int) -> QuestionSet:
    """Extract up to `expected` placeholder questions from a model reply.

    Numbered or bulleted prefixes are stripped and spelled-out placeholders
    such as '{class}' or '{category}' are normalized to '{}'.  A reply with
    no usable lines raises UnparseableReply; a line that does not end up
    with exactly one '{}' raises MissingPlaceholder.
    """
    lines = _split_lines(llm_reply)
    if not lines:
        raise UnparseableReply("reply contained no question lines")
    questions = []
    for line in lines[: expected if expected >= 1 else None]:
        normalized = _PLACEHOLDER_VARIANTS.sub("{}", line)
        if normalized.count("{}") != 1:
            raise MissingPlaceholder(line)
        questions.append(normalized)
    return QuestionSet(tuple(questions))


class ChatClient(Protocol):
    model: str

    def complete(self, messages: list[dict], *, temperature: float) -> str: ...


def request_hash(model: str, messages: list[dict], temperature: float) -> str:
    canonical = json.dumps(
        {"model": model, "messages": messages, "temperature": temperature},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class HttpChatClient:
    """Minimal chat-completion client over HTTPS.

    Sends {model, messages, temperature} as JSON; the bearer token is read
    from the AWT_LLM_API_KEY environment variable unless given explicitly.
    Retries rate-limit and server errors with backoff, then gives up with
    QuotaExhausted; transport and auth failures raise ClientError.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = DEFAULT_MODEL,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise ClientError(f"no API key: set {API_KEY_ENV} or pass api_key")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def complete(self, messages: list[dict], *, temperature: float) -> str:
        import requests

        payload = {"model": self.model, "messages": messages, "temperature": temperature}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ClientError(f"transport failure talking to {self.endpoint}: {exc}") from exc
            if resp.status_code in (429,) or resp.status_code >= 500:
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
                    continue
                raise QuotaExhausted(
                    f"{self.endpoint} kept answering {resp.status_code} after "
                    f"{self.max_retries} retries"
                )
            if resp.status_code != 200:
                raise ClientError(f"{self.endpoint} answered {resp.status_code}: {resp.text[:200]}")
            data = resp.json()
            try:
                if "choices" in data:
                    return data["choices"][0]["message"]["content"]
                return data["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ClientError(f"unexpected response shape from {self.endpoint}") from exc
        raise QuotaExhausted("retry loop exhausted")  # pragma: no cover


class FixtureClient:
    """Replays recorded replies from a directory of JSON files.

    Files are named <request_hash>.json and hold {"request": ..., "response":
    {"content": ...}}.  Unrecorded requests raise ClientError, keeping test
    runs honest about which prompts they exercise.
    """

    def __init__(self, directory: str | Path, model: str = DEFAULT_MODEL):
        self.directory = Path(directory)
        self.model = model
        if not self.directory.is_dir():
            raise ClientError(f"fixture directory does not exist: {self.directory}")

    def complete(self, messages: list[dict], *, temperature: float) -> str:
        h = request_hash(self.model, messages, temperature)
        path = self.directory / f"{h}.json"
        if not path.is_file():
            first = messages[0]["content"] if messages else ""
            raise ClientError(f"no recorded reply {h} for request starting {first[:80]!r}")
        return json.loads(path.read_text(encoding="utf-8"))["response"]["content"]

    @staticmethod
    def store(
        directory: str | Path,
        model: str,
        messages: list[dict],
        temperature: float,
        content: str,
    ) -> Path:
        """Record one canned reply; returns the fixture path."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        h = request_hash(model, messages, temperature)
        path = directory / f"{h}.json"
        payload = {
            "request": {"model": model, "messages": messages, "temperature": temperature},
            "response": {"content": content},
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _user_message(content: str) -> list[dict]:
    return [{"role": "user", "content": content}]


def generate_questions(
    spec: DatasetSpec,
    q_count: int,
    client: ChatClient,
    temperature: float = DEFAULT_TEMPERATURE,
    max_rounds: int = 3,
) -> QuestionSet:
    """Step 1: collect exactly q_count placeholder questions.

    Short replies trigger re-queries (with a batch marker so fixture hashes
    differ); after max_rounds the shortfall raises QuotaExhausted.
    """
    prompt = render_step1_prompt(spec, q_count)
    collected: list[str] = []
    for round_no in range(max_rounds):
        content = prompt if round_no == 0 else f"{prompt} (batch {round_no + 1})"
        reply = client.complete(_user_message(content), temperature=temperature)
        for q in parse_questions(reply, q_count - len(collected)).questions:
            if q not in collected:
                collected.append(q)
        if len(collected) >= q_count:
            return QuestionSet(tuple(collected[:q_count]))
    raise QuotaExhausted(
        f"collected only {len(collected)}/{q_count} questions after {max_rounds} rounds"
    )


def generate_descriptions(
    spec: DatasetSpec,
    questions: QuestionSet,
    class_name: str,
    m: int,
    client: ChatClient,
    temperature: float = DEFAULT_TEMPERATURE,
    max_extra_rounds: int = 2,
) -> DescriptionSet:
    """Step 2: collect exactly m descriptions for one class.

    Questions are asked round-robin for ceil(m / len(questions)) answers
    each; shortfalls re-query with a batch marker.  Returns exactly m
    descriptions or raises QuotaExhausted, never silently fewer.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    per_question = math.ceil(m / len(questions))
    collected: list[str] = []
    provenance: list[int] = []

    def ask(qi: int, question: str, count: int, batch: int) -> None:
        content = render_step2_prompt(question, class_name, count)
        if batch > 1:
            content = f"{content} (batch {batch})"
        reply = client.complete(_user_message(content), temperature=temperature)
        for answer in _split_lines(reply)[:count]:
            collected.append(answer)
            provenance.append(qi)

    for qi, question in enumerate(questions.questions):
        if len(collected) >= m:
            break
        ask(qi, question, per_question, batch=1)
    batch = 2
    while len(collected) < m and batch <= max_extra_rounds + 1:
        for qi, question in enumerate(questions.questions):
            if len(collected) >= m:
                break
            ask(qi, question, per_question, batch=batch)
        batch += 1
    if len(collected) < m:
        raise QuotaExhausted(
            f"collected only {len(collected)}/{m} descriptions for class {class_name!r}"
        )
    return DescriptionSet(
        class_name=class_name,
        descriptions=tuple(collected[:m]),
        provenance=tuple(provenance[:m]),
        metadata={"model": client.model, "temperature": temperature},
    )


def generate_description_bundle(
    spec: DatasetSpec,
    client: ChatClient,
    q_count: int = DEFAULT_QUESTION_COUNT,
    m: int = 50,
    temperature: float = DEFAULT_TEMPERATURE,
) -> dict:
    """Run both steps for every class; returns a JSON-ready bundle."""
    questions = generate_questions(spec, q_count, client, temperature)
    classes = []
    for name in spec.class_names:
        ds = generate_descriptions(spec, questions, name, m, client, temperature)
        classes.append(
            {
                "name": name,
                "descriptions": list(ds.descriptions),
                "provenance": list(ds.provenance),
            }
        )
    return {
        "dataset": {"name": spec.name, "description": spec.description},
        "questions": list(questions.questions),
        "classes": classes,
        "metadata": {"model": client.model, "temperature": temperature, "m": m},
    }
