"""LLM backend abstraction: live, record, replay, and stub modes.

Live mode speaks the HTTP JSON chat-completion protocol (messages array,
model, temperature) with the API key read from a named environment
variable at call time; the key is never stored or logged. Record mode is
live plus transcript persistence after every call. Replay looks prompts up
by binding digest in a saved transcript and is fully offline, as is stub
mode, which answers from a test-provided table keyed by digest (with the
template id as a documented fallback key).

Transcripts are JSON-Lines files; one object per call.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LlmUnavailable, ReplayMiss, TranscriptCorrupt
from .prompts import RenderedPrompt

MODES = ("live", "record", "replay", "stub")


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    backoff_start: float = 1.0  # seconds, doubles per retry


@dataclass
class BackendConfig:
    mode: str = "stub"
    model: str = "gpt-4"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    credentials_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0  # deterministic pipelines by default
    max_tokens: int = 2048
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    transcript_path: str | None = None
    system_role_playing: bool = True  # role section as system message

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode == "replay" and not self.transcript_path:
            raise ValueError("replay mode needs a transcript_path")


@dataclass
class TranscriptEntry:
    digest: str
    template_id: str
    request: str
    reply: str
    timestamp: float
    model: str


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def by_digest(self) -> dict[str, TranscriptEntry]:
        return {entry.digest: entry for entry in self.entries}


def load_transcript(path: str | Path) -> Transcript:
    path = Path(path)
    entries: list[TranscriptEntry] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                entries.append(TranscriptEntry(
                    digest=record["digest"],
                    template_id=record["template_id"],
                    request=record["request"],
                    reply=record["reply"],
                    timestamp=record["timestamp"],
                    model=record["model"],
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise TranscriptCorrupt(str(path), lineno, str(exc))
    return Transcript(entries)


def save_transcript(transcript: Transcript, path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for entry in transcript.entries:
            handle.write(json.dumps({
                "digest": entry.digest,
                "template_id": entry.template_id,
                "request": entry.request,
                "reply": entry.reply,
                "timestamp": entry.timestamp,
                "model": entry.model,
            }, sort_keys=True) + "\n")


class LlmGateway:
    """One backend instance; serializes calls within a pipeline run.

    ``stub_replies`` maps prompt digests (or template ids) to replies.
    Every non-replay call is logged to the in-memory ``transcript`` so a
    stub run can be saved and replayed later.
    """

    def __init__(self, config: BackendConfig,
                 stub_replies: dict[str, str] | None = None):
        self.config = config
        self.stub_replies = dict(stub_replies or {})
        self.transcript = Transcript()
        self._replay: dict[str, TranscriptEntry] | None = None
        self.calls = 0

    def _replay_table(self) -> dict[str, TranscriptEntry]:
        if self._replay is None:
            self._replay = load_transcript(
                self.config.transcript_path).by_digest()
        return self._replay

    def complete(self, prompt: RenderedPrompt) -> str:
        self.calls += 1
        mode = self.config.mode
        if mode == "replay":
            entry = self._replay_table().get(prompt.digest)
            if entry is None:
                raise ReplayMiss(prompt.digest)
            return entry.reply

        if mode == "stub":
            reply = self.stub_replies.get(prompt.digest)
            if reply is None:
                reply = self.stub_replies.get(prompt.template_id)
            if reply is None:
                raise LlmUnavailable(
                    f"stub table has no reply for digest {prompt.digest} "
                    f"or template {prompt.template_id}")
        else:  # live or record
            reply = self._call_http(prompt)

        self.transcript.entries.append(TranscriptEntry(
            digest=prompt.digest, template_id=prompt.template_id,
            request=prompt.text, reply=reply, timestamp=time.time(),
            model=self.config.model))
        if mode == "record":
            if not self.config.transcript_path:
                raise ValueError("record mode needs a transcript_path")
            save_transcript(self.transcript, self.config.transcript_path)
        return reply

    def _call_http(self, prompt: RenderedPrompt) -> str:
        import requests

        key = os.environ.get(self.config.credentials_env, "")
        if not key:
            raise LlmUnavailable(
                f"environment variable {self.config.credentials_env} "
                "is not set")
        if self.config.system_role_playing and prompt.role_text:
            messages = [{"role": "system", "content": prompt.role_text},
                        {"role": "user", "content": prompt.body_text}]
        else:
            messages = [{"role": "user", "content": prompt.text}]
        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        delay = self.config.retry.backoff_start
        last_error = "no attempts made"
        for attempt in range(self.config.retry.max_attempts):
            if attempt:
                time.sleep(delay)
                delay *= 2
            try:
                response = requests.post(
                    self.config.endpoint, json=payload, timeout=120,
                    headers={"Authorization": f"Bearer {key}"})
            except requests.RequestException as exc:
                last_error = type(exc).__name__
                continue
            if response.status_code in (429,) or response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise LlmUnavailable(
                    f"backend rejected the request: "
                    f"HTTP {response.status_code}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise LlmUnavailable(f"malformed completion response: {exc}")
        raise LlmUnavailable(
            f"backend unreachable after "
            f"{self.config.retry.max_attempts} attempts ({last_error})")


def replay_gateway(transcript_path: str | Path,
                   model: str = "gpt-4") -> LlmGateway:
    return LlmGateway(BackendConfig(mode="replay", model=model,
                                    transcript_path=str(transcript_path)))


def stub_gateway(replies: dict[str, str]) -> LlmGateway:
    return LlmGateway(BackendConfig(mode="stub"), stub_replies=replies)
