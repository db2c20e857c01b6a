"""Conversation handling for text-generation providers.

Two providers are offered: a deterministic scripted provider that replays
recorded exchanges for offline use, and a live HTTP provider speaking a
minimal chat-completion wire shape. Both phases of a generation session
run through one conversation so the provider keeps the earlier context.

Script file format (UTF-8 JSON): a list of entries, consumed in order::

    [{"match": {"mode": "exact" | "prefix" | "contains", "pattern": "..."},
      "reply": "...",            # or "reply_file": path relative to the script
      "truncated": false}, ...]

Each entry's matcher is checked against the outgoing prompt's full text;
a rejection raises ScriptMismatch rather than skipping the entry.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ScenarioForgeError

USER = "user"
MODEL = "model"


class BadConfig(ScenarioForgeError):
    pass


class ScriptUnreadable(ScenarioForgeError):
    pass


class OutOfOrder(ScenarioForgeError):
    pass


class ScriptExhausted(ScenarioForgeError):
    pass


class ScriptMismatch(ScenarioForgeError):
    pass


class Timeout(ScenarioForgeError):
    pass


class AuthFailed(ScenarioForgeError):
    pass


class RemoteError(ScenarioForgeError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str  # user | model
    text: str
    timestamp: float

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text, "timestamp": self.timestamp}


@dataclass(frozen=True)
class ChatTranscript:
    messages: tuple[ChatMessage, ...] = ()

    def __len__(self) -> int:
        return len(self.messages)

    def to_dict(self) -> dict:
        return {"messages": [m.to_dict() for m in self.messages]}

    @classmethod
    def from_dict(cls, data: dict) -> "ChatTranscript":
        return cls(tuple(ChatMessage(**m) for m in data.get("messages", [])))


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # scripted | http
    script_path: str | None = None
    endpoint_url: str | None = None
    model_name: str = "default"
    auth_secret_ref: str | None = None
    timeout: float = 60.0
    max_retries: int = 2

    def validate(self) -> None:
        if self.kind == "scripted":
            if not self.script_path:
                raise BadConfig("scripted provider requires script_path")
        elif self.kind == "http":
            if not self.endpoint_url:
                raise BadConfig("http provider requires endpoint_url")
        else:
            raise BadConfig(f"unknown provider kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "script_path": self.script_path,
            "endpoint_url": self.endpoint_url, "model_name": self.model_name,
            "auth_secret_ref": self.auth_secret_ref, "timeout": self.timeout,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderConfig":
        return cls(**data)


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    truncated: bool = False
    latency: float = 0.0


@dataclass(frozen=True)
class ScriptEntry:
    mode: str
    pattern: str
    reply: str
    truncated: bool = False

    def accepts(self, text: str) -> bool:
        if self.mode == "exact":
            return text == self.pattern
        if self.mode == "prefix":
            return text.startswith(self.pattern)
        return self.pattern in text  # contains


def load_script(path: str | Path) -> list[ScriptEntry]:
    path = Path(path)
    try:
        entries = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScriptUnreadable(f"cannot read script {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise ScriptUnreadable(f"script {path} must be a JSON list")
    script: list[ScriptEntry] = []
    for i, entry in enumerate(entries):
        try:
            match = entry.get("match", {})
            if "reply_file" in entry:
                reply = (path.parent / entry["reply_file"]).read_text("utf-8")
            else:
                reply = entry["reply"]
            script.append(
                ScriptEntry(
                    mode=match.get("mode", "contains"),
                    pattern=match.get("pattern", ""),
                    reply=reply,
                    truncated=bool(entry.get("truncated", False)),
                )
            )
        except (AttributeError, KeyError, OSError, TypeError) as exc:
            raise ScriptUnreadable(f"script {path} entry {i}: {exc}") from exc
        if script[-1].mode not in ("exact", "prefix", "contains"):
            raise ScriptUnreadable(f"script {path} entry {i}: bad match mode {script[-1].mode!r}")
    return script


class _ScriptedProvider:
    def __init__(self, config: ProviderConfig, cursor: int = 0):
        self.entries = load_script(config.script_path)
        self.cursor = cursor

    def complete(self, messages: list[ChatMessage]) -> ProviderResponse:
        if self.cursor >= len(self.entries):
            raise ScriptExhausted(f"script exhausted after {len(self.entries)} replies")
        entry = self.entries[self.cursor]
        prompt = messages[-1].text
        if not entry.accepts(prompt):
            raise ScriptMismatch(
                f"script entry {self.cursor} ({entry.mode} {entry.pattern!r}) rejected the prompt"
            )
        self.cursor += 1
        return ProviderResponse(text=entry.reply, truncated=entry.truncated)


class _HttpProvider:
    """Minimal chat-completion client; vendor dialects live in adapters."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self._client = None

    def _secret(self) -> str | None:
        ref = self.config.auth_secret_ref
        if not ref:
            return None
        secret = os.environ.get(ref)
        if not secret:
            raise AuthFailed(f"environment variable {ref!r} is not set")
        return secret

    def complete(self, messages: list[ChatMessage]) -> ProviderResponse:
        import httpx

        if self._client is None:
            self._client = httpx.Client(timeout=self.config.timeout)
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "user" if m.role == USER else "assistant", "content": m.text}
                for m in messages
            ],
        }
        headers = {}
        secret = self._secret()
        if secret:
            headers["Authorization"] = f"Bearer {secret}"

        last_exc: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                response = self._client.post(self.config.endpoint_url, json=body, headers=headers)
            except httpx.TimeoutException:
                last_exc = Timeout(f"provider timed out after {self.config.timeout}s")
                continue
            except httpx.TransportError as exc:
                last_exc = RemoteError(f"transport failure: {exc}")
                continue
            if response.status_code in (401, 403):
                raise AuthFailed(f"provider rejected credentials ({response.status_code})")
            if 500 <= response.status_code < 600:
                last_exc = RemoteError(f"provider returned {response.status_code}")
                continue
            if not (200 <= response.status_code < 300):
                raise RemoteError(f"provider returned {response.status_code}")
            return self._parse(response)
        raise last_exc  # type: ignore[misc]

    @staticmethod
    def _parse(response: Any) -> ProviderResponse:
        try:
            payload = response.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise RemoteError(f"unrecognized provider reply shape: {exc}") from exc
        if not isinstance(text, str):
            raise RemoteError("provider reply content is not text")
        return ProviderResponse(text=text, truncated=(finish == "length"))


class Conversation:
    """Ordered user/model exchange bound to one provider.

    Single-writer: sends on one handle must be externally serialized.
    Failed sends never mutate the transcript.
    """

    def __init__(self, config: ProviderConfig, history: tuple[ChatMessage, ...] = ()):
        config.validate()
        self.config = config
        self._messages: list[ChatMessage] = list(history)
        if config.kind == "scripted":
            replayed = sum(1 for m in self._messages if m.role == MODEL)
            self._provider = _ScriptedProvider(config, cursor=replayed)
        else:
            self._provider = _HttpProvider(config)


def open_conversation(config: ProviderConfig) -> Conversation:
    """Bind an empty transcript to the configured provider."""
    return Conversation(config)


def resume_conversation(config: ProviderConfig, transcript: ChatTranscript) -> Conversation:
    """Rebind a persisted transcript; scripted replies already consumed are skipped."""
    return Conversation(config, history=transcript.messages)


def send(conversation: Conversation, prompt: Any) -> ProviderResponse:
    """Submit a prompt and append the user/model pair to the transcript.

    ``prompt`` is a PromptPackage (anything with ``full_text``). The append
    is atomic: provider failures leave the transcript untouched.
    """
    messages = conversation._messages
    if messages and messages[-1].role != MODEL:
        raise OutOfOrder("previous message is still awaiting a model reply")
    full_text = prompt.full_text if hasattr(prompt, "full_text") else str(prompt)
    now = time.time()
    attempt = messages + [ChatMessage(USER, full_text, now)]
    started = time.monotonic()
    response = conversation._provider.complete(attempt)
    latency = time.monotonic() - started
    response = ProviderResponse(response.text, response.truncated, latency)
    messages.append(attempt[-1])
    messages.append(ChatMessage(MODEL, response.text, max(now, time.time())))
    return response


def transcript(conversation: Conversation) -> ChatTranscript:
    """Immutable snapshot; later sends do not mutate it."""
    return ChatTranscript(tuple(conversation._messages))
