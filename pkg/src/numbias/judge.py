"""Judge backends producing raw text generations: HTTP, replay cache, synthetic."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx
import numpy as np

from .dataset import ScoreRange
from .scoring import round_half_up

logger = logging.getLogger(__name__)

API_KEY_ENV = "JUDGE_API_KEY"


class JudgeError(RuntimeError):
    """A backend could not produce generations for an example."""

    def __init__(self, message: str, example_id: str | None = None, status: int | None = None):
        super().__init__(message)
        self.example_id = example_id
        self.status = status


class CacheMiss(JudgeError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    n_samples: int = 10
    temperature: float = 0.7
    max_tokens: int = 5

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.temperature < 0 or not math.isfinite(self.temperature):
            raise ValueError("temperature must be a finite value >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class JudgeRequest:
    """Everything any backend may need to score one example."""

    example_id: str
    prompt: str
    gold: float  # rescaled into score_range; only the synthetic judge reads it
    score_range: ScoreRange


@dataclass(frozen=True)
class RawGeneration:
    example_id: str
    texts: list[str]


class Judge(Protocol):
    name: str

    def sample(self, request: JudgeRequest, cfg: GenerationConfig) -> RawGeneration: ...


def fingerprint(cfg: GenerationConfig, prompt: str, model: str = "") -> str:
    """Key identifying a generation request in the replay cache."""
    payload = json.dumps(
        {
            "n_samples": cfg.n_samples,
            "temperature": repr(float(cfg.temperature)),
            "max_tokens": cfg.max_tokens,
            "model": model,
            "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class ReplayCache:
    """Append-only JSON-lines store of ``{example_id, fingerprint, texts}`` records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], list[str]] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        self._entries[(str(rec["example_id"]), rec["fingerprint"])] = list(rec["texts"])
                    except (json.JSONDecodeError, KeyError, TypeError):
                        raise JudgeError(f"{self.path}:{lineno}: corrupt cache record") from None

    def get(self, example_id: str, fp: str) -> Optional[list[str]]:
        texts = self._entries.get((example_id, fp))
        return None if texts is None else list(texts)

    def put(self, example_id: str, fp: str, texts: Sequence[str]) -> None:
        rec = {"example_id": example_id, "fingerprint": fp, "texts": list(texts)}
        with self._lock:
            self._entries[(example_id, fp)] = list(texts)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class EndpointConfig:
    url: str
    model: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    supports_n: bool = True

    @classmethod
    def from_env(cls, url: str, model: str, **kw) -> "EndpointConfig":
        return cls(url=url, model=model, api_key=os.environ.get(API_KEY_ENV), **kw)


def _chat_url(url: str) -> str:
    url = url.rstrip("/")
    return url if url.endswith("/chat/completions") else url + "/chat/completions"


class HttpJudge:
    """OpenAI-compatible chat-completions client.

    Sends the prompt as one user message and asks for ``n`` choices per call;
    servers that return fewer are topped up with further requests.
    """

    name = "http"

    def __init__(
        self,
        endpoint: EndpointConfig,
        cache: ReplayCache | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.cache = cache
        headers = {"Content-Type": "application/json"}
        if endpoint.api_key:
            headers["Authorization"] = f"Bearer {endpoint.api_key}"
        self._client = httpx.Client(timeout=endpoint.timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict, example_id: str) -> list[str]:
        last: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                time.sleep(self.endpoint.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(_chat_url(self.endpoint.url), json=body)
            except httpx.HTTPError as exc:
                last = exc
                logger.warning("example %s: transport error %s (attempt %d)", example_id, exc, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = JudgeError(f"HTTP {resp.status_code}", example_id, resp.status_code)
                logger.warning("example %s: HTTP %d (attempt %d)", example_id, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise JudgeError(
                    f"example {example_id}: HTTP {resp.status_code}: {resp.text[:200]}",
                    example_id,
                    resp.status_code,
                )
            try:
                choices = resp.json()["choices"]
                return [(c.get("message") or {}).get("content") or c.get("text") or "" for c in choices]
            except (ValueError, KeyError, TypeError, AttributeError):
                raise JudgeError(f"example {example_id}: malformed completion response", example_id) from None
        status = getattr(last, "status", None)
        raise JudgeError(
            f"example {example_id}: giving up after {self.endpoint.max_retries + 1} attempts ({last})",
            example_id,
            status,
        )

    def sample(self, request: JudgeRequest, cfg: GenerationConfig) -> RawGeneration:
        texts: list[str] = []
        while len(texts) < cfg.n_samples:
            want = cfg.n_samples - len(texts) if self.endpoint.supports_n else 1
            body = {
                "model": self.endpoint.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens,
            }
            if self.endpoint.supports_n:
                body["n"] = want
            got = self._post(body, request.example_id)
            if not got:
                raise JudgeError(f"example {request.example_id}: response had no choices", request.example_id)
            texts.extend(got[:want])
        if self.cache is not None:
            self.cache.put(request.example_id, fingerprint(cfg, request.prompt, self.endpoint.model), texts)
        return RawGeneration(request.example_id, texts)


class ReplayJudge:
    """Serves generations from a replay cache and never touches the network."""

    name = "replay"

    def __init__(self, cache: ReplayCache, model: str = ""):
        self.cache = cache
        self.model = model

    def sample(self, request: JudgeRequest, cfg: GenerationConfig) -> RawGeneration:
        texts = self.cache.get(request.example_id, fingerprint(cfg, request.prompt, self.model))
        if texts is None:
            raise CacheMiss(
                f"replay cache has no entry for example {request.example_id} with this config",
                request.example_id,
            )
        return RawGeneration(request.example_id, texts)


@dataclass(frozen=True)
class SyntheticJudgeParams:
    mode_value: int = 8
    base_concentration: float = 0.9
    reference_temperature: float = 0.7
    noise_halfwidth: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.base_concentration <= 1.0:
            raise ValueError("base_concentration must lie in [0, 1]")
        if self.reference_temperature <= 0:
            raise ValueError("reference_temperature must be positive")
        if self.noise_halfwidth < 0:
            raise ValueError("noise_halfwidth must be >= 0")

    def concentration(self, temperature: float) -> float:
        """Probability of emitting the mode at ``temperature``."""
        if temperature <= 0:
            return 1.0 if self.base_concentration > 0 else 0.0
        lam = self.base_concentration * self.reference_temperature / temperature
        return min(max(lam, 0.0), 1.0)


def _seed_words(seed: int, example_id: str, cfg: GenerationConfig) -> list[int]:
    digest = hashlib.sha256(
        json.dumps([example_id, repr(float(cfg.temperature)), cfg.n_samples, cfg.max_tokens]).encode("utf-8")
    ).digest()
    return [seed & 0xFFFFFFFFFFFFFFFF] + [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def sample_synthetic(
    params: SyntheticJudgeParams,
    example_id: str,
    gold: float,
    score_range: ScoreRange,
    cfg: GenerationConfig,
) -> RawGeneration:
    """Deterministic biased judge: the mode with probability λ(T), else noisy gold."""
    if not score_range.min <= params.mode_value <= score_range.max:
        raise ValueError(f"mode_value {params.mode_value} is outside {score_range}")
    rng = np.random.default_rng(np.random.SeedSequence(_seed_words(params.seed, example_id, cfg)))
    lam = params.concentration(cfg.temperature)
    h = params.noise_halfwidth
    texts = []
    for _ in range(cfg.n_samples):
        u = rng.random()
        noise = int(rng.integers(-h, h + 1))
        if u < lam:
            value = params.mode_value
        else:
            value = min(max(round_half_up(gold + noise), score_range.min), score_range.max)
        texts.append(str(value))
    return RawGeneration(example_id, texts)


@dataclass
class SyntheticJudge:
    params: SyntheticJudgeParams = field(default_factory=SyntheticJudgeParams)
    cache: Optional[ReplayCache] = None
    # per-example base concentration overrides, keyed by example id
    concentration_by_id: Optional[dict[str, float]] = None
    name: str = "synthetic"

    def sample(self, request: JudgeRequest, cfg: GenerationConfig) -> RawGeneration:
        params = self.params
        if self.concentration_by_id and request.example_id in self.concentration_by_id:
            params = replace(params, base_concentration=self.concentration_by_id[request.example_id])
        gen = sample_synthetic(params, request.example_id, request.gold, request.score_range, cfg)
        if self.cache is not None:
            self.cache.put(request.example_id, fingerprint(cfg, request.prompt), gen.texts)
        return gen


def sample_all(
    judge: Judge,
    requests: Sequence[JudgeRequest],
    cfg: GenerationConfig,
    parallelism: int = 1,
) -> list[RawGeneration | JudgeError]:
    """Sample every request; results come back in request order.

    Per-example failures are returned in place rather than raised.
    """

    def one(req: JudgeRequest) -> RawGeneration | JudgeError:
        try:
            return judge.sample(req, cfg)
        except JudgeError as exc:
            if exc.example_id is None:
                exc.example_id = req.example_id
            return exc

    if parallelism <= 1 or len(requests) <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, requests))


def params_dict(params: SyntheticJudgeParams) -> dict:
    return asdict(params)
