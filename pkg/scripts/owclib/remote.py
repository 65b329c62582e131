import asyncio
import os
from typing import Awaitable, Callable, Optional, Sequence, TypeVar

from openai import (
    APIConnectionError,
    APIStatusError,
    APITimeoutError,
    AsyncOpenAI,
    RateLimitError,
)
from tenacity import (
    AsyncRetrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_random_exponential,
)

from .config import ENV_API_KEY, BackendDescriptor
from .errors import HttpRejectionError, TransportError

T = TypeVar("T")

RETRIABLE_ERRORS = (APITimeoutError, APIConnectionError, RateLimitError)


class OpenAIClientMixin:
    """
    Shared plumbing for services that talk to an OpenAI-compatible endpoint: client creation,
    bounded concurrency and retries of transient failures. HTTP rejections are not retried.
    """

    api_name = "OpenAI"

    def __init__(self, descriptor: BackendDescriptor, verbose: bool = False):
        self.descriptor = descriptor
        self.verbose = verbose
        self.semaphore = asyncio.Semaphore(descriptor.parallelism)
        self._client: Optional[AsyncOpenAI] = None

    async def create_client(self) -> AsyncOpenAI:
        if self._client is None:
            self._client = AsyncOpenAI(
                base_url=self.descriptor.endpoint,
                # Local OpenAI-compatible servers often accept any key
                api_key=os.environ.get(ENV_API_KEY) or "unset",
                timeout=self.descriptor.timeout_ms / 1000,
                max_retries=0,
            )
        return self._client

    def before_retry_sleep(self, retry_state):
        if self.verbose:
            print(f"Transient error on the {self.api_name} API, sleeping before retrying...")

    async def with_retries(self, request: Callable[[], Awaitable[T]], texts: Sequence[str]) -> T:
        try:
            async with self.semaphore:
                async for attempt in AsyncRetrying(
                    retry=retry_if_exception_type(RETRIABLE_ERRORS),
                    wait=wait_random_exponential(min=1, max=20),
                    stop=stop_after_attempt(self.descriptor.max_attempts),
                    before_sleep=self.before_retry_sleep,
                    reraise=True,
                ):
                    with attempt:
                        result = await request()
        except RETRIABLE_ERRORS as error:
            raise TransportError(
                f"{self.api_name} API unreachable after {self.descriptor.max_attempts} attempts: {error}", texts
            ) from error
        except APIStatusError as error:
            raise HttpRejectionError(
                f"{self.api_name} API rejected the request with HTTP {error.status_code}: {error.message}",
                error.status_code,
                texts,
            ) from error
        return result
