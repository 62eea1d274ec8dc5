"""Shared HTTP plumbing for remote embedding and chat backends."""

from __future__ import annotations

import logging
import time
from typing import Any

import requests

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
INITIAL_BACKOFF_S = 0.5


class BackendUnavailable(Exception):
    """A remote backend failed after bounded retries."""

    def __init__(self, cause: str):
        super().__init__(f"backend unavailable: {cause}")
        self.cause = cause


def post_json(
    url: str,
    payload: dict[str, Any],
    headers: dict[str, str] | None = None,
    timeout: float = 60.0,
    session: requests.Session | None = None,
) -> dict[str, Any]:
    """POST with bounded retries (3 attempts, exponential backoff from 500 ms)."""
    http = session or requests
    last_error = "unknown"
    for attempt in range(MAX_ATTEMPTS):
        try:
            response = http.post(url, json=payload, headers=headers or {}, timeout=timeout)
            if response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
            else:
                response.raise_for_status()
                return response.json()
        except requests.RequestException as exc:
            last_error = str(exc)
        if attempt + 1 < MAX_ATTEMPTS:
            delay = INITIAL_BACKOFF_S * (2**attempt)
            logger.warning("retrying %s after %.1fs (%s)", url, delay, last_error)
            time.sleep(delay)
    raise BackendUnavailable(last_error)
