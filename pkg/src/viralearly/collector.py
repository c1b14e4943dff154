"""Engagement tracking against an abstract post source.

Polling follows a tiered schedule (fast early, coarser later). The transport
is a small protocol — ``fetch(post_id) -> PollResult`` — so tests inject
scripted fakes; a dataset-replay source and an HTTP source are provided.
Time is injected through a clock object, so tracking runs under simulated
time in tests and wall-clock time in production.
"""

from __future__ import annotations

import json
import time as _time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from .errors import ConfigError
from .ingest import EngagementSnapshot, PostRecord

#: (max_age_minutes, interval_minutes) tiers: 5-minute polls for the first
#: two hours, 15 minutes up to eight hours, hourly through the first day and
#: beyond (the last interval persists past the final tier).
DEFAULT_POLL_SCHEDULE_TIERS = ((120.0, 5.0), (480.0, 15.0), (1440.0, 60.0))

MAX_POLL_RETRIES = 3
BACKOFF_BASE_MINUTES = 2.0


@dataclass(frozen=True)
class PollSchedule:
    """Ordered (max_age_minutes, interval_minutes) tiers."""

    tiers: tuple[tuple[float, float], ...] = DEFAULT_POLL_SCHEDULE_TIERS

    def __post_init__(self):
        if not self.tiers:
            raise ConfigError("poll schedule needs at least one tier")
        ages = [a for a, _ in self.tiers]
        intervals = [i for _, i in self.tiers]
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise ConfigError("tier max ages must be strictly increasing")
        if any(i <= 0 for i in intervals):
            raise ConfigError("poll intervals must be positive")
        if any(b < a for a, b in zip(intervals, intervals[1:])):
            raise ConfigError("poll intervals must be non-decreasing across tiers")


def schedule_next_poll(post_age_minutes: float, schedule: PollSchedule) -> float:
    """Interval of the first tier whose max age exceeds the post age.

    Beyond the last tier the last interval persists.
    """
    if post_age_minutes < 0:
        raise ConfigError("post age cannot be negative")
    for max_age, interval in schedule.tiers:
        if post_age_minutes < max_age:
            return interval
    return schedule.tiers[-1][1]


@dataclass(frozen=True)
class PollResult:
    """One transport answer about a post's current state."""

    score: int
    comments: int
    crossposts: int
    category: str = "unknown"
    upvote_ratio: float | None = None
    removed: bool = False


class TransientSourceError(Exception):
    """Retryable transport failure (timeouts, 5xx, connection drops)."""


class RateLimitedError(TransientSourceError):
    """Transport asked us to back off; honors the given delay."""

    def __init__(self, message: str, retry_after_minutes: float | None = None):
        super().__init__(message)
        self.retry_after_minutes = retry_after_minutes


class PermanentSourceError(Exception):
    """The post cannot be fetched now or ever (gone, forbidden)."""


class PostSource(Protocol):
    def fetch(self, post_id: str) -> PollResult: ...


class Clock(Protocol):
    def now_minutes(self) -> float: ...

    def sleep_minutes(self, minutes: float) -> None: ...


class SimulatedClock:
    """Virtual time: sleeping advances instantly. Default for tests."""

    def __init__(self, start_minutes: float = 0.0):
        self._now = start_minutes

    def now_minutes(self) -> float:
        return self._now

    def sleep_minutes(self, minutes: float) -> None:
        if minutes > 0:
            self._now += minutes


class SystemClock:
    """Wall-clock time for real collection runs."""

    def now_minutes(self) -> float:
        return _time.monotonic() / 60.0

    def sleep_minutes(self, minutes: float) -> None:
        if minutes > 0:
            _time.sleep(minutes * 60.0)


@dataclass(frozen=True)
class TrackResult:
    """Collected series plus why tracking ended."""

    post_id: str
    snapshots: tuple[EngagementSnapshot, ...]
    reason: str  # completed | removed | unreachable | unavailable


def track_post(
    transport: PostSource,
    post_id: str,
    until_minutes: float,
    schedule: PollSchedule | None = None,
    clock: Clock | None = None,
    max_retries: int = MAX_POLL_RETRIES,
) -> TrackResult:
    """Poll one post from age zero until ``until_minutes`` (inclusive).

    Transient failures are retried with exponential backoff (base 2, up to
    ``max_retries`` retries); a poll whose retries are exhausted is skipped,
    never fabricated. Tracking stops early when the transport reports the
    post removed or permanently unavailable, returning the partial series
    with that reason.
    """
    schedule = schedule or PollSchedule()
    clock = clock or SimulatedClock()
    start = clock.now_minutes()
    snapshots: list[EngagementSnapshot] = []
    next_t = 0.0

    while next_t <= until_minutes:
        clock.sleep_minutes(next_t - (clock.now_minutes() - start))
        outcome = _fetch_with_backoff(transport, post_id, clock, max_retries)
        if outcome == "unavailable":
            return TrackResult(post_id, tuple(snapshots), "unavailable")
        if isinstance(outcome, PollResult):
            if outcome.removed:
                return TrackResult(post_id, tuple(snapshots), "removed")
            t = clock.now_minutes() - start
            if not snapshots or t > snapshots[-1].t_minutes:
                snapshots.append(
                    EngagementSnapshot(
                        t_minutes=t,
                        score=outcome.score,
                        comments=outcome.comments,
                        crossposts=outcome.crossposts,
                        upvote_ratio=outcome.upvote_ratio,
                        category=outcome.category,
                    )
                )
        next_t += schedule_next_poll(next_t, schedule)

    reason = "completed" if snapshots else "unreachable"
    return TrackResult(post_id, tuple(snapshots), reason)


def _fetch_with_backoff(transport, post_id, clock, max_retries) -> "PollResult | str | None":
    for attempt in range(max_retries + 1):
        try:
            return transport.fetch(post_id)
        except PermanentSourceError:
            return "unavailable"
        except TransientSourceError as exc:
            if attempt >= max_retries:
                return None  # poll skipped
            delay = BACKOFF_BASE_MINUTES**attempt
            if isinstance(exc, RateLimitedError) and exc.retry_after_minutes is not None:
                delay = max(delay, exc.retry_after_minutes)
            clock.sleep_minutes(delay)
    return None


def track_posts(
    transport: PostSource,
    post_ids: Iterable[str],
    until_minutes: float,
    schedule: PollSchedule | None = None,
    clock_factory=SimulatedClock,
) -> list[TrackResult]:
    """Track several posts, each against its own clock."""
    return [
        track_post(transport, pid, until_minutes, schedule=schedule, clock=clock_factory())
        for pid in post_ids
    ]


class FileReplaySource:
    """Replays recorded snapshot series as the current post state.

    The elapsed time for a post starts at its first fetch; the answer is the
    latest recorded snapshot at or before that elapsed time (zeros before the
    first snapshot). A post flagged removed reports removal once the replay
    runs past its recorded series.
    """

    def __init__(self, records: Sequence[PostRecord], clock: Clock):
        self._records = {r.post_id: r for r in records}
        self._clock = clock
        self._started: dict[str, float] = {}

    @classmethod
    def from_dataset(cls, path, clock: Clock) -> "FileReplaySource":
        from .ingest import parse_dataset

        return cls(list(parse_dataset(path)), clock)

    def fetch(self, post_id: str) -> PollResult:
        record = self._records.get(post_id)
        if record is None:
            raise PermanentSourceError(f"unknown post {post_id}")
        if post_id not in self._started:
            self._started[post_id] = self._clock.now_minutes()
        elapsed = self._clock.now_minutes() - self._started[post_id]
        current = None
        for snap in record.snapshots:
            if snap.t_minutes <= elapsed:
                current = snap
            else:
                break
        if current is None:
            return PollResult(score=0, comments=0, crossposts=0, category="new")
        if record.removed and elapsed > record.snapshots[-1].t_minutes:
            return PollResult(0, 0, 0, removed=True)
        return PollResult(
            score=current.score,
            comments=current.comments,
            crossposts=current.crossposts,
            category=current.category,
            upvote_ratio=current.upvote_ratio,
        )


class HttpPollingSource:
    """Polls ``GET {base_url}/{post_id}`` for a JSON post state.

    Expected body: score, comments, crossposts, category, optional
    upvote_ratio, removed. 429/503 responses honor Retry-After (seconds) via
    :class:`RateLimitedError`; 404/410 are permanent; other failures are
    transient. ``auth_header`` is passed through verbatim as Authorization.
    """

    def __init__(self, base_url: str, auth_header: str | None = None, timeout_seconds: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.auth_header = auth_header
        self.timeout_seconds = timeout_seconds

    def fetch(self, post_id: str) -> PollResult:
        request = urllib.request.Request(f"{self.base_url}/{post_id}")
        if self.auth_header:
            request.add_header("Authorization", self.auth_header)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_seconds) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (429, 503):
                retry_after = exc.headers.get("Retry-After")
                minutes = float(retry_after) / 60.0 if retry_after else None
                raise RateLimitedError(f"HTTP {exc.code}", retry_after_minutes=minutes) from exc
            if exc.code in (404, 410):
                raise PermanentSourceError(f"HTTP {exc.code} for {post_id}") from exc
            raise TransientSourceError(f"HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise TransientSourceError(str(exc)) from exc
        return PollResult(
            score=int(payload["score"]),
            comments=int(payload["comments"]),
            crossposts=int(payload["crossposts"]),
            category=str(payload.get("category", "unknown")),
            upvote_ratio=payload.get("upvote_ratio"),
            removed=bool(payload.get("removed", False)),
        )
