import json

import pytest

from viralearly import collector
from viralearly.collector import (
    FileReplaySource,
    HttpPollingSource,
    PermanentSourceError,
    PollResult,
    PollSchedule,
    RateLimitedError,
    SimulatedClock,
    TransientSourceError,
    schedule_next_poll,
    track_post,
)
from viralearly.errors import ConfigError

from conftest import make_record


class ScriptedSource:
    """Returns score = floor(elapsed) based on the shared simulated clock."""

    def __init__(self, clock, removed_at=None, fail_always=False, fail_on_calls=()):
        self.clock = clock
        self.removed_at = removed_at
        self.fail_always = fail_always
        self.fail_on_calls = set(fail_on_calls)
        self.calls = 0

    def fetch(self, post_id):
        self.calls += 1
        if self.fail_always or self.calls in self.fail_on_calls:
            raise TransientSourceError("scripted failure")
        t = self.clock.now_minutes()
        if self.removed_at is not None and t >= self.removed_at:
            return PollResult(0, 0, 0, removed=True)
        return PollResult(score=int(t), comments=0, crossposts=0, category="new")


class TestSchedule:
    def test_initial_interval_is_five_minutes(self):
        assert schedule_next_poll(10.0, PollSchedule()) == 5.0

    def test_mid_tier_lookup(self):
        assert schedule_next_poll(300.0, PollSchedule()) == 15.0

    def test_last_interval_persists(self):
        assert schedule_next_poll(1e6, PollSchedule()) == 60.0

    def test_tier_boundary_moves_to_next(self):
        assert schedule_next_poll(120.0, PollSchedule()) == 15.0

    def test_empty_schedule_rejected(self):
        with pytest.raises(ConfigError):
            PollSchedule(tiers=())

    def test_bad_tier_order_rejected(self):
        with pytest.raises(ConfigError):
            PollSchedule(tiers=((120.0, 5.0), (60.0, 15.0)))

    def test_decreasing_intervals_rejected(self):
        with pytest.raises(ConfigError):
            PollSchedule(tiers=((120.0, 15.0), (480.0, 5.0)))


class TestTrackPost:
    def test_happy_path_seven_snapshots(self):
        clock = SimulatedClock()
        result = track_post(ScriptedSource(clock), "p1", until_minutes=30.0, clock=clock)
        assert result.reason == "completed"
        assert [s.t_minutes for s in result.snapshots] == [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]

    def test_always_failing_transport(self):
        clock = SimulatedClock()
        result = track_post(ScriptedSource(clock, fail_always=True), "p1", until_minutes=30.0, clock=clock)
        assert result.snapshots == ()
        assert result.reason == "unreachable"

    def test_removed_mid_tracking(self):
        clock = SimulatedClock()
        result = track_post(ScriptedSource(clock, removed_at=12.0), "p1", until_minutes=30.0, clock=clock)
        assert [s.t_minutes for s in result.snapshots] == [0.0, 5.0, 10.0]
        assert result.reason == "removed"

    def test_failed_poll_skipped_not_fabricated(self):
        clock = SimulatedClock()
        # second poll (t=5) fails through all retries; series resumes after
        source = ScriptedSource(clock, fail_on_calls={2, 3, 4, 5})
        result = track_post(source, "p1", until_minutes=30.0, clock=clock)
        assert result.reason == "completed"
        times = [s.t_minutes for s in result.snapshots]
        assert times[0] == 0.0
        assert 5.0 not in times
        assert times == sorted(times)

    def test_snapshots_strictly_increasing(self):
        clock = SimulatedClock()
        result = track_post(ScriptedSource(clock, fail_on_calls={3}), "p1", until_minutes=60.0, clock=clock)
        times = [s.t_minutes for s in result.snapshots]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_permanently_unavailable(self):
        class GoneAfter(ScriptedSource):
            def fetch(self, post_id):
                if self.clock.now_minutes() >= 10.0:
                    raise PermanentSourceError("gone")
                return super().fetch(post_id)

        clock = SimulatedClock()
        result = track_post(GoneAfter(clock), "p1", until_minutes=30.0, clock=clock)
        assert [s.t_minutes for s in result.snapshots] == [0.0, 5.0]
        assert result.reason == "unavailable"

    def test_rate_limit_retry_after_honored(self):
        clock = SimulatedClock()

        class Limited:
            def __init__(self):
                self.calls = 0

            def fetch(self, post_id):
                self.calls += 1
                if self.calls == 1:
                    raise RateLimitedError("429", retry_after_minutes=7.0)
                return PollResult(1, 0, 0)

        result = track_post(Limited(), "p1", until_minutes=0.0, clock=clock)
        # first poll retried after the requested 7 minutes
        assert result.snapshots[0].t_minutes == 7.0


class TestFileReplaySource:
    def test_replays_recorded_series(self):
        clock = SimulatedClock()
        record = make_record(times=[0, 5, 10, 15], scores=[1, 3, 6, 9])
        source = FileReplaySource([record], clock)
        result = track_post(source, "p1", until_minutes=15.0, clock=clock)
        assert [s.score for s in result.snapshots] == [1, 3, 6, 9]

    def test_unknown_post_is_permanent_error(self):
        source = FileReplaySource([], SimulatedClock())
        with pytest.raises(PermanentSourceError):
            source.fetch("nope")

    def test_from_dataset(self, tmp_path):
        from viralearly import ingest

        path = tmp_path / "d.jsonl"
        ingest.write_dataset([make_record()], path)
        clock = SimulatedClock()
        source = FileReplaySource.from_dataset(path, clock)
        assert source.fetch("p1").score == 0


class FakeResponse:
    def __init__(self, body):
        self.body = json.dumps(body).encode()

    def read(self):
        return self.body

    def __enter__(self):
        return self

    def __exit__(self, *args):
        return False


class TestHttpPollingSource:
    def test_parses_payload(self, monkeypatch):
        def fake_urlopen(request, timeout):
            assert request.full_url == "https://api.example/posts/p9"
            assert request.get_header("Authorization") == "Bearer tok"
            return FakeResponse({"score": 12, "comments": 3, "crossposts": 1, "category": "hot"})

        monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
        source = HttpPollingSource("https://api.example/posts", auth_header="Bearer tok")
        result = source.fetch("p9")
        assert (result.score, result.comments, result.category) == (12, 3, "hot")

    def test_retry_after_surfaces_as_rate_limit(self, monkeypatch):
        import urllib.error

        def fake_urlopen(request, timeout):
            raise urllib.error.HTTPError(
                request.full_url, 429, "too many", {"Retry-After": "120"}, None
            )

        monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
        source = HttpPollingSource("https://api.example/posts")
        with pytest.raises(RateLimitedError) as err:
            source.fetch("p1")
        assert err.value.retry_after_minutes == pytest.approx(2.0)

    def test_gone_is_permanent(self, monkeypatch):
        import urllib.error

        def fake_urlopen(request, timeout):
            raise urllib.error.HTTPError(request.full_url, 404, "nope", {}, None)

        monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
        with pytest.raises(PermanentSourceError):
            HttpPollingSource("https://api.example/posts").fetch("p1")

    def test_server_error_is_transient(self, monkeypatch):
        import urllib.error

        def fake_urlopen(request, timeout):
            raise urllib.error.HTTPError(request.full_url, 500, "boom", {}, None)

        monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
        with pytest.raises(TransientSourceError):
            HttpPollingSource("https://api.example/posts").fetch("p1")


def test_track_posts_independent_clocks():
    records = [make_record(post_id=f"p{i}", times=[0, 5, 10], scores=[1, 2, 3]) for i in range(2)]
    shared = SimulatedClock()
    source = FileReplaySource(records, shared)
    # each post gets a fresh clock; the replay source keys elapsed per post
    results = collector.track_posts(source, ["p0", "p1"], until_minutes=10.0, clock_factory=lambda: shared)
    assert all(r.reason == "completed" for r in results)
