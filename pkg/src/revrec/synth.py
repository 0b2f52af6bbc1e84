"""Synthetic review-corpus generator with planted reviewing structure.

Each engineer belongs to a team; teammates form the planted affinity set.
Every author gets a fixed preference ordering over teammates with
geometrically decaying weights, and each diff's realized reviewer is drawn
from that distribution with probability ``affinity_strength``, else
uniformly from everyone. Files are mostly owned by the author's team, with
a small set of hot shared files touched across teams, which keeps
file-history candidate pools broad. The generator is deterministic for a
fixed config.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import build_log
from .errors import InvalidConfig
from .events import EventLog, ReviewEvent
from .rng import child_rng

DAY = 86400

# Share of diffs whose file list includes one hot cross-team file.
HOT_FILE_P = 0.22
# Share of non-hot file picks that stay inside the author's team.
OWN_FILE_P = 0.80
# Geometric decay of planted reviewer preference weights.
PREF_DECAY = 0.45
# Weekly meeting length bounds, seconds.
MEETING_MIN_S = 1800
MEETING_MAX_S = 5400


@dataclass(frozen=True)
class SynthConfig:
    n_engineers: int = 200
    n_files: int = 600
    n_diffs: int = 5000
    n_teams: int = 10
    affinity_strength: float = 0.9
    group_only_fraction: float = 0.3
    horizon_days: int = 120
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_engineers", "n_files", "n_diffs", "n_teams", "horizon_days"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")
        for name in ("affinity_strength", "group_only_fraction"):
            v = getattr(self, name)
            if not 0.0 <= float(v) <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidConfig(f"seed must be an integer, got {self.seed!r}")


def _engineer(i: int) -> str:
    return f"e{i:05d}"


def _team(t: int) -> str:
    return f"team{t:03d}"


def _file(i: int) -> str:
    return f"src/m{i // 20:03d}/f{i:04d}.py"


@dataclass(frozen=True)
class PlantedStructure:
    """Ground truth behind a synthetic corpus."""

    team_of: dict[str, str]
    members: dict[str, list[str]]
    # author -> candidate -> planted preference weight (sums to 1 per author)
    preference: dict[str, dict[str, float]]
    hot_files: list[str]
    team_files: dict[str, list[str]]


def plant_structure(cfg: SynthConfig) -> PlantedStructure:
    """Teams, per-author preference weights, and file ownership for cfg.

    Derived from the seed independently of event generation, so truth is
    available without generating a corpus.
    """
    cfg.validate()
    rng = child_rng(cfg.seed, "plant")
    engineers = [_engineer(i) for i in range(cfg.n_engineers)]
    team_of = {}
    members: dict[str, list[str]] = {_team(t): [] for t in range(cfg.n_teams)}
    for i, e in enumerate(engineers):
        g = _team(i % cfg.n_teams)
        team_of[e] = g
        members[g].append(e)

    preference: dict[str, dict[str, float]] = {}
    for e in engineers:
        mates = [m for m in members[team_of[e]] if m != e]
        order = rng.sample(mates, len(mates)) if mates else []
        weights = [PREF_DECAY**r for r in range(len(order))]
        total = sum(weights) or 1.0
        preference[e] = {m: w / total for m, w in zip(order, weights)}

    n_hot = max(2, cfg.n_files // 50)
    hot = [_file(i) for i in range(n_hot)]
    rest = list(range(n_hot, cfg.n_files))
    team_files: dict[str, list[str]] = {g: [] for g in members}
    for j, fi in enumerate(rest):
        team_files[_team(j % cfg.n_teams)].append(_file(fi))
    return PlantedStructure(team_of, members, preference, hot, team_files)


def _weighted_pick(rng, ordered: list[str], weights: list[float]) -> str:
    x = rng.random() * sum(weights)
    acc = 0.0
    for name, w in zip(ordered, weights):
        acc += w
        if x < acc:
            return name
    return ordered[-1]


class _AuthorDraw:
    """Per-author sampling helper bound to the planted preference order."""

    __slots__ = ("ordered", "weights")

    def __init__(self, pref: dict[str, float]):
        self.ordered = list(pref)
        self.weights = list(pref.values())

    def pick(self, rng, exclude: str | None = None) -> str | None:
        if not self.ordered:
            return None
        for _ in range(8):
            c = _weighted_pick(rng, self.ordered, self.weights)
            if c != exclude:
                return c
        for c in self.ordered:
            if c != exclude:
                return c
        return None


def synth_corpus(cfg: SynthConfig) -> EventLog:
    """Generate a structurally valid, deterministic synthetic event log."""
    truth = plant_structure(cfg)
    engineers = sorted(truth.team_of)
    draws = {e: _AuthorDraw(truth.preference[e]) for e in engineers}
    horizon_s = cfg.horizon_days * DAY

    rng = child_rng(cfg.seed, "events")
    publish_ts = sorted(rng.randrange(horizon_s) for _ in range(cfg.n_diffs))

    events: list[ReviewEvent] = []
    add = events.append

    def uniform_other(author: str) -> str:
        while True:
            c = engineers[rng.randrange(len(engineers))]
            if c != author:
                return c

    for i in range(cfg.n_diffs):
        t_pub = publish_ts[i]
        diff = f"d{i:06d}"
        author = engineers[rng.randrange(len(engineers))]
        team = truth.team_of[author]

        n_f = 1
        r = rng.random()
        if r > 0.45:
            n_f = 2
        if r > 0.75:
            n_f = 3
        if r > 0.90:
            n_f = 4
        files: list[str] = []
        own = truth.team_files[team]
        for _ in range(n_f):
            if rng.random() < HOT_FILE_P:
                f = truth.hot_files[rng.randrange(len(truth.hot_files))]
            elif own and rng.random() < OWN_FILE_P:
                f = own[rng.randrange(len(own))]
            else:
                f = _file(rng.randrange(cfg.n_files))
            if f not in files:
                files.append(f)

        if rng.random() < cfg.affinity_strength:
            realized = draws[author].pick(rng) or uniform_other(author)
        else:
            realized = uniform_other(author)

        group_only = rng.random() < cfg.group_only_fraction
        second = None
        if group_only:
            add(ReviewEvent("DiffPublished", t_pub, author, diff, tuple(files), (), (team,)))
            t_claim = t_pub + rng.randrange(300, 14400)
            add(ReviewEvent("ReviewerAssigned", t_claim, realized, diff, via="group"))
        else:
            listed = [realized]
            if rng.random() < 0.25:
                second = draws[author].pick(rng, exclude=realized)
                if second is not None:
                    listed.append(second)
            add(ReviewEvent("DiffPublished", t_pub, author, diff, tuple(files), tuple(listed), ()))
            t_claim = t_pub

        t_view = t_claim + rng.randrange(60, 3600)
        add(ReviewEvent("ViewSession", t_view, realized, diff, duration_s=rng.randrange(120, 1500)))
        t_last = t_view
        if rng.random() < 0.40:
            t_last = t_view + rng.randrange(300, 7200)
            add(ReviewEvent("ViewSession", t_last, realized, diff, duration_s=rng.randrange(60, 900)))
        if rng.random() < 0.65:
            t_last = t_last + rng.randrange(60, 1800)
            add(ReviewEvent("Comment", t_last, realized, diff))

        while rng.random() < 0.18:
            t_last = t_last + rng.randrange(300, 3600)
            add(ReviewEvent("Action", t_last, realized, diff, act="reject"))
            t_last = t_last + rng.randrange(1800, DAY)
            add(ReviewEvent("DiffUpdated", t_last, author, diff))
            t_last = t_last + rng.randrange(300, 7200)
            add(ReviewEvent("ViewSession", t_last, realized, diff, duration_s=rng.randrange(60, 600)))
        t_accept = t_last + rng.randrange(300, 3600)
        add(ReviewEvent("Action", t_accept, realized, diff, act="accept"))

        if second is not None:
            if rng.random() < 0.8:
                tv = t_pub + rng.randrange(300, 2 * DAY)
                add(ReviewEvent("ViewSession", tv, second, diff, duration_s=rng.randrange(60, 600)))
            if rng.random() < 0.5:
                add(ReviewEvent("Action", t_pub + rng.randrange(300, 2 * DAY), second, diff, act="resign"))

        if rng.random() < 0.55:
            if rng.random() < cfg.affinity_strength:
                extra = draws[author].pick(rng, exclude=realized)
            else:
                extra = uniform_other(author)
                if extra == realized:
                    extra = None
            if extra is not None:
                tv = t_pub + rng.randrange(600, 2 * DAY)
                add(ReviewEvent("ViewSession", tv, extra, diff, duration_s=rng.randrange(60, 900)))
                add(ReviewEvent("Comment", tv + rng.randrange(60, 3600), extra, diff))

        if rng.random() < 0.35:
            watcher = draws[author].pick(rng, exclude=realized)
            if watcher is not None:
                tv = t_pub + rng.randrange(600, 3 * DAY)
                add(ReviewEvent("ViewSession", tv, watcher, diff, duration_s=rng.randrange(30, 600)))

        add(ReviewEvent("DiffClosed", t_accept + rng.randrange(60, 3600), author, diff))

    # Weekly meeting series per engineer, extended one week past the horizon
    # so the forward-looking meetings window has data near the end.
    m_rng = child_rng(cfg.seed, "meetings")
    for e in engineers:
        offset = m_rng.randrange(0, 5 * DAY)
        dur = m_rng.randrange(MEETING_MIN_S, MEETING_MAX_S)
        t = offset
        while t < horizon_s + 7 * DAY:
            add(ReviewEvent("Meeting", t, e, duration_s=dur))
            t += 7 * DAY

    return build_log(events)
