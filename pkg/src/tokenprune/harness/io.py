"""Episode fixtures and report files."""

import csv
import io
import json
import os

import numpy as np

from ..errors import ConfigError
from ..toy_vla.episodes import Episode, EpisodeConfig, TokenStream

SCHEMA_VERSION = 1


def dumps(obj, compact=False):
    """Canonical JSON: sorted keys, fixed indent (or none), no NaN."""
    if compact:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(text, path):
    """Write to ``path`` or stdout when path is empty; OSError propagates."""
    if not path:
        import sys

        sys.stdout.write(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise FileNotFoundError(f"output directory does not exist: {parent}")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    return buf.getvalue()


def _stream_dict(s):
    return {
        "timestep": s.timestep,
        "visual_tokens": s.visual_tokens.tolist(),
        "text_tokens": s.text_tokens.tolist(),
        "query_tokens": s.query_tokens.tolist(),
        "groups": s.groups.tolist(),
        "part_mask": s.part_mask.astype(int).tolist(),
        "target_group": s.target_group,
        "subtask": s.subtask,
    }


def episode_to_json(ep):
    """One episode as JSON text: config header, then every step's token matrices."""
    return dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "episode",
            "config": ep.config.to_dict(),
            "hidden_dim": ep.hidden_dim,
            "checksum": ep.checksum(),
            "streams": [_stream_dict(s) for s in ep],
        },
        compact=True,
    )


def _matrix(rows, width):
    a = np.asarray(rows, dtype=np.float64)
    if a.size == 0:
        return np.zeros((0, width))
    return a.reshape(len(rows), width)


def episode_from_json(text, name="episode"):
    """Parse one episode file; the stored checksum must match the contents."""
    try:
        e = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{name}: not valid JSON: {err}") from err
    if e.get("kind") != "episode" or e.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{name}: not an episode file of schema_version {SCHEMA_VERSION}")
    D = int(e["hidden_dim"])
    streams = tuple(
        TokenStream(
            timestep=int(s["timestep"]),
            visual_tokens=_matrix(s["visual_tokens"], D),
            text_tokens=_matrix(s["text_tokens"], D),
            query_tokens=_matrix(s["query_tokens"], D),
            groups=np.asarray(s["groups"], dtype=np.int64),
            part_mask=np.asarray(s["part_mask"], dtype=bool),
            target_group=int(s["target_group"]),
            subtask=int(s["subtask"]),
        )
        for s in e["streams"]
    )
    ep = Episode(config=EpisodeConfig.from_dict(e["config"]), hidden_dim=D, streams=streams)
    if ep.checksum() != e["checksum"]:
        raise ConfigError(f"{name}: checksum mismatch, file is corrupted")
    return ep


def episode_filename(index):
    return f"episode_{index:04d}.json"


def write_episodes(directory, episodes):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, ep in enumerate(episodes):
        path = os.path.join(directory, episode_filename(i))
        write_text(episode_to_json(ep), path)
        paths.append(path)
    return paths


def load_episode(path):
    with open(path, encoding="utf-8") as f:
        return episode_from_json(f.read(), os.path.basename(path))


def load_episodes(directory):
    names = sorted(n for n in os.listdir(directory) if n.startswith("episode_") and n.endswith(".json"))
    return [load_episode(os.path.join(directory, n)) for n in names]
