"""Self-hosted real-time JSON tree store: REST verbs, token auth, change streams."""

from .journal import JournalRecord, JournalWriter, read_journal, replay
from .store import Event, Store, Subscription
from .server import RtdbServer
from .tree import join_path, normalize, parse_path

__all__ = [
    "Event",
    "JournalRecord",
    "JournalWriter",
    "RtdbServer",
    "Store",
    "Subscription",
    "join_path",
    "normalize",
    "parse_path",
    "read_journal",
    "replay",
]
