"""File-backed adjudication service for the human annotation queue."""

from .store import QueueStore, StoreError
from .app import create_app

__all__ = ["QueueStore", "StoreError", "create_app"]
