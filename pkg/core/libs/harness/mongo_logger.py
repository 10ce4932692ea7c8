import os
import sys
import time

import pymongo

# --- Constants ---
MONGO_URI_ENV = "EFPP_MONGO_URI"
DEFAULT_DB_NAME = "efpp_monitor"
DEFAULT_COLLECTION = "experiment_events"
SERVER_SELECTION_TIMEOUT_MS = 5000


# --- MongoDB Logger Class (falls back to console-only when no server is configured) ---
class MongoLogger:
    """Sends experiment events to a MongoDB collection and echoes them to stderr."""

    def __init__(self, uri=None, db_name=DEFAULT_DB_NAME, collection_name=DEFAULT_COLLECTION, echo=True):
        self.client = None
        self.collection = None
        self.echo = echo
        uri = uri or os.environ.get(MONGO_URI_ENV)
        if not uri:
            return
        try:
            self.client = pymongo.MongoClient(uri, serverSelectionTimeoutMS=SERVER_SELECTION_TIMEOUT_MS)
            self.client.admin.command('ping')
            self.collection = self.client[db_name][collection_name]
            print("[MONGO] Connected to the event store.", file=sys.stderr)
        except pymongo.errors.ConnectionFailure as e:
            print(f"[MONGO] Could not connect to MongoDB: {e}; logging to console only.", file=sys.stderr)
            self.client = None
        except Exception as e:
            print(f"[MONGO] Unexpected error during MongoDB connection: {e}; logging to console only.",
                  file=sys.stderr)
            self.client = None

    @property
    def connected(self):
        return self.client is not None

    def log_event(self, event_type, details):
        """Logs an event to the database if the connection is active."""
        log_entry = {
            "tz": time.strftime("%I:%M%p on %B %d, %Y"),
            "event_type": event_type,
            "details": details,
        }
        if self.echo:
            print(f"[EVENT] {event_type}: {details}", file=sys.stderr)
        if self.client:
            try:
                self.collection.insert_one(log_entry)
            except Exception as e:
                print(f"[MONGO] Error logging event to MongoDB: {e}", file=sys.stderr)
        return log_entry

    def close(self):
        if self.client:
            self.client.close()
            self.client = None
