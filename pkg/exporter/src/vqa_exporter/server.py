"""HTTP scorer server: POST {"prefix": [tokens]} -> {"probs": [floats]}.

Handlers are stateless and the adapter contract requires pure
``next_distribution``, so concurrent requests are safe. Unknown tokens in the
prefix return HTTP 400.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .adapters import Adapter


def _make_handler(adapter: Adapter):
    class ScorerHandler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length))
                prefix = tuple(body["prefix"])
            except (ValueError, KeyError, TypeError):
                self._reply(400, {"error": "body must be {\"prefix\": [tokens]}"})
                return
            try:
                probs = adapter.next_distribution(prefix)
            except (KeyError, ValueError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            self._reply(200, {"probs": [float(p) for p in probs]})

        def _reply(self, status: int, doc: dict):
            payload = json.dumps(doc).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    return ScorerHandler


class ScorerServer:
    """Owns the listening socket; use as a context manager or call serve()."""

    def __init__(self, adapter: Adapter, host: str = "127.0.0.1", port: int = 0):
        self._server = ThreadingHTTPServer((host, port), _make_handler(adapter))
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/next_distribution"

    def start(self) -> "ScorerServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def serve(self) -> None:
        """Blocking serve loop for CLI use."""
        try:
            self._server.serve_forever()
        finally:
            self._server.server_close()

    def __enter__(self) -> "ScorerServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def serve_scorer(adapter: Adapter, port: int, host: str = "127.0.0.1") -> ScorerServer:
    return ScorerServer(adapter, host=host, port=port).start()
