"""A minimal in-process stand-in for a remote patch backend.

Used by the test suite and handy for trying the wire contract by hand::

    with StubBackend(lambda request: {"patches": []}) as url:
        ...
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, List, Optional, Union

Responder = Callable[[dict], Union[dict, bytes]]


class StubBackend:
    """Serves ``responder(request_json)`` on 127.0.0.1 at an ephemeral port."""

    def __init__(self, responder: Responder, status: int = 200):
        self.responder = responder
        self.status = status
        self.requests: List[dict] = []
        self._server: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/patches"

    def start(self) -> str:
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server naming)
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                try:
                    request = json.loads(raw.decode("utf-8"))
                except ValueError:
                    request = {}
                stub.requests.append(request)
                reply = stub.responder(request)
                data = reply if isinstance(reply, bytes) else json.dumps(reply).encode("utf-8")
                self.send_response(stub.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.url

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> str:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
