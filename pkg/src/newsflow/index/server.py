"""Read-only HTTP/JSON front end for a NewsIndex."""
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .store import NewsIndex, QueryError, QueryRequest

log = logging.getLogger(__name__)


class _Handler(BaseHTTPRequestHandler):
    server_version = "newsflow/0.1"
    protocol_version = "HTTP/1.1"

    def _send(self, status, payload):
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/health":
            self._send(200, {"status": "ok"})
            return
        if url.path != "/news":
            self._send(404, {"error": f"no such endpoint: {url.path}"})
            return
        raw = parse_qs(url.query, keep_blank_values=True)
        repeated = [k for k, v in raw.items() if len(v) > 1]
        if repeated:
            self._send(400, {"error": f"parameter given more than once: {repeated[0]}"})
            return
        try:
            req = QueryRequest.from_params({k: v[0] for k, v in raw.items()})
        except QueryError as exc:
            self._send(400, {"error": str(exc)})
            return
        if self.server.follow:
            self.server.index.refresh()
        self._send(200, self.server.index.search(req).to_json())

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


class NewsServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, index: NewsIndex, host="127.0.0.1", port=8080, follow=False):
        self.index = index
        # pick up documents appended to the log by worker processes
        self.follow = follow
        super().__init__((host, port), _Handler)

    @property
    def port(self):
        return self.server_address[1]

    def start_background(self):
        t = threading.Thread(target=self.serve_forever, name="newsflow-http", daemon=True)
        t.start()
        return t

    def stop(self):
        self.shutdown()
        self.server_close()


def serve(index: NewsIndex, port: int, host="127.0.0.1", background=False,
          follow=False) -> NewsServer:
    """Bind and start the service. Bind errors propagate as OSError."""
    srv = NewsServer(index, host, port, follow)
    log.info("serving %d docs on http://%s:%d", len(index), host, srv.port)
    if background:
        srv.start_background()
    else:
        try:
            srv.serve_forever()
        finally:
            srv.server_close()
    return srv
