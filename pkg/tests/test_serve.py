import json
import socket
import subprocess
import sys
import time
import urllib.request

import pytest


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_for_health(port, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        try:
            with urllib.request.urlopen(f"http://127.0.0.1:{port}/healthz", timeout=1) as r:
                return json.loads(r.read())
        except OSError:
            time.sleep(0.2)
    raise TimeoutError("server did not come up")


def test_serve_health_and_busy_port():
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "valveseg.cli", "serve", "--port", str(port)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        doc = wait_for_health(port)
        assert doc["status"] == "ok"
        assert "version" in doc

        # second bind on the same port must fail with a clean nonzero exit
        rc = subprocess.run(
            [sys.executable, "-m", "valveseg.cli", "serve", "--port", str(port)],
            capture_output=True, timeout=60)
        assert rc.returncode != 0
        assert b"bind" in rc.stderr + rc.stdout or rc.returncode == 1
    finally:
        proc.terminate()
        proc.wait(timeout=10)
