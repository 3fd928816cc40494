"""Cross-component integration: the primary pipeline, driven only through its
CLI and the HTTP wire protocol, against this service in mock mode.

With the mock segmenter every box segments to its filled rectangle, so each
evaluated frame's mask must equal the union of the boxes the pipeline kept
for that frame (oracle-equivalent masks).
"""

import json
import math
import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest
import requests
import uvicorn
from PIL import Image

from infersvc.app import create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def mock_server(tmp_path_factory):
    fixtures = {
        "*": [
            {"x1": 40, "y1": 60, "x2": 120, "y2": 140, "score": 0.85,
             "query_index": 0},
            {"x1": 180, "y1": 30, "x2": 260, "y2": 110, "score": 0.55,
             "query_index": 0},
        ],
    }
    fixtures_path = tmp_path_factory.mktemp("fixtures") / "boxes.json"
    fixtures_path.write_text(json.dumps(fixtures))

    port = free_port()
    config = uvicorn.Config(
        create_app(mode="mock", fixtures_path=str(fixtures_path)),
        host="127.0.0.1", port=port, log_level="warning",
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    endpoint = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            if requests.get(f"{endpoint}/healthz", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.1)
    else:
        raise RuntimeError("mock server did not come up")
    yield endpoint
    server.should_exit = True
    thread.join(timeout=5)


def run_cli(*args) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "leakseg.cli", *args],
        capture_output=True, text=True, timeout=300,
    )


def test_pipeline_against_mock_service(mock_server, tmp_path):
    start = time.perf_counter()
    dataset = tmp_path / "dataset"
    out = tmp_path / "out"
    dump = tmp_path / "dump"

    synth = run_cli("synth", "--out", str(dataset), "--limit", "2")
    assert synth.returncode == 0, synth.stderr

    run = run_cli(
        "run", "--manifest", str(dataset / "manifest.csv"),
        "--out", str(out), "--dump-dir", str(dump), "--label", "integration",
        "--detect.backend", "remote", "--detect.endpoint", mock_server,
        "--segment.mode", "promptable", "--segment.backend", "remote",
        "--segment.endpoint", mock_server,
    )
    assert run.returncode == 0, run.stderr

    report = (out / "report.csv").read_text()
    assert report.splitlines()[0] == "config,category,videos,iou,precision,recall,fla"

    frames_checked = 0
    frames_with_boxes = 0
    for video in ("synth01", "synth02"):
        boxes = json.loads((dump / video / "boxes.json").read_text())
        mask_files = sorted((dump / video / "masks").glob("*.png"))
        assert len(mask_files) == 60  # 300 frames, stride 5
        for mask_file in mask_files:
            idx = str(int(mask_file.stem))
            mask = np.asarray(Image.open(mask_file), dtype=np.uint8) > 127
            expected = np.zeros_like(mask)
            for x1, y1, x2, y2, score, query_index in boxes[idx]:
                expected[
                    max(0, math.floor(y1)):min(mask.shape[0], math.ceil(y2)),
                    max(0, math.floor(x1)):min(mask.shape[1], math.ceil(x2)),
                ] = True
            assert np.array_equal(mask, expected), f"{video} frame {idx}"
            frames_checked += 1
            if boxes[idx]:
                frames_with_boxes += 1

    assert frames_checked == 120
    # scripted boxes are stationary: everything after the temporal filter's
    # one-frame bootstrap carries both boxes
    assert frames_with_boxes == 118

    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE PASS: cross-component-integration "
          f"({elapsed:.1f}s, budget 60s)")
    assert elapsed < 60.0
