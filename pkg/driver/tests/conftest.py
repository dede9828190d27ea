import json
import os
import subprocess
import sys

import pytest

DRIVER_PATH = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "faultrank_driver.py"
)


def call_request(code, inputs, expected, function_name="solve", timeout_s=4.0):
    return {
        "code": code,
        "test_format": "call_based",
        "function_name": function_name,
        "inputs": inputs,
        "expected_outputs": expected,
        "timeout_s": timeout_s,
    }


def stdin_request(code, blobs, expected, timeout_s=4.0):
    return {
        "code": code,
        "test_format": "stdin",
        "function_name": None,
        "inputs": blobs,
        "expected_outputs": expected,
        "timeout_s": timeout_s,
    }


def invoke_driver(request, timeout=30.0, env=None):
    """Spawn the driver as the harness would; returns (rc, report|None, stderr)."""
    full_env = dict(os.environ, PYTHONHASHSEED="0")
    if env is not None:
        full_env.update(env)
    proc = subprocess.run(
        [sys.executable, DRIVER_PATH],
        input=json.dumps(request).encode(),
        capture_output=True,
        timeout=timeout,
        env=full_env,
    )
    report = None
    if proc.stdout.strip():
        try:
            report = json.loads(proc.stdout.splitlines()[-1])
        except json.JSONDecodeError:
            report = None
    return proc.returncode, report, proc.stderr.decode("utf-8", "replace")


@pytest.fixture
def run_driver():
    return invoke_driver
