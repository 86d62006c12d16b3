import os
import shutil
import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
FAKEJAVA = FIXTURES / "toolchain" / "fakejava.py"


def cli():
    exe = os.environ.get("MOCKLESS_CLI")
    if not exe:
        pytest.skip("MOCKLESS_CLI not set")
    return exe


@pytest.fixture
def counter(tmp_path):
    root = tmp_path / "counter"
    shutil.copytree(FIXTURES / "projects" / "counter", root)
    return root


def write_config(root, script, **extra):
    java = str(FAKEJAVA)
    lines = [
        f'project_root = "{root}"',
        'cut = "com.ex.count.Counter"',
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += [
        "",
        "[llm]",
        'kind = "fake"',
        f'script = "{FIXTURES / "llm" / script}"',
        "",
        "[backend]",
        'kind = "command"',
        'test_root = "src/test/java"',
        'reports_dir = "target/reports"',
        'coverage_report = "target/jacoco.xml"',
        f'compile_command = ["{java}", "compile", "--project", "{{project_root}}", "--test", "{{test_file}}"]',
        f'run_command = ["{java}", "run", "--project", "{{project_root}}", "--test", "{{test_file}}", '
        '"--method", "{test_method}", "--reports", "{reports_dir}"]',
        f'coverage_command = ["{java}", "coverage", "--project", "{{project_root}}", "--test", "{{test_file}}", '
        '"--out", "{coverage_report}"]',
        "per_test_timeout_s = 20",
    ]
    path = Path(root) / "mockless.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


sys.path.insert(0, str(Path(__file__).parent))
