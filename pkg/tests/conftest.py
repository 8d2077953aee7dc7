"""Shared fixtures: fixture tree paths, deterministic demo repo, helpers."""

from __future__ import annotations

import subprocess
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

GIT_ENV = {
    "GIT_AUTHOR_NAME": "Dev",
    "GIT_AUTHOR_EMAIL": "dev@example.com",
    "GIT_COMMITTER_NAME": "Dev",
    "GIT_COMMITTER_EMAIL": "dev@example.com",
    "HOME": "/tmp",
    "PATH": "/usr/bin:/bin",
}

FMT_V1 = """package app;

public class Fmt {

    private int scale = 2;

    public String format(double value) {
        return Double.toString(value);
    }

    private double pow10(int exponent) {
        double result = 1.0;
        for (int i = 0; i < exponent; i++) {
            result = result * 10.0;
        }
        return result;
    }
}
"""

README_V1 = "# demo\n\nFormatting helpers.\n"
README_V2 = "# demo\n\nFormatting helpers.\n\n## usage\n\nCall Fmt.format.\n"


def git(repo: Path, *args: str, date: str | None = None) -> str:
    env = dict(GIT_ENV)
    if date:
        env["GIT_AUTHOR_DATE"] = date
        env["GIT_COMMITTER_DATE"] = date
    result = subprocess.run(
        ["git", "-C", str(repo), *args], capture_output=True, text=True, env=env
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


@pytest.fixture(scope="session")
def demo_repo(tmp_path_factory) -> Path:
    """Reproducible repo: 5 commits, one of them a merge.

    HEAD is the rounding fix on Fmt.java (the optimization target); the
    docs-only commit exercises tool inapplicability.
    """
    repo = tmp_path_factory.mktemp("demo") / "repo"
    repo.mkdir()
    git(repo, "init", "-q", "-b", "main")

    src = repo / "src/app"
    src.mkdir(parents=True)
    (src / "Fmt.java").write_text(FMT_V1)
    (repo / "README.md").write_text(README_V1)
    git(repo, "add", "-A")
    git(repo, "commit", "-qm", "add formatter and docs skeleton",
        date="2024-01-01 12:00:00 +0000")

    git(repo, "checkout", "-qb", "scale-helper")
    (src / "Fmt.java").write_text(
        FMT_V1.replace(
            "    private int scale = 2;",
            "    private int scale = 2;\n"
            "\n"
            "    public void setScale(int scale) {\n"
            "        this.scale = scale;\n"
            "    }",
        )
    )
    git(repo, "add", "-A")
    git(repo, "commit", "-qm",
        "add setScale helper because callers need other precisions",
        date="2024-01-02 12:00:00 +0000")

    git(repo, "checkout", "-q", "main")
    (repo / "README.md").write_text(README_V2)
    git(repo, "add", "-A")
    git(repo, "commit", "-qm", "docs: describe the usage entry point",
        date="2024-01-03 12:00:00 +0000")

    git(repo, "merge", "-q", "--no-ff", "-m", "merge scale-helper branch",
        "scale-helper", date="2024-01-04 12:00:00 +0000")

    fmt_now = (src / "Fmt.java").read_text()
    (src / "Fmt.java").write_text(
        fmt_now.replace(
            "    public String format(double value) {\n"
            "        return Double.toString(value);\n"
            "    }",
            "    public String format(double value) {\n"
            "        double scaled = roundHalfUp(value * pow10(scale));\n"
            "        return Double.toString(scaled / pow10(scale));\n"
            "    }\n"
            "\n"
            "    private double roundHalfUp(double value) {\n"
            "        return Math.floor(value + 0.5);\n"
            "    }",
        )
    )
    git(repo, "add", "-A")
    git(repo, "commit", "-qm",
        "fix rounding so values at .5 round half up in format",
        date="2024-01-05 12:00:00 +0000")
    return repo


@pytest.fixture()
def javatree():
    from commitopt.contexts import SourceTree

    return SourceTree(FIXTURES / "javatree")


def load_fixture_diff(name: str) -> str:
    return (FIXTURES / "diffs" / name).read_text(encoding="utf-8")
