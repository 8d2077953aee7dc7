"""Run the service: `python -m embed_service`."""

from __future__ import annotations

import os

import uvicorn


def main() -> None:
    port = int(os.environ.get("EMBED_PORT", "8876"))
    uvicorn.run("embed_service.app:app", host="0.0.0.0", port=port)


if __name__ == "__main__":
    main()
