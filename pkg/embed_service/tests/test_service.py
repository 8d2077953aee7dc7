"""Embed service: HTTP surface, determinism, normalization, truncation."""

from __future__ import annotations

import json
import math
import threading
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embed_service.app import create_app

SIMILAR_DIFF_A = """\
diff --git a/src/app/Fmt.java b/src/app/Fmt.java
--- a/src/app/Fmt.java
+++ b/src/app/Fmt.java
@@ -10,6 +10,7 @@ public class Fmt {
     public String format(double value) {
         double scaled = roundHalfUp(value * pow10(scale));
+        guardAgainstOverflow(scaled);
         return Double.toString(scaled / pow10(scale));
     }
"""

SIMILAR_DIFF_B = """\
diff --git a/src/app/Fmt.java b/src/app/Fmt.java
--- a/src/app/Fmt.java
+++ b/src/app/Fmt.java
@@ -10,6 +10,7 @@ public class Fmt {
     public String format(double value) {
         double scaled = roundHalfUp(value * pow10(scale));
+        logFormatting(scaled);
         return Double.toString(scaled / pow10(scale));
     }
"""

UNRELATED_DIFF = """\
diff --git a/docs/guide.md b/docs/guide.md
--- a/docs/guide.md
+++ b/docs/guide.md
@@ -1,3 +1,4 @@
 # deployment guide
+Remember to rotate the signing keys quarterly.
 The cluster needs three availability zones.
"""


@pytest.fixture()
def client():
    with TestClient(create_app(backend="hash", max_chars=500)) as test_client:
        yield test_client


def embed(client, kind: str, body: str) -> dict:
    response = client.post("/embed", json={"kind": kind, "body": body})
    assert response.status_code == 200, response.text
    return response.json()


class TestEmbed:
    def test_same_input_identical_vectors(self, client):
        first = embed(client, "code_diff", SIMILAR_DIFF_A)
        second = embed(client, "code_diff", SIMILAR_DIFF_A)
        assert first["vector"] == second["vector"]
        assert first["model_id"] == second["model_id"]

    def test_norm_within_1e6(self, client):
        for kind, body in (("code_diff", SIMILAR_DIFF_A), ("text", "fix rounding in format")):
            doc = embed(client, kind, body)
            norm = math.sqrt(sum(x * x for x in doc["vector"]))
            assert abs(norm - 1.0) < 1e-6
            assert doc["dim"] == len(doc["vector"])

    def test_empty_body_is_400(self, client):
        response = client.post("/embed", json={"kind": "text", "body": ""})
        assert response.status_code == 400

    def test_unknown_kind_is_400(self, client):
        response = client.post("/embed", json={"kind": "audio", "body": "x"})
        assert response.status_code == 400

    def test_truncation_flag_on_overlength_input(self, client):
        short = embed(client, "text", "word " * 20)
        assert short["truncated"] is False
        long = embed(client, "text", "word " * 500)  # cap is 500 chars
        assert long["truncated"] is True
        # truncated input embeds exactly like its truncated prefix
        prefix = embed(client, "text", ("word " * 500)[:500])
        assert long["vector"] == prefix["vector"]

    def test_similarity_ordering_fixture(self, client):
        a = np.asarray(embed(client, "code_diff", SIMILAR_DIFF_A)["vector"])
        b = np.asarray(embed(client, "code_diff", SIMILAR_DIFF_B)["vector"])
        unrelated = np.asarray(embed(client, "code_diff", UNRELATED_DIFF)["vector"])
        assert float(a @ b) > float(a @ unrelated)

    def test_kinds_use_distinct_model_spaces(self, client):
        as_code = embed(client, "code_diff", "same body")
        as_text = embed(client, "text", "same body")
        assert as_code["model_id"] != as_text["model_id"]
        assert as_code["vector"] != as_text["vector"]


class TestHealth:
    def test_ok_after_startup_with_consistent_dims(self, client):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"
        assert set(doc["models"]) == {"code_diff", "text"}
        embedded = embed(client, "text", "check dims")
        assert doc["dims"]["text"] == embedded["dim"]

    def test_loading_before_startup(self):
        app = create_app(backend="hash")
        bare = TestClient(app)  # no context manager: lifespan never runs
        assert bare.get("/health").json()["status"] == "loading"
        assert bare.post("/embed", json={"kind": "text", "body": "x"}).status_code == 503


class TestOpenApiDocument:
    def test_shipped_description_in_sync(self):
        shipped = json.loads(
            (Path(__file__).parent.parent / "openapi.json").read_text(encoding="utf-8")
        )
        assert shipped == create_app(backend="hash").openapi()


class TestPrimaryClientCompatibility:
    """The optimizer's HTTP embed client against a live server socket."""

    def test_http_embed_client_roundtrip(self):
        commitopt_embedding = pytest.importorskip("commitopt.embedding")
        import uvicorn

        config = uvicorn.Config(
            create_app(backend="hash"), host="127.0.0.1", port=0, log_level="error"
        )
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 10
        while not server.started:
            assert time.monotonic() < deadline, "server did not start"
            time.sleep(0.02)
        port = server.servers[0].sockets[0].getsockname()[1]
        try:
            client = commitopt_embedding.HttpEmbedClient(f"http://127.0.0.1:{port}")
            vector = client.embed("code_diff", SIMILAR_DIFF_A)
            assert abs(float(np.linalg.norm(vector)) - 1.0) < 1e-9
            assert client.model_id("code_diff").startswith("builtin-ngram")
        finally:
            server.should_exit = True
            thread.join(timeout=5)
