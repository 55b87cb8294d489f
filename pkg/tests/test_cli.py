from __future__ import annotations

import json

from clipsearch.cli import main
from clipsearch.engine import Engine


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCli:
    def test_fixture_then_ingest_then_cluster(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        data = tmp_path / "data"
        code, out, _ = run(
            capsys,
            ["fixture", "--seed", "1", "--videos", "6", "--segments", "5",
             "--dim", "16", "--clusters", "2", "--out", str(corpus)],
        )
        assert code == 0
        manifest = json.loads(out)["manifest"]

        code, out, _ = run(
            capsys, ["ingest", "--manifest", manifest, "--data", str(data)]
        )
        assert code == 0
        report = json.loads(out)
        assert report["videos"] == 6
        assert report["segments"] == 30
        assert report["warnings"] == []

        code, out, _ = run(
            capsys, ["cluster", "--k", "2", "--seed", "0", "--data", str(data)]
        )
        assert code == 0
        result = json.loads(out)
        assert result["k"] == 2
        assert sum(result["sizes"]) == 6

        engine = Engine.load(data)
        assert engine.store.get_meta("__meta__/clusters") is not None

    def test_ingest_missing_manifest_json_error(self, tmp_path, capsys):
        code, out, err = run(
            capsys,
            ["ingest", "--manifest", str(tmp_path / "nope.json"), "--data", str(tmp_path / "d")],
        )
        assert code != 0
        error = json.loads(err)
        assert "error" in error and error["error"]["code"]

    def test_cluster_too_few_videos_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        data = tmp_path / "data"
        run(capsys, ["fixture", "--seed", "2", "--videos", "2", "--segments", "3",
                     "--dim", "8", "--clusters", "2", "--out", str(corpus)])
        run(capsys, ["ingest", "--manifest", str(corpus / "manifest.json"), "--data", str(data)])
        code, _, err = run(capsys, ["cluster", "--k", "10", "--data", str(data)])
        assert code != 0
        assert json.loads(err)["error"]["code"] == "TooFewVideos"
