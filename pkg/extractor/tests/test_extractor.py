import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from awt_extractor.augment import center_crop_square, sample_crop_box
from awt_extractor.encoders import ProjectionEncoder, get_encoder
from awt_extractor.errors import DecodeError, ExtractorError, ModelLoadError
from awt_extractor.extract import (
    ExtractionConfig,
    build_manifest,
    extract_class_texts,
    extract_image_views,
)

CFG = ExtractionConfig(model="proj:32", n_views=3, seed=7)


def make_image(path: Path, seed: int, size=(24, 18)) -> Path:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)
    return path


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_dataset")
    seed = 0
    for class_name in ("cat", "dog"):
        (root / class_name).mkdir()
        for k in range(2):
            make_image(root / class_name / f"{class_name}{k}.png", seed)
            seed += 1
    return root


@pytest.fixture(scope="module")
def descriptions(tmp_path_factory):
    path = tmp_path_factory.mktemp("desc") / "descriptions.json"
    payload = {
        "classes": [
            {"name": "cat", "descriptions": [f"cat detail {i}" for i in range(3)]},
            {"name": "dog", "descriptions": [f"dog detail {i}" for i in range(3)]},
        ]
    }
    path.write_text(json.dumps(payload))
    return path


class TestEncoders:
    def test_projection_encoder_is_deterministic(self):
        e1 = ProjectionEncoder("proj:32", 32)
        e2 = ProjectionEncoder("proj:32", 32)
        img = Image.new("RGB", (20, 20), (120, 30, 200))
        np.testing.assert_array_equal(e1.embed_image(img), e2.embed_image(img))
        np.testing.assert_array_equal(e1.embed_text("a cat"), e2.embed_text("a cat"))

    def test_embeddings_are_unit_float32(self):
        enc = get_encoder("proj:16")
        v = enc.embed_text("hello world")
        assert v.dtype == np.float32 and v.shape == (16,)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-4

    def test_different_ids_give_different_spaces(self):
        a = get_encoder("proj:16").embed_text("same text")
        b = ProjectionEncoder("proj-alt:16", 16).embed_text("same text")
        assert not np.allclose(a, b)

    def test_unknown_identifier(self):
        with pytest.raises(ModelLoadError):
            get_encoder("what:ever")
        with pytest.raises(ModelLoadError):
            get_encoder("proj:notanumber")


class TestAugment:
    def test_center_crop_is_square(self):
        img = Image.new("RGB", (30, 20))
        assert center_crop_square(img).size == (20, 20)

    def test_crop_boxes_within_bounds_and_seeded(self):
        r1 = np.random.default_rng(5)
        r2 = np.random.default_rng(5)
        boxes1 = [sample_crop_box(r1, 40, 30, (0.5, 1.0)) for _ in range(20)]
        boxes2 = [sample_crop_box(r2, 40, 30, (0.5, 1.0)) for _ in range(20)]
        assert boxes1 == boxes2
        for left, top, right, bottom in boxes1:
            assert 0 <= left < right <= 40
            assert 0 <= top < bottom <= 30


class TestExtraction:
    def test_view_matrix_shape_and_norms(self, dataset, tmp_path):
        out = extract_image_views(dataset / "cat" / "cat0.png", CFG, tmp_path / "v.npy")
        rows = np.load(out)
        assert rows.shape == (4, 32)
        assert rows.dtype == np.float32
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-4)

    def test_zero_views_keeps_original_only(self, dataset, tmp_path):
        cfg = ExtractionConfig(model="proj:32", n_views=0)
        out = extract_image_views(dataset / "cat" / "cat0.png", cfg, tmp_path / "v.npy")
        assert np.load(out).shape == (1, 32)

    def test_fixed_seed_bit_identical(self, dataset, tmp_path):
        a = extract_image_views(dataset / "dog" / "dog0.png", CFG, tmp_path / "a.npy")
        b = extract_image_views(dataset / "dog" / "dog0.png", CFG, tmp_path / "b.npy")
        assert a.read_bytes() == b.read_bytes()
        other = ExtractionConfig(model="proj:32", n_views=3, seed=8)
        c = extract_image_views(dataset / "dog" / "dog0.png", other, tmp_path / "c.npy")
        assert a.read_bytes() != c.read_bytes()

    def test_class_texts_raw_name_first(self, tmp_path):
        out = extract_class_texts("cat", ["striped fur"], CFG, tmp_path / "c.npy")
        rows = np.load(out)
        assert rows.shape == (2, 32)
        enc = get_encoder("proj:32")
        np.testing.assert_array_equal(rows[0], enc.embed_text("a photo of a cat."))

    def test_undecodable_image(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not an image")
        with pytest.raises(DecodeError):
            extract_image_views(bad, CFG, tmp_path / "v.npy")


class TestBuildManifest:
    def test_manifest_passes_primary_validation(self, dataset, descriptions, tmp_path):
        manifest_path = build_manifest(dataset, descriptions, CFG, tmp_path / "task")
        from awt.manifest import load_manifest, validate_manifest

        manifest = load_manifest(manifest_path)
        assert validate_manifest(manifest) == []
        assert manifest.class_names == ("cat", "dog")
        assert len(manifest.images) == 4

    def test_missing_class_names_it(self, dataset, tmp_path):
        partial = tmp_path / "partial.json"
        partial.write_text(
            json.dumps({"classes": [{"name": "cat", "descriptions": ["x"]}]})
        )
        with pytest.raises(ExtractorError, match="'dog'"):
            build_manifest(dataset, partial, CFG, tmp_path / "task")

    def test_rebuild_is_bit_identical(self, dataset, descriptions, tmp_path):
        p1 = build_manifest(dataset, descriptions, CFG, tmp_path / "t1")
        p2 = build_manifest(dataset, descriptions, CFG, tmp_path / "t2")
        assert p1.read_text() == p2.read_text()
        for rel in json.loads(p1.read_text())["images"]:
            f1 = (tmp_path / "t1" / rel["views_path"]).read_bytes()
            f2 = (tmp_path / "t2" / rel["views_path"]).read_bytes()
            assert f1 == f2


class TestEndToEnd:
    def test_primary_cli_evaluates_built_manifest(self, dataset, descriptions, tmp_path):
        manifest_path = build_manifest(dataset, descriptions, CFG, tmp_path / "task")
        out = tmp_path / "results.json"
        proc = subprocess.run(
            [
                sys.executable, "-m", "awt.cli", "evaluate",
                "--manifest", str(manifest_path), "--n-views", "3", "--m-desc", "3",
                "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.startswith("top1=")
        payload = json.loads(out.read_text())
        assert payload["n_images"] == 4

    def test_extractor_cli_round_trip(self, dataset, descriptions, tmp_path):
        proc = subprocess.run(
            [
                sys.executable, "-m", "awt_extractor.cli", "build",
                "--data", str(dataset), "--descriptions", str(descriptions),
                "--out", str(tmp_path / "task"), "--model", "proj:32",
                "--n-views", "2", "--seed", "1",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        manifest_path = Path(proc.stdout.strip())
        assert manifest_path.is_file()
        eval_proc = subprocess.run(
            [
                sys.executable, "-m", "awt.cli", "evaluate",
                "--manifest", str(manifest_path), "--n-views", "2", "--m-desc", "3",
                "--mode", "ot-uniform", "--out", str(tmp_path / "r.json"),
            ],
            capture_output=True,
            text=True,
        )
        assert eval_proc.returncode == 0, eval_proc.stderr
