from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from elaforensics.errors import EmptyCorpus, NoAdmissiblePlacement, OutOfBounds, ParseError
from elaforensics.geometry import BBox
from elaforensics.imaging import ImageBuffer, load_image, write_jpeg
from elaforensics.synth import (
    ANNOTATIONS_FILE,
    MANIFEST_FILE,
    Annotation,
    AreaConstraints,
    LabeledBox,
    SplicePlanner,
    SpliceRecipe,
    _SourceObject,
    generate_dataset,
    paste,
    read_annotations,
    splice,
    write_annotations,
)


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def noise_image(seed, h, w) -> ImageBuffer:
    return ImageBuffer(np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8))


# ---------------------------------------------------------------- paste


def test_self_paste_is_identity(tmp_path):
    src = noise_image(0, 32, 32)
    path = tmp_path / "a.png"
    Image.fromarray(src.pixels).save(path)
    img, ann = splice(SpliceRecipe(str(path), BBox(0, 0, 10, 10), str(path), (0, 0)))
    assert img == src
    assert ann.boxes[0].box == BBox(0, 0, 10, 10)
    assert ann.tampered


def test_paste_changes_only_the_box():
    target, source = noise_image(1, 40, 50), noise_image(2, 30, 30)
    out, box = paste(target, source, BBox(3, 4, 15, 12), (20, 25))
    assert box == BBox(20, 25, 32, 33)
    assert np.array_equal(out.pixels[25:33, 20:32], source.pixels[4:12, 3:15])
    outside = np.ones((40, 50), bool)
    outside[25:33, 20:32] = False
    assert np.array_equal(out.pixels[outside], target.pixels[outside])


def test_paste_out_of_bounds():
    target, source = noise_image(1, 20, 20), noise_image(2, 20, 20)
    with pytest.raises(OutOfBounds):
        paste(target, source, BBox(0, 0, 10, 10), (15, 0))
    with pytest.raises(OutOfBounds):
        paste(target, source, BBox(15, 15, 25, 25), (0, 0))


def test_fractional_source_box_snaps_outward():
    target, source = noise_image(3, 20, 20), noise_image(4, 20, 20)
    _, box = paste(target, source, BBox(1.2, 1.7, 4.5, 5.0), (0, 0))
    assert box == BBox(0, 0, 4, 4)


# ---------------------------------------------------------------- annotations


def test_annotation_roundtrip(tmp_path):
    anns = [
        Annotation("a.jpg", 10, 10, True, (LabeledBox(BBox(1, 1, 5, 5), "cat"),)),
        Annotation("b.jpg", 10, 10, False),
    ]
    write_annotations(tmp_path / "x.jsonl", anns)
    assert read_annotations(tmp_path / "x.jsonl") == anns


def test_untampered_with_boxes_is_not_ground_truth(tmp_path):
    write_annotations(tmp_path / "x.jsonl", [Annotation("b.jpg", 10, 10, False, (LabeledBox(BBox(0, 0, 2, 2)),))])
    with pytest.raises(ParseError):
        read_annotations(tmp_path / "x.jsonl")
    assert len(read_annotations(tmp_path / "x.jsonl", ground_truth=False)) == 1


def test_annotation_box_outside_image():
    with pytest.raises(OutOfBounds):
        Annotation("a.jpg", 10, 10, True, (LabeledBox(BBox(5, 5, 11, 8)),))


def test_malformed_annotation_line_is_named(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"image_path": "a", "width": 4, "height": 4, "tampered": false, "boxes": []}\n{oops\n')
    with pytest.raises(ParseError) as err:
        read_annotations(path)
    assert err.value.line == 2
    assert ":2:" in str(err.value)


# ---------------------------------------------------------------- planner


def _planner(sizes, target_sizes, constraints=AreaConstraints(0.0, 1.0), seed=0, max_retries=100):
    objects = [_SourceObject(f"s{i}.jpg", BBox(0, 0, w, h), None) for i, (w, h) in enumerate(sizes)]
    return SplicePlanner(objects, [f"t{i}.jpg" for i in range(len(target_sizes))], target_sizes, constraints, seed, max_retries)


def test_forced_choice_planner():
    planner = _planner([(20, 20), (50, 50)], [(20, 20)])
    assert all(planner.plan(i) == (0, 0, (0, 0)) for i in range(20))


def test_plans_are_uniform_over_triples():
    # 5x5 object has 36 origins in a 10x10 host, 8x8 has 9: triple-uniform
    # sampling picks the small object 80% of the time
    planner = _planner([(5, 5), (8, 8)], [(10, 10)])
    counts = Counter(planner.plan(i)[0] for i in range(4000))
    assert counts[0] / 4000 == pytest.approx(0.8, abs=0.025)
    origins = Counter(planner.plan(i)[2] for i in range(4000) if planner.plan(i)[0] == 1)
    assert len(origins) == 9


def test_planning_is_order_independent():
    planner = _planner([(5, 5), (8, 8), (3, 9)], [(10, 10), (12, 9)], seed=77)
    serial = [planner.plan(i) for i in range(500)]
    assert [planner.plan(i) for i in reversed(range(500))][::-1] == serial
    assert [_planner([(5, 5), (8, 8), (3, 9)], [(10, 10), (12, 9)], seed=77).plan(i) for i in range(500)] == serial


def test_no_admissible_triple():
    planner = _planner([(50, 50)], [(20, 20)], max_retries=5)
    with pytest.raises(NoAdmissiblePlacement) as err:
        planner.plan(3)
    assert err.value.sample_index == 3


def test_area_constraints_validation():
    with pytest.raises(ValueError):
        AreaConstraints(0.3, 0.2)


# ---------------------------------------------------------------- dataset


def _forced_corpus(root: Path):
    src, tgt = root / "src", root / "tgt"
    src.mkdir()
    tgt.mkdir()
    write_jpeg(noise_image(5, 30, 30), src / "s.jpg", 70)
    write_annotations(src / ANNOTATIONS_FILE, [Annotation("s.jpg", 30, 30, False, (LabeledBox(BBox(5, 5, 25, 25), "obj"),))])
    write_jpeg(noise_image(6, 20, 20), tgt / "t.jpg", 95)
    return src, tgt


def test_forced_choice_dataset(tmp_path):
    src, tgt = _forced_corpus(tmp_path)
    manifest = generate_dataset(src, tgt, 1, tmp_path / "out", AreaConstraints(0.0, 1.0))
    (ann,) = read_annotations(tmp_path / "out" / ANNOTATIONS_FILE)
    assert ann.boxes == (LabeledBox(BBox(0, 0, 20, 20), "obj"),)
    assert manifest["samples"][0]["recipe"]["paste_origin"] == [0, 0]
    assert manifest["samples"][0]["recipe"]["source_box"] == {"x1": 5, "y1": 5, "x2": 25, "y2": 25}


def test_dataset_respects_area_bounds(small_corpus, tmp_path):
    src, tgt = small_corpus
    out = tmp_path / "ds"
    generate_dataset(src, tgt, 30, out, AreaConstraints(0.01, 0.25), seed=4)
    manifest = json.loads((out / MANIFEST_FILE).read_text())
    assert len(manifest["samples"]) == 30
    for ann in read_annotations(out / ANNOTATIONS_FILE):
        frac = ann.boxes[0].box.area / (ann.width * ann.height)
        assert 0.01 <= frac <= 0.25
        assert load_image(out / ann.image_path).width == ann.width


def test_same_seed_same_tree(small_corpus, tmp_path):
    src, tgt = small_corpus
    generate_dataset(src, tgt, 10, tmp_path / "a", seed=9, emit_originals=True)
    generate_dataset(src, tgt, 10, tmp_path / "b", seed=9, emit_originals=True)
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a == b
    assert sum(k.startswith("originals/") for k in a) == 10


def test_different_seed_differs(small_corpus, tmp_path):
    src, tgt = small_corpus
    generate_dataset(src, tgt, 10, tmp_path / "a", seed=1)
    generate_dataset(src, tgt, 10, tmp_path / "b", seed=2)
    assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")


def test_manifest_hashes_match_files(small_corpus, tmp_path):
    import hashlib

    src, tgt = small_corpus
    out = tmp_path / "ds"
    manifest = generate_dataset(src, tgt, 5, out, seed=3)
    for sample in manifest["samples"]:
        assert hashlib.sha256((out / sample["image_path"]).read_bytes()).hexdigest() == sample["sha256"]


def test_empty_sources(tmp_path):
    (tmp_path / "s").mkdir()
    (tmp_path / "t").mkdir()
    with pytest.raises(EmptyCorpus):
        generate_dataset(tmp_path / "s", tmp_path / "t", 1, tmp_path / "o")
    assert not (tmp_path / "o").exists()


def test_unsatisfiable_constraints_write_nothing(tmp_path):
    src, tgt = _forced_corpus(tmp_path)
    with pytest.raises(NoAdmissiblePlacement):
        generate_dataset(src, tgt, 2, tmp_path / "out", AreaConstraints(0.01, 0.25))
    assert not (tmp_path / "out").exists()
