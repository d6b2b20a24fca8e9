import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fisherlens.dataset as dataset
from fisherlens import netpbm
from fisherlens.dataset import (
    DatasetManifest,
    EmotionLabel,
    Rng,
    SampleRecord,
    choice,
    glob_match,
    ingest_ck,
    list_matching,
    parse_label,
    prepare_faces,
    randint,
    seed_from_env,
    shuffle,
    split,
)
from fisherlens.errors import (
    EmptyResultError,
    FisherlensError,
    IngestError,
    SplitError,
)
from fisherlens.imgproc import GrayImage, Rect

from conftest import EXPECTED_CK_LABELS, make_ck_tree


class TestEmotionLabel:
    def test_canonical_codes(self):
        assert [e.value for e in EmotionLabel] == list(range(8))
        assert EmotionLabel.neutral == 0
        assert EmotionLabel.contempt == 7

    def test_parse_label_names_and_codes(self):
        assert parse_label("happy") is EmotionLabel.happy
        assert parse_label(" SAD ") is EmotionLabel.sad
        assert parse_label("4") is EmotionLabel.surprise
        with pytest.raises(FisherlensError, match="boredom"):
            parse_label("boredom")
        with pytest.raises(FisherlensError):
            parse_label("9")


def glob_oracle(pattern: str, name: str) -> bool:
    if not pattern:
        return not name
    if pattern[0] == "*":
        return glob_oracle(pattern[1:], name) or bool(name) and glob_oracle(pattern, name[1:])
    if name and (pattern[0] == "?" or pattern[0] == name[0]):
        return glob_oracle(pattern[1:], name[1:])
    return False


DIREC_FILES = ["filename1", "filename2", "filename3", "filename4", "filename5", "files"]


class TestGlobMatch:
    def test_star_suffix_matches_all_direc_files(self):
        assert [n for n in DIREC_FILES if glob_match("file*", n)] == DIREC_FILES

    def test_question_mark_needs_exactly_one_char(self):
        got = [n for n in DIREC_FILES if glob_match("filename?", n)]
        assert got == DIREC_FILES[:5]

    def test_star_matches_empty(self):
        assert glob_match("*", "")
        assert glob_match("a*", "a")

    def test_anchoring(self):
        assert not glob_match("name", "filename")
        assert not glob_match("file", "filename")

    def test_rejects_path_separators(self):
        with pytest.raises(FisherlensError):
            glob_match("a/*", "ab")
        with pytest.raises(FisherlensError):
            glob_match("*", "a/b")

    @settings(max_examples=400, deadline=None)
    @given(
        st.text(alphabet="ab*?", max_size=4),
        st.text(alphabet="ab1.", max_size=6),
    )
    def test_agrees_with_recursive_oracle(self, pattern, name):
        assert glob_match(pattern, name) == glob_oracle(pattern, name)

    def test_backtracking_stars(self):
        assert glob_match("*a*b", "xaxbayb")
        assert not glob_match("*a*b", "bbba")
        assert glob_match("a**b", "ab")


class TestListMatching:
    def test_full_paths_sorted_subdirs_excluded(self, tmp_path):
        for n in DIREC_FILES:
            (tmp_path / n).write_text("")
        sub = tmp_path / "filename9"
        sub.mkdir()
        (sub / "filenameX").write_text("")
        got = list_matching(tmp_path, "file*")
        # directory entries match by name; their contents never do
        assert got == sorted(os.path.join(tmp_path, n) for n in DIREC_FILES + ["filename9"])
        assert not any("filenameX" in p for p in got)

    def test_empty_directory(self, tmp_path):
        assert list_matching(tmp_path, "*") == []

    def test_missing_directory_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            list_matching(tmp_path / "absent", "*")


class TestRng:
    def test_splitmix64_reference_stream_seed0(self):
        rng = Rng(0)
        got = [rng.next_u64() for _ in range(5)]
        assert got == [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
            0xF88BB8A8724C81EC,
            0x1B39896A51A8749B,
        ]

    def test_same_seed_same_stream(self):
        a, b = Rng(12345), Rng(12345)
        assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]

    def test_next_float_unit_interval(self):
        rng = Rng(9)
        xs = [rng.next_float() for _ in range(1000)]
        assert all(0.0 <= x < 1.0 for x in xs)

    def test_gauss_moments(self):
        rng = Rng(4)
        xs = np.array([rng.gauss() for _ in range(20000)])
        assert abs(xs.mean()) < 0.03
        assert abs(xs.std() - 1.0) < 0.03

    def test_randint_single_point(self):
        assert randint(Rng(1), 3, 3) == 3

    def test_randint_bounds_and_coverage(self):
        rng = Rng(2)
        seen = set()
        for _ in range(10000):
            x = randint(rng, 0, 9)
            assert 0 <= x <= 9
            seen.add(x)
        assert seen == set(range(10))

    def test_randint_modulo_semantics(self):
        a, b = Rng(77), Rng(77)
        for lo, hi in ((0, 9), (5, 17), (-3, 3)):
            assert randint(a, lo, hi) == lo + b.next_u64() % (hi - lo + 1)

    def test_randint_rejects_inverted_range(self):
        with pytest.raises(FisherlensError):
            randint(Rng(0), 5, 4)

    def test_choice(self):
        assert choice(Rng(0), ["only"]) == "only"
        items = ["a", "b", "c", "d"]
        got = [choice(Rng(s), items) for s in range(20)]
        assert set(got) <= set(items)
        assert [choice(Rng(3), items) for _ in range(5)] == [
            choice(Rng(3), items) for _ in range(5)
        ]
        with pytest.raises(FisherlensError):
            choice(Rng(0), [])

    def test_shuffle_is_permutation_and_seeded(self):
        items = list(range(30))
        a = items[:]
        shuffle(Rng(6), a)
        assert sorted(a) == items
        b = items[:]
        shuffle(Rng(6), b)
        assert a == b
        c = items[:]
        shuffle(Rng(7), c)
        assert c != a  # overwhelmingly likely for 30 elements


class TestSeedFromEnv:
    def test_explicit_beats_env(self, monkeypatch):
        monkeypatch.setenv("FISHERLENS_SEED", "100")
        assert seed_from_env(7) == 7

    def test_env_beats_default(self, monkeypatch):
        monkeypatch.setenv("FISHERLENS_SEED", "100")
        assert seed_from_env() == 100

    def test_default(self, monkeypatch):
        monkeypatch.delenv("FISHERLENS_SEED", raising=False)
        assert seed_from_env() == 42

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv("FISHERLENS_SEED", "not-a-number")
        with pytest.raises(FisherlensError):
            seed_from_env()


def mk_manifest(counts: dict, face=(8, 8)) -> DatasetManifest:
    records = []
    for label, n in counts.items():
        for i in range(n):
            records.append(
                SampleRecord(f"/data/{label.name}/{i:03d}.pgm", label, f"s{i:03d}", "001")
            )
    return DatasetManifest(face[0], face[1], records)


class TestManifest:
    def test_canonical_order(self):
        recs = [
            SampleRecord("/p/b.pgm", EmotionLabel.happy, "S2", "001"),
            SampleRecord("/p/a.pgm", EmotionLabel.sad, "S1", "002"),
            SampleRecord("/p/c.pgm", EmotionLabel.anger, "S1", "001"),
        ]
        m = DatasetManifest(8, 8, recs)
        assert [r.subject for r in m.records] == ["S1", "S1", "S2"]
        assert [r.session for r in m.records][:2] == ["001", "002"]

    def test_round_trip_and_byte_identity(self, tmp_path):
        m = mk_manifest({EmotionLabel.happy: 3, EmotionLabel.anger: 2})
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        m.save(p1)
        m.save(p2)
        assert p1.read_bytes() == p2.read_bytes()
        again = DatasetManifest.load(p1)
        assert again.records == m.records
        assert (again.face_w, again.face_h) == (8, 8)

    def test_version_check(self, tmp_path):
        m = mk_manifest({EmotionLabel.happy: 2, EmotionLabel.anger: 2})
        doc = m.to_document()
        doc["version"] = 99
        with pytest.raises(FisherlensError, match="version"):
            DatasetManifest.from_document(doc)

    def test_filtered(self):
        m = mk_manifest({EmotionLabel.happy: 3, EmotionLabel.anger: 2, EmotionLabel.sad: 2})
        f = m.filtered({EmotionLabel.happy, EmotionLabel.sad})
        assert f.classes() == [EmotionLabel.happy, EmotionLabel.sad]
        assert len(f) == 5

    def test_by_class(self):
        m = mk_manifest({EmotionLabel.happy: 3, EmotionLabel.anger: 2})
        by = m.by_class()
        assert [len(v) for v in by.values()] == [3, 2]


class TestIngest:
    def test_fixture_tree_yields_four_records(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        m = ingest_ck(images, labels)
        assert len(m) == 4
        got = {}
        for r in m.records:
            got.setdefault((r.subject, r.session), []).append((r.label, r.image_path))
        for key, (peak, neutral) in EXPECTED_CK_LABELS.items():
            labels_here = sorted(lb for lb, _ in got[key])
            assert sorted((peak, neutral)) == labels_here
        # neutral must point at the first frame, the coded label at the last
        for r in m.records:
            frame = int(r.image_path.rsplit("_", 1)[1].split(".")[0])
            assert frame == (1 if r.label is EmotionLabel.neutral else 3)

    def test_unlabeled_session_contributes_nothing(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        m = ingest_ck(images, labels)
        assert all(r.subject != "S003" for r in m.records)

    def test_lenient_float_code_and_seven_maps_to_surprise(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        m = ingest_ck(images, labels)
        by_subject = {r.subject: r.label for r in m.records if r.label != EmotionLabel.neutral}
        assert by_subject["S001"] is EmotionLabel.disgust  # "3.0000000e+00"
        assert by_subject["S002"] is EmotionLabel.surprise  # "7"

    def test_bad_label_code(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        label_file = os.path.join(labels, "S001", "001", "S001_001_emotion.txt")
        with open(label_file, "w") as fh:
            fh.write("9\n")
        with pytest.raises(IngestError, match="9"):
            ingest_ck(images, labels)

    def test_unparsable_label_names_file(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        label_file = os.path.join(labels, "S002", "001", "S002_001_emotion.txt")
        with open(label_file, "w") as fh:
            fh.write("angry\n")
        with pytest.raises(IngestError, match="S002_001_emotion.txt"):
            ingest_ck(images, labels)

    def test_empty_tree(self, tmp_path):
        (tmp_path / "images").mkdir()
        (tmp_path / "labels").mkdir()
        with pytest.raises(EmptyResultError):
            ingest_ck(tmp_path / "images", tmp_path / "labels")

    def test_manifest_saves_identically(self, tmp_path):
        images, labels = make_ck_tree(tmp_path)
        m1 = ingest_ck(images, labels)
        m2 = ingest_ck(images, labels)
        assert m1.records == m2.records


class TestSplit:
    def test_eighty_twenty_per_class(self):
        m = mk_manifest({EmotionLabel.happy: 10, EmotionLabel.anger: 10})
        train, test = split(m, 0.8, Rng(1))
        for part, want in ((train, 8), (test, 2)):
            per = {c: len(rs) for c, rs in part.by_class().items()}
            assert per == {EmotionLabel.happy: want, EmotionLabel.anger: want}

    def test_same_seed_same_partition(self):
        m = mk_manifest({EmotionLabel.happy: 9, EmotionLabel.anger: 7})
        a = split(m, 0.8, Rng(5))
        b = split(m, 0.8, Rng(5))
        assert a[0].records == b[0].records
        assert a[1].records == b[1].records

    def test_every_class_keeps_a_test_record(self):
        m = mk_manifest({EmotionLabel.happy: 2, EmotionLabel.anger: 2})
        train, test = split(m, 0.99, Rng(0))
        for part in (train, test):
            assert {c: len(rs) for c, rs in part.by_class().items()} == {
                EmotionLabel.happy: 1,
                EmotionLabel.anger: 1,
            }

    def test_partition_properties(self):
        m = mk_manifest(
            {EmotionLabel.happy: 11, EmotionLabel.anger: 5, EmotionLabel.surprise: 3}
        )
        for seed in range(10):
            train, test = split(m, 0.8, Rng(seed))
            assert len(train) + len(test) == len(m)
            all_paths = {r.image_path for r in train.records} | {
                r.image_path for r in test.records
            }
            assert len(all_paths) == len(m)
            for c, rs in test.by_class().items():
                assert len(rs) >= 1

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
    def test_fraction_bounds(self, fraction):
        m = mk_manifest({EmotionLabel.happy: 4, EmotionLabel.anger: 4})
        with pytest.raises(SplitError):
            split(m, fraction, Rng(0))

    def test_small_class_named_in_error(self):
        m = mk_manifest({EmotionLabel.happy: 4, EmotionLabel.fear: 1})
        with pytest.raises(SplitError, match="fear"):
            split(m, 0.8, Rng(0))


class TestPrepareFaces:
    @staticmethod
    def _manifest_with_images(root, specs):
        """specs: (label, uniform?) -> records with 12x12 images on disk."""
        rng = np.random.default_rng(8)
        records = []
        for i, (label, uniform) in enumerate(specs):
            if uniform:
                pix = np.full((12, 12), 77, dtype=np.uint8)
            else:
                pix = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
            path = os.path.join(root, f"in_{i}.pgm")
            netpbm.write_image(GrayImage(pix), path)
            records.append(SampleRecord(path, label, f"s{i:02d}", "001"))
        return DatasetManifest(6, 6, records)

    @pytest.fixture
    def fake_detector(self, monkeypatch):
        """Face at (1, 1, 8, 8) on any non-uniform image, nothing on flat ones."""

        def fake(models, img, **kwargs):
            if np.all(img.pixels == img.pixels[0, 0]):
                return None
            return Rect(1, 1, 8, 8)

        monkeypatch.setattr(dataset, "detect_face_sequence", fake)
        return fake

    def test_output_tree_and_manifest(self, tmp_path, fake_detector):
        m = self._manifest_with_images(
            tmp_path,
            [
                (EmotionLabel.happy, False),
                (EmotionLabel.happy, False),
                (EmotionLabel.anger, False),
            ],
        )
        out_root = tmp_path / "prepared"
        report = prepare_faces(m, cascades=[object()], out_root=out_root)
        assert sorted(os.listdir(out_root)) == ["anger", "happy"]
        assert len(report.manifest) == 3
        for rec in report.manifest.records:
            img = netpbm.read_image(rec.image_path)
            assert (img.width, img.height) == (6, 6)

    def test_blank_records_are_skipped_and_reported(self, tmp_path, fake_detector):
        m = self._manifest_with_images(
            tmp_path,
            [
                (EmotionLabel.happy, False),
                (EmotionLabel.happy, True),
                (EmotionLabel.anger, False),
            ],
        )
        report = prepare_faces(m, cascades=[object()], out_root=tmp_path / "out")
        assert len(report.manifest) == 2
        assert len(report.skipped) == 1
        assert "in_1" in report.skipped[0].image_path

    def test_all_blank_is_empty_result(self, tmp_path, fake_detector):
        m = self._manifest_with_images(
            tmp_path, [(EmotionLabel.happy, True), (EmotionLabel.anger, True)]
        )
        with pytest.raises(EmptyResultError):
            prepare_faces(m, cascades=[object()], out_root=tmp_path / "out")

    def test_running_twice_writes_identical_bytes(self, tmp_path, fake_detector):
        m = self._manifest_with_images(
            tmp_path, [(EmotionLabel.happy, False), (EmotionLabel.anger, False)]
        )
        out = tmp_path / "out"
        first = {}
        prepare_faces(m, cascades=[object()], out_root=out)
        for sub, _, files in os.walk(out):
            for f in files:
                p = os.path.join(sub, f)
                first[p] = open(p, "rb").read()
        prepare_faces(m, cascades=[object()], out_root=out)
        for p, data in first.items():
            assert open(p, "rb").read() == data

    def test_needs_a_cascade(self, tmp_path):
        m = mk_manifest({EmotionLabel.happy: 2, EmotionLabel.anger: 2})
        with pytest.raises(FisherlensError):
            prepare_faces(m, cascades=[], out_root=tmp_path)
