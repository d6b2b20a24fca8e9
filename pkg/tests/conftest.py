import os

import numpy as np
import pytest

from fisherlens import netpbm
from fisherlens.cascade import load_cascade_file, packaged_cascade_dir
from fisherlens.dataset import EmotionLabel
from fisherlens.imgproc import GrayImage
from fisherlens.jsonio import load_path

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
PORTRAITS = os.path.join(FIXTURES, "portraits")
MINI_CASCADES = os.path.join(FIXTURES, "cascades")


@pytest.fixture(scope="session")
def frontal_default():
    return load_cascade_file(
        os.path.join(packaged_cascade_dir(), "haarcascade_frontalface_default.xml")
    )


@pytest.fixture(scope="session")
def mini_ok_model():
    return load_cascade_file(os.path.join(MINI_CASCADES, "mini_ok.xml"))


@pytest.fixture(scope="session")
def pass_all_model():
    return load_cascade_file(os.path.join(MINI_CASCADES, "pass_all.xml"))


@pytest.fixture(scope="session")
def reject_all_model():
    return load_cascade_file(os.path.join(MINI_CASCADES, "reject_all.xml"))


@pytest.fixture(scope="session")
def portrait_annotations():
    return load_path(os.path.join(PORTRAITS, "annotations.json"))


def portrait_path(name: str) -> str:
    return os.path.join(PORTRAITS, name)


@pytest.fixture(scope="session")
def blob_data():
    """90 noisy block-pattern faces, 30 per class, the pipeline ground truth."""
    from fisherlens.synthetic import make_blob_faces

    return make_blob_faces(per_class=30, size=16, sigma=10.0, seed=42)


def make_ck_tree(root):
    """Miniature subject/session tree: 2 labeled sessions, 1 unlabeled.

    Returns (images_root, labels_root). Labeled sessions: S001/001 coded
    "3.0000000e+00" (disgust), S002/001 coded "7" (surprise); S003/001 has
    frames but no label file and must contribute nothing.
    """
    images = os.path.join(root, "images")
    labels = os.path.join(root, "labels")
    rng = np.random.default_rng(11)

    def frame(path, bright):
        base = rng.integers(0, 40, size=(12, 12), dtype=np.uint8)
        if bright:
            base = np.clip(base.astype(np.int16) + 120, 0, 255).astype(np.uint8)
        netpbm.write_image(GrayImage(base), path)

    for subject, session, code in (("S001", "001", "3.0000000e+00"), ("S002", "001", "7")):
        sdir = os.path.join(images, subject, session)
        os.makedirs(sdir)
        for i in range(1, 4):
            frame(os.path.join(sdir, f"{subject}_{session}_{i:08d}.pgm"), bright=i == 3)
        ldir = os.path.join(labels, subject, session)
        os.makedirs(ldir)
        with open(os.path.join(ldir, f"{subject}_{session}_emotion.txt"), "w") as fh:
            fh.write(f"   {code}\n")

    unlabeled = os.path.join(images, "S003", "001")
    os.makedirs(unlabeled)
    frame(os.path.join(unlabeled, "S003_001_00000001.pgm"), bright=False)
    os.makedirs(os.path.join(labels, "S003"))
    return images, labels


EXPECTED_CK_LABELS = {
    ("S001", "001"): (EmotionLabel.disgust, EmotionLabel.neutral),
    ("S002", "001"): (EmotionLabel.surprise, EmotionLabel.neutral),
}
