"""Rendered report figures: files exist and are real PNGs."""

import numpy as np

from fisherlens.dataset import EmotionLabel
from fisherlens.evaluate import ConfusionMatrix, TrialConfig, TrialReport
from fisherlens.figures import save_accuracy_figure, save_confusion_figure

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def sample_matrix():
    classes = [EmotionLabel.happy, EmotionLabel.anger, EmotionLabel.surprise]
    counts = np.array([[12, 1, 0], [2, 10, 1], [0, 0, 14]])
    return ConfusionMatrix(classes, counts)


def sample_report():
    accs = [0.9, 0.95, 1.0, 0.85, 0.9]
    mean = sum(accs) / len(accs)
    var = sum((a - mean) ** 2 for a in accs) / (len(accs) - 1)
    return TrialReport(
        config=TrialConfig(seed=1, trials=len(accs)),
        accuracies=accs,
        mean=mean,
        std=var ** 0.5,
        pooled=sample_matrix(),
    )


def test_confusion_heatmap_written(tmp_path):
    path = tmp_path / "confusion.png"
    save_confusion_figure(sample_matrix(), path)
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000


def test_accuracy_plot_written(tmp_path):
    path = tmp_path / "accuracy.png"
    save_accuracy_figure(sample_report(), path)
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000


def test_single_trial_plot(tmp_path):
    report = sample_report()
    report.accuracies = [0.9]
    report.config = TrialConfig(seed=1, trials=1)
    report.mean, report.std = 0.9, 0.0
    path = tmp_path / "one.png"
    save_accuracy_figure(report, path)
    assert path.read_bytes().startswith(PNG_MAGIC)
