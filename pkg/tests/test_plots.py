from gridtalk.plots import plot_eval_report, plot_training_curves, read_metrics_csv
from gridtalk.training import write_metrics_csv

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _rows(n=40):
    rows = []
    for i in range(n):
        rows.append(
            {
                "episode": i,
                "stage": 1 if i < 20 else 2,
                "epsilon": 0.2,
                "reward": -60.0 + i,
                "turns": 30,
                "success": i % 3 == 0,
                "questions": 10,
                "moves": 20,
                "trap_questions": 1,
                "loss_mean": 0.5 if i > 5 else None,
            }
        )
    return rows


def test_training_curves_png(tmp_path):
    out = plot_training_curves(_rows(), tmp_path / "curves.png", window=10)
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_training_curves_short_series(tmp_path):
    # fewer rows than the window still renders (window shrinks to fit)
    out = plot_training_curves(_rows(5), tmp_path / "tiny.png", window=500)
    assert out.exists()


def test_eval_report_png(tmp_path):
    report = {
        "success_rate": 0.75,
        "fraction_moves": 0.6,
        "fraction_questions": 0.4,
        "fraction_trap_questions": 0.05,
        "per_difficulty": {
            "short": {"episodes": 4, "success_rate": 1.0, "avg_reward": 55.0},
            "long": {"episodes": 4, "success_rate": 0.5, "avg_reward": -3.0},
        },
    }
    out = plot_eval_report(report, tmp_path / "report.png")
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_metrics_csv_round_trip_through_plots(tmp_path):
    rows = _rows(8)
    path = tmp_path / "m.csv"
    write_metrics_csv(rows, path)
    loaded = read_metrics_csv(path)
    assert [r["episode"] for r in loaded] == [r["episode"] for r in rows]
    assert loaded[0]["loss_mean"] is None
    assert loaded[-1]["loss_mean"] == 0.5
