"""Regenerate tests/golden/known_series.svg after a deliberate rendering change."""

from pathlib import Path

from edms_transparency.core import parse_timestamp
from edms_transparency.monitor import Granularity, MetricSeries, SeriesPoint
from edms_transparency.report import render_line_chart

GOLDEN = Path(__file__).with_name("golden") / "known_series.svg"


def known_series():
    def pts(vals):
        return tuple(SeriesPoint(parse_timestamp(f"{2010 + i}-01-01T00:00:00Z"), v, 10) for i, v in enumerate(vals))

    return [
        MetricSeries("I4_1", None, Granularity.YEARLY, pts([3, 5, None, 4, 8, 6])),
        MetricSeries("I4_1", "D1", Granularity.YEARLY, pts([1, 2, 0, None, 3, 2])),
    ]


if __name__ == "__main__":
    GOLDEN.write_text(render_line_chart(known_series()), encoding="utf-8")
    print(GOLDEN)
