"""Self-contained SVG bar charts of monthly anomaly counts.

No plotting dependency: the chart is a fixed-size SVG with one bar per
calendar month across the covered span and numbered vertical markers at
the event months.
"""

from __future__ import annotations

from datetime import date

WIDTH = 960
HEIGHT = 280
MARGIN_LEFT = 46
MARGIN_RIGHT = 14
MARGIN_TOP = 30
MARGIN_BOTTOM = 36


def _month_range(first: str, last: str) -> list[str]:
    y0, m0 = (int(p) for p in first.split("-"))
    y1, m1 = (int(p) for p in last.split("-"))
    months = []
    y, m = y0, m0
    while (y, m) <= (y1, m1):
        months.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return months


def monthly_counts_svg(
    counts: list[tuple[str, int]],
    event_dates: list[tuple[str, date]],
    title: str,
    path,
    span: tuple[date, date] | None = None,
) -> None:
    """Write the chart; `event_dates` pairs a label with a resolved date.

    `span` widens the month axis to cover a whole series, so quiet months
    show as gaps rather than being dropped.
    """
    count_map = dict(counts)
    months_present = sorted(
        set(count_map) | {f"{d.year:04d}-{d.month:02d}" for _, d in event_dates}
    )
    if span is not None:
        lo, hi = span
        months_present = sorted(
            set(months_present)
            | {f"{lo.year:04d}-{lo.month:02d}", f"{hi.year:04d}-{hi.month:02d}"}
        )
    if not months_present:
        months = []
    else:
        months = _month_range(months_present[0], months_present[-1])
    n = max(len(months), 1)
    max_count = max(count_map.values(), default=1)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    bar_w = plot_w / n

    def x_of(idx: float) -> float:
        return MARGIN_LEFT + idx * bar_w

    def y_of(count: float) -> float:
        return MARGIN_TOP + plot_h * (1.0 - count / max_count)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN_LEFT}" y="18" font-family="sans-serif" font-size="13">'
        f"{_escape(title)}</text>",
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" '
        f'x2="{WIDTH - MARGIN_RIGHT}" y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" '
        f'x2="{MARGIN_LEFT}" y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<text x="8" y="{MARGIN_TOP + 4}" font-family="sans-serif" font-size="11">'
        f"{max_count}</text>",
        f'<text x="8" y="{MARGIN_TOP + plot_h}" font-family="sans-serif" '
        f'font-size="11">0</text>',
    ]
    month_pos = {m: i for i, m in enumerate(months)}
    for m, c in counts:
        if c <= 0 or m not in month_pos:
            continue
        x = x_of(month_pos[m])
        parts.append(
            f'<rect x="{x:.2f}" y="{y_of(c):.2f}" width="{max(bar_w, 1.0):.2f}" '
            f'height="{(plot_h * c / max_count):.2f}" fill="#3366aa"/>'
        )
    for m in months:
        if m.endswith("-01") or len(months) <= 14:
            x = x_of(month_pos[m])
            parts.append(
                f'<text x="{x:.2f}" y="{HEIGHT - 14}" font-family="sans-serif" '
                f'font-size="10">{m[:4] if m.endswith("-01") else m}</text>'
            )
    for idx, (label, d) in enumerate(event_dates, start=1):
        key = f"{d.year:04d}-{d.month:02d}"
        if key not in month_pos:
            continue
        x = x_of(month_pos[key] + 0.5)
        parts.append(
            f'<line x1="{x:.2f}" y1="{MARGIN_TOP}" x2="{x:.2f}" '
            f'y2="{MARGIN_TOP + plot_h}" stroke="#cc3333" stroke-dasharray="4,3"/>'
        )
        parts.append(
            f'<text x="{x + 3:.2f}" y="{MARGIN_TOP + 12}" font-family="sans-serif" '
            f'font-size="11" fill="#cc3333">{idx}</text>'
        )
        parts.append(f"<!-- event {idx}: {_escape(label)} -->")
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
