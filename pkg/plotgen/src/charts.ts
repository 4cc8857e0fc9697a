/**
 * The three figure kinds.
 *
 * Every y value, error bar, and bar height comes straight from a CSV cell;
 * the only arithmetic here is coordinate mapping. Aggregation belongs to
 * the tool that wrote the CSV.
 */

import { DataError, HistSeries, SweepRow, archLabel } from "./csv.js";
import { Scale, linearScale, log2Scale, niceTicks, tickLabel } from "./scale.js";
import { Style } from "./style.js";
import { circle, line, polyline, rect, svgRoot, tag, text } from "./svg.js";

export interface Band {
  lo: number;
  hi: number;
}

export interface FigureOptions {
  title?: string;
  xLabel?: string;
  yLabel?: string;
  /** Shaded overlay ranges: on the y axis for line figures, x for histograms. */
  bands?: Band[];
  logX?: boolean;
}

interface Frame {
  left: number;
  right: number;
  top: number;
  bottom: number;
}

interface LinePoint {
  x: number;
  y: number;
  se: number;
}

interface LineSeries {
  label: string;
  color: string;
  points: LinePoint[];
}

// CRP curves climb into the top-right corner, so their legend goes top-left;
// stage sweeps fall away from it and histograms peak in the middle.
type LegendCorner = "tl" | "tr";

function frameFor(style: Style): Frame {
  return {
    left: style.margin.l,
    right: style.width - style.margin.r,
    top: style.margin.t,
    bottom: style.height - style.margin.b,
  };
}

function axisParts(
  fr: Frame,
  style: Style,
  xTicks: { at: number[]; label: (v: number) => string; scale: Scale },
  yTicks: { at: number[]; label: (v: number) => string; scale: Scale },
  opts: FigureOptions,
): string[] {
  const parts: string[] = [];
  for (const v of yTicks.at) {
    const y = yTicks.scale(v);
    parts.push(line(fr.left, y, fr.right, y, { stroke: style.gridColor, "stroke-width": "1" }));
    parts.push(
      text(fr.left - 7, y, yTicks.label(v), {
        "text-anchor": "end",
        dy: "0.32em",
        "font-size": String(style.fontSize),
        fill: style.textColor,
      }),
    );
  }
  for (const v of xTicks.at) {
    const x = xTicks.scale(v);
    parts.push(line(x, fr.bottom, x, fr.bottom + 4, { stroke: style.axisColor, "stroke-width": "1" }));
    parts.push(
      text(x, fr.bottom + 17, xTicks.label(v), {
        "text-anchor": "middle",
        "font-size": String(style.fontSize),
        fill: style.textColor,
      }),
    );
  }
  parts.push(line(fr.left, fr.top, fr.left, fr.bottom, { stroke: style.axisColor, "stroke-width": "1" }));
  parts.push(line(fr.left, fr.bottom, fr.right, fr.bottom, { stroke: style.axisColor, "stroke-width": "1" }));
  if (opts.xLabel) {
    parts.push(
      text((fr.left + fr.right) / 2, style.height - 12, opts.xLabel, {
        "text-anchor": "middle",
        "font-size": String(style.fontSize),
        fill: style.textColor,
      }),
    );
  }
  if (opts.yLabel) {
    const x = 16;
    const y = (fr.top + fr.bottom) / 2;
    parts.push(
      tag(
        "text",
        {
          x: "0",
          y: "0",
          transform: `translate(${x} ${y}) rotate(-90)`,
          "text-anchor": "middle",
          "font-size": String(style.fontSize),
          fill: style.textColor,
        },
        opts.yLabel,
      ),
    );
  }
  if (opts.title) {
    parts.push(
      text((fr.left + fr.right) / 2, style.margin.t - 12, opts.title, {
        "text-anchor": "middle",
        "font-size": String(style.titleSize),
        "font-weight": "bold",
        fill: style.textColor,
      }),
    );
  }
  return parts;
}

function legendParts(
  fr: Frame,
  style: Style,
  entries: Array<{ label: string; color: string }>,
  filled: boolean,
  corner: "tl" | "tr",
): string[] {
  if (entries.length === 0) return [];
  const lineHeight = style.fontSize + 6;
  const swatch = 18;
  const longest = Math.max(...entries.map((e) => e.label.length));
  const width = swatch + 8 + longest * style.fontSize * 0.62 + 10;
  const x0 = corner === "tr" ? fr.right - width - 6 : fr.left + 6;
  const y0 = fr.top + 6;
  const parts: string[] = [
    rect(x0, y0, width, entries.length * lineHeight + 8, {
      fill: style.background,
      stroke: style.gridColor,
      "stroke-width": "1",
    }),
  ];
  entries.forEach((entry, i) => {
    const y = y0 + 8 + i * lineHeight + lineHeight / 2 - 3;
    if (filled) {
      parts.push(rect(x0 + 6, y - 5, swatch - 6, 10, { fill: entry.color, "fill-opacity": String(style.histOpacity) }));
    } else {
      parts.push(line(x0 + 4, y, x0 + 4 + swatch, y, { stroke: entry.color, "stroke-width": String(style.lineWidth) }));
      parts.push(circle(x0 + 4 + swatch / 2, y, style.markerRadius, { fill: entry.color }));
    }
    parts.push(
      text(x0 + swatch + 10, y, entry.label, {
        dy: "0.32em",
        "font-size": String(style.fontSize),
        fill: style.textColor,
      }),
    );
  });
  return parts;
}

function sweepSeries(rows: SweepRow[], xOf: (r: SweepRow) => number, style: Style): LineSeries[] {
  const byLabel = new Map<string, LineSeries>();
  for (const row of rows) {
    const label = archLabel(row);
    let series = byLabel.get(label);
    if (!series) {
      const color = style.palette[byLabel.size % style.palette.length]!;
      series = { label, color, points: [] };
      byLabel.set(label, series);
    }
    const x = xOf(row);
    if (series.points.some((p) => p.x === x)) {
      throw new DataError(
        `duplicate point for ${label} at x=${x}; replicated sweeps cannot be drawn directly, rerun without --replications`,
      );
    }
    series.points.push({ x, y: row.advantage, se: row.stderr });
  }
  const all = [...byLabel.values()];
  for (const s of all) s.points.sort((a, b) => a.x - b.x);
  return all;
}

function renderLineFigure(series: LineSeries[], opts: FigureOptions, style: Style, corner: LegendCorner): string {
  const fr = frameFor(style);
  const xs = [...new Set(series.flatMap((s) => s.points.map((p) => p.x)))].sort((a, b) => a - b);
  const pad = style.markerRadius + 9;
  const xScale = (opts.logX ? log2Scale : linearScale)(
    [xs[0]!, xs[xs.length - 1]!],
    [fr.left + pad, fr.right - pad],
  );

  let yLo = Infinity;
  let yHi = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      yLo = Math.min(yLo, p.y - p.se);
      yHi = Math.max(yHi, p.y + p.se);
    }
  }
  for (const band of opts.bands ?? []) {
    yLo = Math.min(yLo, band.lo);
    yHi = Math.max(yHi, band.hi);
  }
  const nice = niceTicks(yLo, yHi);
  const yStep = nice.ticks.length > 1 ? nice.ticks[1]! - nice.ticks[0]! : 1;
  const yScale = linearScale([nice.lo, nice.hi], [fr.bottom, fr.top]);

  const body: string[] = [rect(0, 0, style.width, style.height, { fill: style.background })];
  for (const band of opts.bands ?? []) {
    const top = yScale(band.hi);
    body.push(
      rect(fr.left, top, fr.right - fr.left, yScale(band.lo) - top, {
        fill: style.bandFill,
        "fill-opacity": String(style.bandOpacity),
      }),
    );
  }
  body.push(
    ...axisParts(
      fr,
      style,
      { at: xs, label: String, scale: xScale },
      { at: nice.ticks, label: (v) => tickLabel(v, yStep), scale: yScale },
      opts,
    ),
  );
  for (const s of series) {
    if (s.points.length > 1) {
      body.push(
        polyline(
          s.points.map((p) => [xScale(p.x), yScale(p.y)]),
          { stroke: s.color, "stroke-width": String(style.lineWidth) },
        ),
      );
    }
    for (const p of s.points) {
      const x = xScale(p.x);
      if (p.se > 0) {
        const cap = style.errorCapWidth / 2;
        const yTop = yScale(p.y + p.se);
        const yBot = yScale(p.y - p.se);
        body.push(line(x, yTop, x, yBot, { stroke: s.color, "stroke-width": "1" }));
        body.push(line(x - cap, yTop, x + cap, yTop, { stroke: s.color, "stroke-width": "1" }));
        body.push(line(x - cap, yBot, x + cap, yBot, { stroke: s.color, "stroke-width": "1" }));
      }
      body.push(circle(x, yScale(p.y), style.markerRadius, { fill: s.color }));
    }
  }
  body.push(...legendParts(fr, style, series, false, corner));
  return svgRoot(style.width, style.height, wrapFont(body, style));
}

function wrapFont(body: string[], style: Style): string[] {
  return [tag("g", { "font-family": style.fontFamily }, ...body)];
}

/** Advantage vs observed CRPs, one line per architecture, SE error bars. */
export function renderAdvantageCurves(rows: SweepRow[], opts: FigureOptions, style: Style): string {
  if (rows.length === 0) {
    throw new DataError("empty selection: no data rows");
  }
  const distinctN = new Set(rows.map((r) => r.N));
  if (distinctN.size < 2) {
    throw new DataError(`empty selection: need rows over at least 2 N values, got ${distinctN.size}`);
  }
  const series = sweepSeries(rows, (r) => r.N, style);
  return renderLineFigure(
    series,
    { xLabel: "observed CRPs (N)", yLabel: "advantage", ...opts, logX: false },
    style,
    "tl",
  );
}

/** Advantage vs stage count, one line per architecture, optional log x. */
export function renderStageSweep(rows: SweepRow[], opts: FigureOptions, style: Style): string {
  if (rows.length === 0) {
    throw new DataError("empty selection: no data rows");
  }
  const series = sweepSeries(rows, (r) => r.k, style);
  return renderLineFigure(series, { xLabel: "stages (k)", yLabel: "advantage", ...opts }, style, "tr");
}

/** Overlaid per-challenge bias histograms sharing one set of bin edges. */
export function renderBiasHistogram(series: HistSeries[], opts: FigureOptions, style: Style): string {
  if (series.length === 0) {
    throw new DataError("empty selection: no histogram series");
  }
  const fr = frameFor(style);
  let xLo = Infinity;
  let xHi = -Infinity;
  let countHi = 0;
  for (const s of series) {
    for (const b of s.bins) {
      xLo = Math.min(xLo, b.lo);
      xHi = Math.max(xHi, b.hi);
      countHi = Math.max(countHi, b.count);
    }
  }
  const xNice = niceTicks(xLo, xHi);
  const xStep = xNice.ticks.length > 1 ? xNice.ticks[1]! - xNice.ticks[0]! : 1;
  // bins set the x domain exactly; ticks may stick to round values inside it
  const xScale = linearScale([xLo, xHi], [fr.left, fr.right]);
  const xTicks = xNice.ticks.filter((v) => v >= xLo - 1e-12 && v <= xHi + 1e-12);
  const yNice = niceTicks(0, countHi);
  const yStep = yNice.ticks.length > 1 ? yNice.ticks[1]! - yNice.ticks[0]! : 1;
  const yScale = linearScale([0, yNice.hi], [fr.bottom, fr.top]);

  const body: string[] = [rect(0, 0, style.width, style.height, { fill: style.background })];
  for (const band of opts.bands ?? []) {
    const x0 = xScale(Math.max(band.lo, xLo));
    const x1 = xScale(Math.min(band.hi, xHi));
    if (x1 > x0) {
      body.push(
        rect(x0, fr.top, x1 - x0, fr.bottom - fr.top, {
          fill: style.bandFill,
          "fill-opacity": String(style.bandOpacity),
        }),
      );
    }
  }
  body.push(
    ...axisParts(
      fr,
      style,
      { at: xTicks, label: (v) => tickLabel(v, xStep), scale: xScale },
      { at: yNice.ticks, label: (v) => tickLabel(v, yStep), scale: yScale },
      { xLabel: "mean response", yLabel: "challenges per bin", ...opts },
    ),
  );
  const colored = series.map((s, i) => ({
    name: s.name,
    bins: s.bins,
    color: style.palette[i % style.palette.length]!,
  }));
  for (const s of colored) {
    for (const b of s.bins) {
      if (b.count === 0) continue;
      const x0 = xScale(b.lo);
      const y = yScale(b.count);
      body.push(
        rect(x0, y, xScale(b.hi) - x0, fr.bottom - y, {
          fill: s.color,
          "fill-opacity": String(style.histOpacity),
        }),
      );
    }
  }
  body.push(
    ...legendParts(
      fr,
      style,
      colored.map((s) => ({ label: s.name, color: s.color })),
      true,
      "tr",
    ),
  );
  return svgRoot(style.width, style.height, wrapFont(body, style));
}
