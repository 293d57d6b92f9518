/** SVG chart rendering: perceived series, stage band, capacity line.
 *
 * Everything is plain SVG built through the DOM so the test runner can
 * inspect exactly what a browser would paint.  The stage band is a step
 * function across the top strip; the capacity line is horizontal with
 * breach days marked on the critical series.  True-state overlays are
 * drawn only when a terminal payload is passed in.
 */

import type { TrueHistory } from "./api.js";
import type { ChartSeries } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  width?: number;
  height?: number;
  horizonDays: number;
  maxStage: number;
  capacity: number;
  trueHistory?: TrueHistory | null;
}

const BAND_H = 40; // top strip reserved for the stage step function
const PAD = 28;

function el<K extends keyof SVGElementTagNameMap>(
  name: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

function polyline(points: string, cls: string, dashed = false): SVGPolylineElement {
  const node = el("polyline", { points, class: cls, fill: "none" });
  if (dashed) node.setAttribute("stroke-dasharray", "5,3");
  return node;
}

/** Step-function points for a per-day integer series (used for stages). */
export function stepPoints(
  values: number[],
  x: (day: number) => number,
  y: (v: number) => number,
): string {
  const pts: string[] = [];
  values.forEach((v, day) => {
    pts.push(`${x(day)},${y(v)}`);
    pts.push(`${x(day + 1)},${y(v)}`);
  });
  return pts.join(" ");
}

function linePoints(
  values: number[],
  x: (day: number) => number,
  y: (v: number) => number,
): string {
  return values.map((v, day) => `${x(day + 0.5)},${y(v)}`).join(" ");
}

export function renderChart(series: ChartSeries, opts: ChartOptions): SVGSVGElement {
  const width = opts.width ?? 640;
  const height = opts.height ?? 360;
  const svg = el("svg", {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    class: "session-chart",
    role: "img",
  });

  const plotTop = BAND_H + 8;
  const plotBottom = height - PAD;
  const x = (day: number) =>
    PAD + ((width - 2 * PAD) * day) / Math.max(opts.horizonDays, 1);
  const yMaxData = Math.max(
    opts.capacity * 2,
    ...series.infected,
    ...series.critical,
    ...series.dead,
    ...(opts.trueHistory ? opts.trueHistory.infected : []),
  );
  const y = (v: number) =>
    plotBottom - ((plotBottom - plotTop) * v) / Math.max(yMaxData, 1);
  const yStage = (s: number) => BAND_H - (BAND_H - 6) * (s / Math.max(opts.maxStage, 1));

  svg.appendChild(
    el("rect", { x: 0, y: 0, width, height, class: "chart-bg", fill: "none" }),
  );

  // stage band
  if (series.stage.length > 0) {
    svg.appendChild(
      polyline(stepPoints(series.stage, x, yStage), "stage-band"),
    );
  }

  // capacity line with label
  const capY = y(opts.capacity);
  const cap = el("line", {
    x1: x(0),
    y1: capY,
    x2: x(opts.horizonDays),
    y2: capY,
    class: "capacity-line",
  });
  cap.setAttribute("stroke-dasharray", "2,4");
  svg.appendChild(cap);

  // perceived series
  if (series.infected.length > 0) {
    svg.appendChild(polyline(linePoints(series.infected, x, y), "series-infected"));
    svg.appendChild(polyline(linePoints(series.critical, x, y), "series-critical"));
    svg.appendChild(polyline(linePoints(series.dead, x, y), "series-dead"));
  }

  // capacity breach markers on the critical series
  series.critical.forEach((v, day) => {
    if (v > opts.capacity) {
      svg.appendChild(
        el("circle", {
          cx: x(day + 0.5),
          cy: y(v),
          r: 3,
          class: "breach-marker",
        }),
      );
    }
  });

  // true-state overlay: only ever drawn from a terminal payload
  if (opts.trueHistory) {
    const t = opts.trueHistory;
    svg.appendChild(polyline(linePoints(t.infected, x, y), "true-overlay true-infected", true));
    svg.appendChild(polyline(linePoints(t.n_critical, x, y), "true-overlay true-critical", true));
    svg.appendChild(polyline(linePoints(t.dead, x, y), "true-overlay true-dead", true));
  }

  return svg;
}
