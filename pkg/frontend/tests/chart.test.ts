import { describe, expect, it } from "vitest";
import type { TrueHistory } from "../src/api.js";
import { renderChart, stepPoints } from "../src/chart.js";
import type { ChartSeries } from "../src/state.js";

function series(overrides: Partial<ChartSeries> = {}): ChartSeries {
  return {
    infected: [1, 4, 9],
    critical: [0, 2, 12],
    dead: [0, 0, 1],
    stage: [0, 2, 2],
    ghostReward: null,
    ...overrides,
  };
}

const OPTS = { horizonDays: 10, maxStage: 4, capacity: 10 };

describe("stepPoints", () => {
  it("emits a flat pair per day so stages render as steps", () => {
    const pts = stepPoints([1, 3], (d) => d * 10, (v) => v);
    expect(pts).toBe("0,1 10,1 10,3 20,3");
  });
});

describe("renderChart", () => {
  it("draws the three perceived series and the stage band", () => {
    const svg = renderChart(series(), OPTS);
    expect(svg.querySelector(".series-infected")).not.toBeNull();
    expect(svg.querySelector(".series-critical")).not.toBeNull();
    expect(svg.querySelector(".series-dead")).not.toBeNull();
    expect(svg.querySelector(".stage-band")).not.toBeNull();
  });

  it("always draws the capacity line", () => {
    const svg = renderChart(series(), OPTS);
    const cap = svg.querySelector(".capacity-line");
    expect(cap).not.toBeNull();
    expect(cap?.getAttribute("y1")).toBe(cap?.getAttribute("y2"));
  });

  it("marks exactly the days where critical exceeds capacity", () => {
    const svg = renderChart(series({ critical: [0, 11, 15, 9] }), OPTS);
    expect(svg.querySelectorAll(".breach-marker")).toHaveLength(2);
  });

  it("draws no true-state overlay without a terminal payload", () => {
    const svg = renderChart(series(), OPTS);
    expect(svg.querySelectorAll(".true-overlay")).toHaveLength(0);
  });

  it("draws the true-state overlay when a terminal history is provided", () => {
    const trueHistory: TrueHistory = {
      none: [990, 980, 970],
      infected: [10, 20, 30],
      critical: [0, 3, 14],
      dead: [0, 0, 2],
      recovered: [0, 0, 0],
      n_critical: [0, 3, 14],
    };
    const svg = renderChart(series(), { ...OPTS, trueHistory });
    expect(svg.querySelectorAll(".true-overlay")).toHaveLength(3);
    expect(svg.querySelector(".true-infected")).not.toBeNull();
  });

  it("renders an empty-but-valid chart before the first day event", () => {
    const svg = renderChart(series({ infected: [], critical: [], dead: [], stage: [] }), OPTS);
    expect(svg.tagName.toLowerCase()).toBe("svg");
    expect(svg.querySelector(".capacity-line")).not.toBeNull();
    expect(svg.querySelector(".series-infected")).toBeNull();
  });
});
