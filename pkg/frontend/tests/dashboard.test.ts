import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { DistributionsReport } from "../src/types.js";
import { Dashboard, DIMENSIONS } from "../src/dashboard.js";
import { FakeServer } from "./fakeServer.js";

/** Report for a dataset where every pair is the same query: zero diversity. */
function uniformReport(): DistributionsReport {
  const flat = { histogram: { "3": 20 }, simpson: 0.0, mean: 3.0 };
  return {
    clause_count: { ...flat },
    table_count: { histogram: { "1": 20 }, simpson: 0.0, mean: 1.0 },
    column_count: { histogram: { "1": 20 }, simpson: 0.0, mean: 1.0 },
    value_count: { histogram: { "2": 20 }, simpson: 0.0, mean: 2.0 },
    keywords: { histogram: { "SELECT|WHERE": 20 }, simpson: 0.0 },
    structures: { histogram: { "Query(Select,From,Where)": 20 }, simpson: 0.0 },
    readability: { scores: Array(20).fill(75.5), mean: 75.5 },
  };
}

function makeDashboard() {
  const server = new FakeServer();
  const dashboard = new Dashboard(new ApiClient("http://test", server.fetch));
  return { dashboard, server };
}

describe("dashboard", () => {
  it("renders one chart per dimension straight from the served report", async () => {
    const { dashboard, server } = makeDashboard();
    server.on("GET", "/analysis/distributions", uniformReport());
    await dashboard.load();
    const charts = dashboard.charts();
    expect(charts.map((c) => c.dimension)).toEqual([...DIMENSIONS]);
    const clause = charts[0]!;
    expect(clause.labels).toEqual(["3"]);
    expect(clause.values).toEqual([20]);
    expect(clause.type).toBe("bar");
    expect(dashboard.readabilityMean()).toBe(75.5);
  });

  it("shows zero on every Simpson gauge for an all-identical dataset", async () => {
    const { dashboard, server } = makeDashboard();
    server.on("GET", "/analysis/distributions", uniformReport());
    await dashboard.load();
    const gauges = dashboard.simpsonGauges();
    expect(Object.keys(gauges)).toHaveLength(DIMENSIONS.length);
    for (const value of Object.values(gauges)) expect(value).toBe(0.0);
  });

  it("treats a 409 as the empty state, not an error", async () => {
    const { dashboard, server } = makeDashboard();
    server.on("GET", "/analysis/distributions", () => ({
      status: 409,
      json: { detail: "no accepted pairs yet" },
    }));
    await dashboard.load();
    expect(dashboard.empty).toBe(true);
    expect(dashboard.charts()).toEqual([]);
  });

  it("remembers the user's chart-type choice per dimension", async () => {
    const { dashboard, server } = makeDashboard();
    server.on("GET", "/analysis/distributions", uniformReport());
    await dashboard.load();
    dashboard.setChartType("keywords", "pie");
    const byName = Object.fromEntries(dashboard.charts().map((c) => [c.dimension, c.type]));
    expect(byName["keywords"]).toBe("pie");
    expect(byName["clause_count"]).toBe("bar");
  });

  it("drag-and-drop import posts the document and refreshes the charts", async () => {
    const { dashboard, server } = makeDashboard();
    server.on("GET", "/analysis/distributions", () => ({
      status: 409,
      json: { detail: "empty" },
    }));
    await dashboard.load();
    expect(dashboard.empty).toBe(true);
    server.on("POST", "/dataset/import", { loaded: 20, errors: [] });
    server.on("GET", "/analysis/distributions", uniformReport());
    const loaded = await dashboard.importDataset('{"pairs": []}');
    expect(loaded).toBe(20);
    expect(dashboard.empty).toBe(false);
    expect(dashboard.charts()).not.toEqual([]);
    const post = server.calls.find((c) => c.path === "/dataset/import");
    expect(post?.method).toBe("POST");
  });
});
