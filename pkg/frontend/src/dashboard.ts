/** Diversity dashboard view-model: distribution charts over the dataset. */

import { ApiClient, ApiError } from "./api.js";
import type { DimensionReport, DistributionsReport } from "./types.js";

export type ChartType = "bar" | "pie" | "line";

export interface ChartData {
  dimension: string;
  type: ChartType;
  labels: string[];
  values: number[];
  simpson: number;
  mean: number | null;
}

export const DIMENSIONS = [
  "clause_count",
  "table_count",
  "column_count",
  "value_count",
  "keywords",
  "structures",
] as const;

export class Dashboard {
  report: DistributionsReport | null = null;
  /** true once a load came back 409 (empty dataset): show the empty state. */
  empty = false;
  chartTypes: Record<string, ChartType> = {};

  constructor(private readonly api: ApiClient) {}

  async load(): Promise<void> {
    try {
      this.report = await this.api.distributions();
      this.empty = false;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.report = null;
        this.empty = true;
        return;
      }
      throw error;
    }
  }

  /** Chart type is user-selectable per dimension; bar by default. */
  setChartType(dimension: string, type: ChartType): void {
    this.chartTypes[dimension] = type;
  }

  /** Drag-and-drop import: post the document, then refresh without reload. */
  async importDataset(document: string): Promise<number> {
    const { loaded } = await this.api.importDataset(document);
    await this.load();
    return loaded;
  }

  charts(): ChartData[] {
    if (!this.report) return [];
    const out: ChartData[] = [];
    for (const dimension of DIMENSIONS) {
      const section = this.report[dimension] as DimensionReport | undefined;
      if (!section) continue;
      const labels = Object.keys(section.histogram);
      out.push({
        dimension,
        type: this.chartTypes[dimension] ?? "bar",
        labels,
        values: labels.map((label) => section.histogram[label] ?? 0),
        simpson: section.simpson,
        mean: section.mean ?? null,
      });
    }
    return out;
  }

  /** Simpson gauges shown next to each chart. */
  simpsonGauges(): Record<string, number> {
    const gauges: Record<string, number> = {};
    for (const chart of this.charts()) gauges[chart.dimension] = chart.simpson;
    return gauges;
  }

  readabilityMean(): number | null {
    return this.report?.readability.mean ?? null;
  }
}
