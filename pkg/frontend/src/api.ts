/** Typed client for the annotation-service HTTP API. */

import type {
  AlignResponse,
  DistributionsReport,
  ExecuteResponse,
  ExplanationStep,
  JobSnapshot,
  PairDoc,
  RetrievedExample,
  SchemaDoc,
  TranslateResponse,
  Violation,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }
}

/** Minimal fetch signature so tests can stub the transport. */
export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; text(): Promise<string> }>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, raw = false): Promise<T> {
    const init: { method: string; headers?: Record<string, string>; body?: string } = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = typeof body === "string" ? body : JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    if (response.status < 200 || response.status >= 300) {
      let detail: unknown = text;
      try {
        detail = (JSON.parse(text) as { detail?: unknown }).detail ?? text;
      } catch {
        /* non-JSON error body; keep the raw text */
      }
      throw new ApiError(response.status, detail);
    }
    return (raw ? text : JSON.parse(text)) as T;
  }

  getSchema(): Promise<SchemaDoc> {
    return this.request("GET", "/schema");
  }

  /** Exact response body, for the download button (byte-identical contract). */
  getSchemaText(): Promise<string> {
    return this.request("GET", "/schema", undefined, true);
  }

  postSchema(doc: SchemaDoc): Promise<{ ok: boolean }> {
    return this.request("POST", "/schema", doc);
  }

  validateSchema(doc: SchemaDoc): Promise<{ violations: Violation[] }> {
    return this.request("POST", "/schema/validate", doc);
  }

  populate(counts: Record<string, number>, seed = 0): Promise<{ tables: Record<string, number> }> {
    return this.request("POST", "/populate", { counts, seed });
  }

  records(table: string): Promise<{ table: string; rows: Record<string, unknown>[] }> {
    return this.request("GET", `/records?table=${encodeURIComponent(table)}`);
  }

  sampleSql(seed?: number): Promise<{ sql: string }> {
    return this.request("POST", "/sample-sql", seed === undefined ? {} : { seed });
  }

  execute(sql: string): Promise<ExecuteResponse> {
    return this.request("POST", "/execute", { sql });
  }

  explain(sql: string): Promise<{ steps: ExplanationStep[] }> {
    return this.request("POST", "/explain", { sql });
  }

  similar(sql: string): Promise<{ examples: RetrievedExample[] }> {
    return this.request("GET", `/similar?sql=${encodeURIComponent(sql)}`);
  }

  translate(sql: string): Promise<TranslateResponse> {
    return this.request("POST", "/translate", { sql });
  }

  align(sql: string, question: string): Promise<AlignResponse> {
    return this.request("POST", "/align", { sql, question });
  }

  inject(sql: string, question: string, stepIndex: number): Promise<{ question: string; alignment: AlignResponse["alignment"] }> {
    return this.request("POST", "/inject", { sql, question, step_index: stepIndex });
  }

  removeSpans(question: string, ranges: [number, number][]): Promise<{ question: string }> {
    return this.request("POST", "/remove-spans", { question, ranges });
  }

  score(sql: string, question: string): Promise<{ score: number; report: string }> {
    return this.request("POST", "/score", { sql, question });
  }

  acceptPair(pair: PairDoc, override = false): Promise<{ id: string }> {
    return this.request("POST", "/dataset/accept", { ...pair, override });
  }

  rejectPair(pair: PairDoc): Promise<{ id: string }> {
    return this.request("POST", "/dataset/reject", pair);
  }

  exportDataset(status?: string): Promise<string> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request("GET", `/dataset/export${query}`, undefined, true);
  }

  importDataset(document: string): Promise<{ loaded: number; errors: { row: number; error: string }[] }> {
    return this.request("POST", "/dataset/import", document);
  }

  distributions(): Promise<DistributionsReport> {
    return this.request("GET", "/analysis/distributions");
  }

  startAutoAnnotate(count: number, threshold?: number): Promise<JobSnapshot> {
    return this.request("POST", "/auto-annotate", threshold === undefined ? { count } : { count, threshold });
  }

  autoAnnotateStatus(): Promise<JobSnapshot> {
    return this.request("GET", "/auto-annotate/status");
  }
}
