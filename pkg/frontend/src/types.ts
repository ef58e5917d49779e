/** Payload shapes served by the annotation service. */

export interface ColumnDoc {
  name: string;
  type: string;
  primary_key?: boolean;
  references?: { table: string; column: string };
  enum_values?: string[];
  description?: string;
}

export interface TableDoc {
  name: string;
  description?: string;
  columns: ColumnDoc[];
}

export interface SchemaDoc {
  tables: TableDoc[];
  version?: string;
}

export interface Violation {
  path: string;
  message: string;
}

export interface ExplanationStep {
  index: number;
  kind: string;
  text: string;
  sub_question: string;
  sql_span: [number, number];
  ast_path: string;
  entities: [string, number, number][];
}

/** Serialized AlignmentMap: step index -> question character ranges. */
export interface AlignmentDoc {
  steps: Record<string, [number, number][]>;
  missing: number[];
  redundant: [number, number][];
}

export interface AlignResponse {
  alignment: AlignmentDoc;
  missing_steps: { index: number; text: string }[];
  redundant_spans: { range: [number, number]; text: string }[];
}

export interface ExecuteResponse {
  columns: string[];
  rows: unknown[][];
}

export interface RetrievedExample {
  sql: string;
  question: string;
  score: number;
}

export interface TranslateResponse {
  question: string;
  steps: ExplanationStep[];
  examples: RetrievedExample[];
}

export interface PairDoc {
  id: string;
  sql: string;
  question: string;
  created_at: string;
  status: string;
  confidence?: number | null;
  [key: string]: unknown;
}

export interface DimensionReport {
  histogram: Record<string, number>;
  simpson: number;
  mean?: number;
}

export interface DistributionsReport {
  clause_count: DimensionReport;
  table_count: DimensionReport;
  column_count: DimensionReport;
  value_count: DimensionReport;
  keywords: DimensionReport;
  structures: DimensionReport;
  readability: { scores: number[]; mean: number | null };
  [key: string]: unknown;
}

export interface JobSnapshot {
  state: string;
  requested?: number;
  produced?: number;
  attempts?: number;
  failures?: [string, string][];
}
