/** Annotation workbench view-model.
 *
 * Drives the service endpoints in the annotation order (sample, execute,
 * explain, translate, check alignment, inject / delete-selection, score,
 * accept/reject). Highlight ranges are taken verbatim from the last served
 * Explanation and AlignmentMap payloads; nothing is recomputed locally.
 */

import { ApiClient } from "./api.js";
import type {
  AlignResponse,
  ExecuteResponse,
  ExplanationStep,
  PairDoc,
  RetrievedExample,
} from "./types.js";

export interface Highlight {
  color: "yellow" | "red";
  /** byte range into the SQL text, from ExplanationStep.sql_span */
  sqlSpan?: [number, number];
  /** character ranges into the question, from the AlignmentMap */
  questionRanges: [number, number][];
  stepIndex?: number;
}

export class Workbench {
  sql = "";
  result: ExecuteResponse | null = null;
  steps: ExplanationStep[] = [];
  question = "";
  alignment: AlignResponse | null = null;
  examples: RetrievedExample[] = [];
  score: number | null = null;
  report = "";
  collected: PairDoc[] = [];
  hoveredStep: number | null = null;

  constructor(private readonly api: ApiClient) {}

  async sample(seed?: number): Promise<string> {
    const { sql } = await this.api.sampleSql(seed);
    this.setSql(sql);
    return sql;
  }

  setSql(sql: string): void {
    this.sql = sql;
    this.result = null;
    this.steps = [];
    this.alignment = null;
    this.score = null;
  }

  async execute(): Promise<ExecuteResponse> {
    this.result = await this.api.execute(this.sql);
    return this.result;
  }

  /** ANALYZE: the step-by-step explanation pane. */
  async analyze(): Promise<ExplanationStep[]> {
    const { steps } = await this.api.explain(this.sql);
    this.steps = steps;
    return steps;
  }

  /** TRANSLATE: retrieval-augmented question drafting. */
  async translate(): Promise<string> {
    const response = await this.api.translate(this.sql);
    this.question = response.question;
    this.steps = response.steps;
    this.examples = response.examples;
    this.alignment = null;
    return this.question;
  }

  /** CHECK ALIGNMENT: serves the map plus missing/redundant findings. */
  async checkAlignment(): Promise<AlignResponse> {
    this.alignment = await this.api.align(this.sql, this.question);
    return this.alignment;
  }

  /** INJECT for one missing step; the service returns the revised question. */
  async inject(stepIndex: number): Promise<string> {
    const revised = await this.api.inject(this.sql, this.question, stepIndex);
    this.question = revised.question;
    await this.checkAlignment();
    return this.question;
  }

  /** Delete-selection on the red (redundant) ranges via /remove-spans. */
  async removeRedundant(): Promise<string> {
    if (!this.alignment || this.alignment.redundant_spans.length === 0) {
      return this.question;
    }
    const ranges = this.alignment.redundant_spans.map((s) => s.range);
    const { question } = await this.api.removeSpans(this.question, ranges);
    this.question = question;
    await this.checkAlignment();
    return this.question;
  }

  /** POST-ANNOTATION ANALYSIS: multi-round equivalence confidence. */
  async postAnalysis(): Promise<number> {
    const { score, report } = await this.api.score(this.sql, this.question);
    this.score = score;
    this.report = report;
    return score;
  }

  async accept(): Promise<PairDoc> {
    const pair = this.currentPair();
    await this.api.acceptPair(pair, true);
    pair.status = "accepted";
    this.collected.push(pair); // right-hand collected panel
    return pair;
  }

  async reject(): Promise<void> {
    await this.api.rejectPair(this.currentPair());
  }

  hover(stepIndex: number | null): void {
    this.hoveredStep = stepIndex;
  }

  /** Sub-question tooltip for the hovered step. */
  tooltip(): string | null {
    if (this.hoveredStep === null) return null;
    const step = this.steps.find((s) => s.index === this.hoveredStep);
    return step ? step.sub_question : null;
  }

  /**
   * Current highlight set. Yellow: the hovered step's SQL span plus its
   * question ranges (triple linkage). Red: every missing step's SQL span and
   * every redundant question range. All ranges are copied verbatim from the
   * served payloads.
   */
  highlights(): Highlight[] {
    const out: Highlight[] = [];
    if (this.hoveredStep !== null) {
      const step = this.steps.find((s) => s.index === this.hoveredStep);
      if (step) {
        out.push({
          color: "yellow",
          stepIndex: step.index,
          sqlSpan: step.sql_span,
          questionRanges: this.alignment?.alignment.steps[String(step.index)] ?? [],
        });
      }
    }
    if (this.alignment) {
      for (const missing of this.alignment.missing_steps) {
        const step = this.steps.find((s) => s.index === missing.index);
        out.push({
          color: "red",
          stepIndex: missing.index,
          sqlSpan: step?.sql_span,
          questionRanges: [],
        });
      }
      for (const span of this.alignment.redundant_spans) {
        out.push({ color: "red", questionRanges: [span.range] });
      }
    }
    return out;
  }

  missingSteps(): { index: number; text: string }[] {
    return this.alignment?.missing_steps ?? [];
  }

  private currentPair(): PairDoc {
    if (!this.sql || !this.question) {
      throw new Error("a pair needs both SQL and a question");
    }
    return {
      id: cryptoRandomId(),
      sql: this.sql,
      question: this.question,
      created_at: new Date().toISOString().replace("Z", ""),
      status: "pending",
      confidence: this.score,
      alignment: this.alignment?.alignment ?? null,
      steps: this.steps,
      provenance: "manual",
    };
  }
}

function cryptoRandomId(): string {
  const bytes = new Uint8Array(16);
  (globalThis.crypto ?? { getRandomValues: fillRandom }).getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

function fillRandom(bytes: Uint8Array): Uint8Array {
  for (let i = 0; i < bytes.length; i++) bytes[i] = Math.floor(Math.random() * 256);
  return bytes;
}
