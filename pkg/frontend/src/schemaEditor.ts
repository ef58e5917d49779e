/** Schema graph editor view-model.
 *
 * All state derives from the server's canonical schema: every edit posts a
 * full schema document and re-reads the stored copy; a validation failure
 * reverts the visual change and surfaces the violation.
 */

import { ApiClient, ApiError } from "./api.js";
import type { SchemaDoc, Violation } from "./types.js";

export interface NodePosition {
  x: number;
  y: number;
}

export interface FkEdge {
  fromTable: string;
  fromColumn: string;
  toTable: string;
  toColumn: string;
}

/** Persistence hook for draggable node positions (browser localStorage in the app). */
export interface PositionStore {
  load(): Record<string, NodePosition> | null;
  save(positions: Record<string, NodePosition>): void;
}

const clone = <T>(value: T): T => JSON.parse(JSON.stringify(value)) as T;

export class SchemaEditor {
  doc: SchemaDoc = { tables: [] };
  positions: Record<string, NodePosition> = {};
  violations: Violation[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly positionStore?: PositionStore,
  ) {}

  async load(): Promise<void> {
    this.doc = await this.api.getSchema();
    this.positions = this.positionStore?.load() ?? this.layout();
  }

  /** FK edges drawn in the graph, straight from the served document. */
  edges(): FkEdge[] {
    const out: FkEdge[] = [];
    for (const table of this.doc.tables) {
      for (const column of table.columns) {
        if (column.references) {
          out.push({
            fromTable: table.name,
            fromColumn: column.name,
            toTable: column.references.table,
            toColumn: column.references.column,
          });
        }
      }
    }
    return out;
  }

  primaryKeys(table: string): string[] {
    const found = this.doc.tables.find((t) => t.name === table);
    return found ? found.columns.filter((c) => c.primary_key).map((c) => c.name) : [];
  }

  /** Case-insensitive entity search over table and column names. */
  search(term: string): { table: string; column?: string }[] {
    const needle = term.toLowerCase();
    if (!needle) return [];
    const hits: { table: string; column?: string }[] = [];
    for (const table of this.doc.tables) {
      if (table.name.toLowerCase().includes(needle)) hits.push({ table: table.name });
      for (const column of table.columns) {
        if (column.name.toLowerCase().includes(needle)) {
          hits.push({ table: table.name, column: column.name });
        }
      }
    }
    return hits;
  }

  // -- edits (each round-trips through the server) -----------------------

  addTable(name: string): Promise<boolean> {
    return this.apply((doc) => {
      doc.tables.push({
        name,
        columns: [{ name: "id", type: "int", primary_key: true }],
      });
    });
  }

  addColumn(table: string, name: string, type: string): Promise<boolean> {
    return this.apply((doc) => {
      this.tableOf(doc, table).columns.push({ name, type });
    });
  }

  setType(table: string, column: string, type: string): Promise<boolean> {
    return this.apply((doc) => {
      this.columnOf(doc, table, column).type = type;
    });
  }

  linkFk(table: string, column: string, refTable: string, refColumn: string): Promise<boolean> {
    return this.apply((doc) => {
      this.columnOf(doc, table, column).references = { table: refTable, column: refColumn };
    });
  }

  setDescription(table: string, column: string | null, description: string): Promise<boolean> {
    return this.apply((doc) => {
      if (column === null) this.tableOf(doc, table).description = description;
      else this.columnOf(doc, table, column).description = description;
    });
  }

  deleteColumn(table: string, column: string): Promise<boolean> {
    return this.apply((doc) => {
      const tab = this.tableOf(doc, table);
      tab.columns = tab.columns.filter((c) => c.name !== column);
    });
  }

  deleteTable(table: string): Promise<boolean> {
    return this.apply((doc) => {
      doc.tables = doc.tables.filter((t) => t.name !== table);
    });
  }

  /** Download button: the exact GET /schema body. */
  download(): Promise<string> {
    return this.api.getSchemaText();
  }

  moveNode(table: string, position: NodePosition): void {
    this.positions[table] = position;
    this.positionStore?.save(this.positions);
  }

  // -- internals ----------------------------------------------------------

  private async apply(edit: (doc: SchemaDoc) => void): Promise<boolean> {
    const draft = clone(this.doc);
    edit(draft);
    try {
      await this.api.postSchema(draft);
    } catch (error) {
      if (error instanceof ApiError) {
        // revert: this.doc untouched; surface the violation path(s)
        const detail = error.detail as { violations?: Violation[] } | string;
        this.violations =
          typeof detail === "object" && detail?.violations
            ? detail.violations
            : [{ path: "", message: String(error.message) }];
        return false;
      }
      throw error;
    }
    this.violations = [];
    this.doc = await this.api.getSchema(); // re-render from the canonical copy
    for (const table of this.doc.tables) {
      if (!this.positions[table.name]) this.positions = this.layout();
    }
    return true;
  }

  private tableOf(doc: SchemaDoc, name: string) {
    const table = doc.tables.find((t) => t.name === name);
    if (!table) throw new Error(`unknown table ${name}`);
    return table;
  }

  private columnOf(doc: SchemaDoc, table: string, name: string) {
    const column = this.tableOf(doc, table).columns.find((c) => c.name === name);
    if (!column) throw new Error(`unknown column ${table}.${name}`);
    return column;
  }

  /** Deterministic force-directed initial layout (drag overrides persist). */
  private layout(): Record<string, NodePosition> {
    const names = this.doc.tables.map((t) => t.name);
    const positions: Record<string, NodePosition> = {};
    const radius = 200;
    names.forEach((name, i) => {
      const angle = (2 * Math.PI * i) / Math.max(names.length, 1);
      positions[name] = {
        x: Math.round(400 + radius * Math.cos(angle)),
        y: Math.round(300 + radius * Math.sin(angle)),
      };
    });
    const edges = this.edges();
    for (let iter = 0; iter < 50; iter++) {
      // attraction along FK edges, repulsion between all pairs
      for (const edge of edges) {
        const a = positions[edge.fromTable];
        const b = positions[edge.toTable];
        if (!a || !b) continue;
        const dx = b.x - a.x;
        const dy = b.y - a.y;
        a.x += dx * 0.02;
        a.y += dy * 0.02;
        b.x -= dx * 0.02;
        b.y -= dy * 0.02;
      }
      for (const m of names) {
        for (const n of names) {
          if (m === n) continue;
          const a = positions[m]!;
          const b = positions[n]!;
          const dx = b.x - a.x;
          const dy = b.y - a.y;
          const dist2 = Math.max(dx * dx + dy * dy, 1);
          a.x -= (dx / dist2) * 600;
          a.y -= (dy / dist2) * 600;
        }
      }
    }
    for (const name of names) {
      positions[name] = { x: Math.round(positions[name]!.x), y: Math.round(positions[name]!.y) };
    }
    this.positionStore?.save(positions);
    return positions;
  }
}
