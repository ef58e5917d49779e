/** DOM wiring: three panes (schema editor, workbench, dashboard) over the
 * view-models. The page is stateless beyond view state; reloading rebuilds
 * everything from the service. */

import { ApiClient, ApiError } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { SchemaEditor, type NodePosition } from "./schemaEditor.js";
import { Workbench } from "./workbench.js";

const api = new ApiClient(localStorage.getItem("sqlannotate.baseUrl") ?? "");
const editor = new SchemaEditor(api, {
  load: () => {
    const raw = localStorage.getItem("sqlannotate.positions");
    return raw ? (JSON.parse(raw) as Record<string, NodePosition>) : null;
  },
  save: (positions) => localStorage.setItem("sqlannotate.positions", JSON.stringify(positions)),
});
const workbench = new Workbench(api);
const dashboard = new Dashboard(api);

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Wrap highlight ranges of one color around a plain text. */
function markRanges(text: string, ranges: [number, number][], cls: string): string {
  const sorted = [...ranges].sort((a, b) => a[0] - b[0]);
  let cursor = 0;
  let html = "";
  for (const [start, end] of sorted) {
    if (start < cursor) continue;
    html += escapeHtml(text.slice(cursor, start));
    html += `<mark class="${cls}">${escapeHtml(text.slice(start, end))}</mark>`;
    cursor = end;
  }
  return html + escapeHtml(text.slice(cursor));
}

// -- schema editor -----------------------------------------------------------

function renderSchema(): void {
  const svgParts: string[] = [];
  for (const edge of editor.edges()) {
    const a = editor.positions[edge.fromTable];
    const b = editor.positions[edge.toTable];
    if (!a || !b) continue;
    svgParts.push(
      `<line x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}" class="fk-edge" marker-end="url(#arrow)"></line>`,
    );
  }
  $("schema-edges").innerHTML = svgParts.join("");
  const nodes = editor.doc.tables
    .map((table) => {
      const pos = editor.positions[table.name] ?? { x: 40, y: 40 };
      const rows = table.columns
        .map(
          (col) =>
            `<div class="column-row">${escapeHtml(col.name)}: ${escapeHtml(col.type)}` +
            (col.primary_key ? ` <span class="pk-badge">PK</span>` : "") +
            (col.references ? ` → ${escapeHtml(col.references.table)}` : "") +
            `</div>`,
        )
        .join("");
      return (
        `<div class="table-node" draggable="true" data-table="${escapeHtml(table.name)}" ` +
        `style="left:${pos.x}px;top:${pos.y}px">` +
        `<header>${escapeHtml(table.name)}</header>${rows}</div>`
      );
    })
    .join("");
  $("schema-nodes").innerHTML = nodes;
  $("schema-violations").textContent = editor.violations
    .map((v) => `${v.path}: ${v.message}`)
    .join("\n");
}

function wireSchemaPane(): void {
  $("btn-add-table").addEventListener("click", async () => {
    const name = (document.getElementById("input-table-name") as HTMLInputElement).value.trim();
    if (name) await editor.addTable(name);
    renderSchema();
  });
  $("btn-download-schema").addEventListener("click", async () => {
    const body = await editor.download();
    const url = URL.createObjectURL(new Blob([body], { type: "application/json" }));
    const link = document.createElement("a");
    link.href = url;
    link.download = "schema.json";
    link.click();
    URL.revokeObjectURL(url);
  });
  $("input-schema-search").addEventListener("input", (event) => {
    const term = (event.target as HTMLInputElement).value;
    $("schema-search-results").innerHTML = editor
      .search(term)
      .map((hit) => `<li>${escapeHtml(hit.table)}${hit.column ? "." + escapeHtml(hit.column) : ""}</li>`)
      .join("");
  });
  $("schema-nodes").addEventListener("dragend", (event) => {
    const node = (event.target as HTMLElement).closest("[data-table]");
    if (node instanceof HTMLElement && node.dataset.table) {
      editor.moveNode(node.dataset.table, {
        x: (event as DragEvent).pageX,
        y: (event as DragEvent).pageY,
      });
      renderSchema();
    }
  });
}

// -- workbench ----------------------------------------------------------------

function renderWorkbench(): void {
  const highlights = workbench.highlights();
  const yellowSql = highlights.filter((h) => h.color === "yellow" && h.sqlSpan).map((h) => h.sqlSpan!);
  const redSql = highlights.filter((h) => h.color === "red" && h.sqlSpan).map((h) => h.sqlSpan!);
  let sqlHtml = markRanges(workbench.sql, yellowSql, "hl-yellow");
  if (yellowSql.length === 0) sqlHtml = markRanges(workbench.sql, redSql, "hl-red");
  $("wb-sql").innerHTML = sqlHtml;

  const yellowQ = highlights.filter((h) => h.color === "yellow").flatMap((h) => h.questionRanges);
  const redQ = highlights.filter((h) => h.color === "red").flatMap((h) => h.questionRanges);
  $("wb-question-view").innerHTML =
    yellowQ.length > 0
      ? markRanges(workbench.question, yellowQ, "hl-yellow")
      : markRanges(workbench.question, redQ, "hl-red");

  $("wb-steps").innerHTML = workbench.steps
    .map((step) => {
      const missing = workbench.missingSteps().some((m) => m.index === step.index);
      return (
        `<li data-step="${step.index}" class="${missing ? "step-missing" : ""}" title="${escapeHtml(step.sub_question)}">` +
        `${step.index}. ${escapeHtml(step.text)}` +
        (missing ? ` <button class="btn-inject" data-step="${step.index}">INJECT</button>` : "") +
        `</li>`
      );
    })
    .join("");

  $("wb-result").textContent = workbench.result
    ? [workbench.result.columns.join(" | ")]
        .concat(workbench.result.rows.map((row) => row.join(" | ")))
        .join("\n")
    : "";
  $("wb-examples").innerHTML = workbench.examples
    .map((e) => `<li>${e.score.toFixed(2)} — ${escapeHtml(e.question)}</li>`)
    .join("");
  $("wb-score").textContent = workbench.score === null ? "" : `confidence ${workbench.score}`;
  $("wb-collected").innerHTML = workbench.collected
    .map((pair) => `<li>${escapeHtml(pair.question)}</li>`)
    .join("");
}

function wireWorkbenchPane(): void {
  const input = document.getElementById("wb-question") as HTMLTextAreaElement;
  const actions: [string, () => Promise<unknown>][] = [
    ["wb-btn-sample", () => workbench.sample()],
    ["wb-btn-execute", () => workbench.execute()],
    ["wb-btn-analyze", () => workbench.analyze()],
    ["wb-btn-translate", () => workbench.translate().then(() => (input.value = workbench.question))],
    ["wb-btn-align", () => workbench.checkAlignment()],
    ["wb-btn-remove", () => workbench.removeRedundant().then(() => (input.value = workbench.question))],
    ["wb-btn-score", () => workbench.postAnalysis()],
    ["wb-btn-accept", () => workbench.accept()],
    ["wb-btn-reject", () => workbench.reject()],
  ];
  for (const [id, action] of actions) {
    $(id).addEventListener("click", async () => {
      try {
        workbench.question = input.value;
        await action();
      } catch (error) {
        $("wb-error").textContent = error instanceof ApiError ? String(error.message) : String(error);
      }
      renderWorkbench();
    });
  }
  $("wb-steps").addEventListener("mouseover", (event) => {
    const item = (event.target as HTMLElement).closest("[data-step]");
    workbench.hover(item instanceof HTMLElement ? Number(item.dataset.step) : null);
    renderWorkbench();
  });
  $("wb-steps").addEventListener("mouseout", () => {
    workbench.hover(null);
    renderWorkbench();
  });
  $("wb-steps").addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest(".btn-inject");
    if (button instanceof HTMLElement && button.dataset.step) {
      await workbench.inject(Number(button.dataset.step));
      input.value = workbench.question;
      renderWorkbench();
    }
  });
}

// -- dashboard ------------------------------------------------------------------

function renderDashboard(): void {
  if (dashboard.empty) {
    $("dash-charts").innerHTML = `<p class="empty-state">No accepted pairs yet — annotate or import a dataset.</p>`;
    return;
  }
  $("dash-charts").innerHTML = dashboard
    .charts()
    .map((chart) => {
      const max = Math.max(...chart.values, 1);
      const bars = chart.labels
        .map(
          (label, i) =>
            `<div class="bar" style="height:${(100 * (chart.values[i] ?? 0)) / max}%" title="${escapeHtml(label)}: ${chart.values[i]}"></div>`,
        )
        .join("");
      return (
        `<figure class="chart chart-${chart.type}" data-dimension="${chart.dimension}">` +
        `<figcaption>${chart.dimension} — Simpson ${chart.simpson.toFixed(2)}` +
        (chart.mean !== null ? `, mean ${chart.mean.toFixed(2)}` : "") +
        `</figcaption><div class="bars">${bars}</div></figure>`
      );
    })
    .join("");
}

function wireDashboardPane(): void {
  $("dash-drop").addEventListener("drop", async (event) => {
    event.preventDefault();
    const file = (event as DragEvent).dataTransfer?.files?.[0];
    if (file) {
      await dashboard.importDataset(await file.text());
      renderDashboard();
    }
  });
  $("dash-drop").addEventListener("dragover", (event) => event.preventDefault());
  $("dash-refresh").addEventListener("click", async () => {
    await dashboard.load();
    renderDashboard();
  });
}

// -- boot -----------------------------------------------------------------------

async function boot(): Promise<void> {
  wireSchemaPane();
  wireWorkbenchPane();
  wireDashboardPane();
  try {
    await editor.load();
  } catch {
    /* no schema yet; the editor starts empty */
  }
  await dashboard.load();
  renderSchema();
  renderWorkbench();
  renderDashboard();
}

void boot();
