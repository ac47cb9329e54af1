/** Browser entry point: two-pane table, status badges, diff highlights, metrics. */

import { ApiClient, type MetricsResponse } from "./api.js";
import { SessionController } from "./controller.js";
import { isLocked, markDirty, type SessionView, type ViewRow } from "./sessionView.js";

const client = new ApiClient("");
const controller = new SessionController(client);

let view: SessionView | null = null;
let references: string[] | null = null;
let busy = false;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function badge(status: string): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = `badge badge-${status}`;
  span.textContent = status;
  return span;
}

function renderOutput(row: ViewRow): HTMLElement {
  const cell = document.createElement("div");
  cell.className = "output";
  if (row.diff) {
    for (const segment of row.diff) {
      if (segment.kind === "del") continue; // show the new text, color insertions
      const span = document.createElement("span");
      span.textContent = segment.text;
      if (segment.kind === "ins") span.className = "ins";
      cell.appendChild(span);
    }
  } else {
    cell.textContent = row.output;
  }
  return cell;
}

function renderError(message: string): void {
  const banner = $("error");
  banner.textContent = message;
  banner.style.display = message ? "block" : "none";
}

function renderTable(): void {
  if (!view) return;
  $("revision").textContent = `revision ${view.revision}`;
  const body = $("rows");
  body.replaceChildren();
  for (const row of view.rows) {
    const tr = document.createElement("tr");
    if (view.changed.includes(row.index)) tr.classList.add("changed");

    const idx = document.createElement("td");
    idx.textContent = String(row.index);
    tr.appendChild(idx);

    const src = document.createElement("td");
    src.textContent = row.src;
    tr.appendChild(src);

    const out = document.createElement("td");
    out.appendChild(renderOutput(row));
    const editor = document.createElement("input");
    editor.value = row.output;
    editor.disabled = busy || row.status === "regenerating";
    if (isLocked(row)) {
      editor.classList.add("locked");
      editor.title = "human-corrected; edit again to unlock";
    }
    editor.addEventListener("focus", () => {
      if (view) view = markDirty(view, row.index);
    });
    editor.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void submit(row.index, editor.value);
    });
    out.appendChild(editor);
    tr.appendChild(out);

    const status = document.createElement("td");
    status.appendChild(badge(row.status));
    tr.appendChild(status);

    body.appendChild(tr);
  }
}

function renderMetrics(metrics: MetricsResponse | null): void {
  const panel = $("metrics");
  if (!metrics) {
    panel.textContent = "paste references and press Score";
    return;
  }
  const { report, edit_effort } = metrics;
  const tags = Object.entries(report.tags)
    .map(([name, prf]) => `${name} F1 ${prf.f1.toFixed(2)}`)
    .join("  ");
  panel.textContent =
    `BLEU ${report.bleu.toFixed(2)}  ChrF2 ${report.chrf2.toFixed(2)}  ${tags}` +
    `  remaining edit effort ${edit_effort.total}`;
}

async function refreshMetrics(): Promise<void> {
  if (!view || !references) return;
  try {
    renderMetrics(await controller.metrics(view, references));
  } catch (error) {
    renderError(error instanceof Error ? error.message : String(error));
  }
}

async function submit(index: number, text: string): Promise<void> {
  if (!view || busy) return;
  busy = true;
  renderError("");
  try {
    const outcome = await controller.submitEdit(view, index, text);
    view = outcome.view;
    if (outcome.conflict) {
      renderError("edit rejected; the session was refreshed — please re-apply");
    }
    renderTable();
    await refreshMetrics();
  } catch (error) {
    renderError(error instanceof Error ? error.message : String(error));
  } finally {
    busy = false;
    renderTable();
  }
}

async function open(sessionId: string): Promise<void> {
  renderError("");
  try {
    view = await controller.openSession(sessionId);
    $("session-title").textContent = sessionId;
    renderTable();
  } catch (error) {
    renderError(error instanceof Error ? error.message : String(error));
  }
}

async function loadSessionList(): Promise<void> {
  const select = $("session-select") as HTMLSelectElement;
  const sessions = await client.listSessions();
  select.replaceChildren();
  for (const session of sessions) {
    const option = document.createElement("option");
    option.value = session.session_id;
    option.textContent = `${session.doc_id} (${session.session_id}, n=${session.n})`;
    select.appendChild(option);
  }
}

export function wire(): void {
  $("open").addEventListener("click", () => {
    const select = $("session-select") as HTMLSelectElement;
    if (select.value) void open(select.value);
  });
  $("reload").addEventListener("click", () => void loadSessionList());
  $("score").addEventListener("click", () => {
    const box = $("references") as HTMLTextAreaElement;
    const lines = box.value.split("\n").filter((line) => line.trim().length > 0);
    if (view && lines.length !== view.rows.length) {
      renderError(`need ${view.rows.length} references, got ${lines.length}`);
      return;
    }
    references = lines;
    void refreshMetrics();
  });
  void loadSessionList();
  renderMetrics(null);
}

if (typeof document !== "undefined" && document.getElementById("rows")) {
  wire();
}
