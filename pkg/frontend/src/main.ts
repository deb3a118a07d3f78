// Wiring: sidebar of lines, zoomable line canvas, class board, action bar.

import { ApiError, ReviewApi } from "./api";
import { ClassBoard } from "./classboard";
import { LineView } from "./lineview";
import { columnAt } from "./overlay";
import { SessionStore, mergePreview } from "./state";

const api = new ReviewApi("");
const store = new SessionStore(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const lineList = el<HTMLUListElement>("line-list");
const canvas = el<HTMLCanvasElement>("line-canvas");
const statusBar = el<HTMLDivElement>("status");
const saveButton = el<HTMLButtonElement>("save-corrections");
const rebuildButton = el<HTMLButtonElement>("rebuild");
const mergeButton = el<HTMLButtonElement>("merge-classes");
const mirrorButton = el<HTMLButtonElement>("mirror-classes");
const zoomIn = el<HTMLButtonElement>("zoom-in");
const zoomOut = el<HTMLButtonElement>("zoom-out");
const boardContainer = el<HTMLDivElement>("class-board");

const view = new LineView(canvas);
const board = new ClassBoard(boardContainer);

function note(text: string, isError = false): void {
  statusBar.textContent = text;
  statusBar.className = isError ? "error" : "";
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    const out = await work();
    return out;
  } catch (err) {
    if (err instanceof ApiError) note(`${err.reason}: ${err.message}`, true);
    else note(String(err), true);
    return undefined;
  }
}

function renderLineList(): void {
  lineList.textContent = "";
  for (const line of store.lines) {
    const item = document.createElement("li");
    item.textContent = `${line.line_id} (${line.occurrence_count} tokens${line.has_corrections ? ", edited" : ""})`;
    if (store.current && store.current.line_id === line.line_id) item.className = "active";
    item.addEventListener("click", () => void openLine(line.line_id));
    lineList.appendChild(item);
  }
}

function renderLine(): void {
  if (!store.current || !store.working) return;
  view.render(store.current, store.working, store.current.corrections);
  saveButton.disabled = !store.dirty;
}

function renderBoard(): void {
  if (store.inventory) board.render(store.inventory, store.selectedClasses);
  mergeButton.disabled = store.selectedClasses.length !== 2;
  mirrorButton.disabled = store.selectedClasses.length !== 2;
}

async function openLine(lineId: string): Promise<void> {
  await guard(async () => {
    const detail = await store.openLine(lineId);
    await view.setLine(detail);
    renderLineList();
    renderLine();
    note(`${lineId}: ${detail.occurrences.length} tokens`);
  });
}

canvas.addEventListener("click", (event) => {
  const rect = canvas.getBoundingClientRect();
  const col = columnAt(event.clientX - rect.left, view.zoom);
  const toggled = store.toggleCutAt(col);
  if (!toggled) return;
  if (toggled.kind === "forced") note(`${toggled.added ? "forced cut at" : "removed cut at"} column ${toggled.col} (unsaved)`);
  else note(`${toggled.added ? "forbid" : "allow"} cut after token ${toggled.leftIndex} (unsaved)`);
  renderLine();
});

saveButton.addEventListener("click", () => {
  void guard(async () => {
    const count = await store.saveCorrections();
    renderLineList();
    renderLine();
    note(`saved; line now has ${count} tokens`);
  });
});

rebuildButton.addEventListener("click", () => {
  void guard(async () => {
    const result = await store.rebuild();
    const changes = result.lines
      .filter((l) => l.old_count !== l.new_count)
      .map((l) => `${l.line_id}: ${l.old_count} -> ${l.new_count}`);
    renderLineList();
    renderBoard();
    if (store.current) {
      await view.setLine(store.current);
      renderLine();
    }
    note(changes.length ? `rebuilt; ${changes.join(", ")}` : `rebuilt; token counts unchanged (${result.class_count} classes)`);
  });
});

board.onSelect = (classId) => {
  store.toggleClassSelection(classId);
  renderBoard();
};

mergeButton.addEventListener("click", () => {
  void guard(async () => {
    if (!store.inventory || store.selectedClasses.length !== 2) return;
    const [a, b] = [...store.selectedClasses].sort((x, y) => x - y);
    const preview = mergePreview(store.inventory, a, b);
    const summary = preview
      .slice(0, 8)
      .map((d) => `${d.line_id}:\n  ${d.before}\n  ${d.after}`)
      .join("\n");
    if (!window.confirm(`Merge <token_${a}> and <token_${b}>?\n\nPlaceholder changes:\n${summary}`)) return;
    const classCount = await store.mergeSelected();
    renderBoard();
    renderLine();
    note(`merged; ${classCount} classes remain`);
  });
});

mirrorButton.addEventListener("click", () => {
  void guard(async () => {
    await store.mirrorSelected(true);
    renderBoard();
    note("mirror pairing saved");
  });
});

zoomIn.addEventListener("click", () => {
  view.setZoom(view.zoom + 1);
  renderLine();
});

zoomOut.addEventListener("click", () => {
  view.setZoom(view.zoom - 1);
  renderLine();
});

void guard(async () => {
  await store.load();
  renderLineList();
  renderBoard();
  if (store.lines.length > 0) await openLine(store.lines[0].line_id);
});
