/** Query console wiring: scene picker, query box, result pane with bbox
 * overlay, refusal/error cards, heat-colored cloud viewer, history panel.
 * The UI performs no inference of its own — every displayed value comes
 * from the service response. */

import { ApiClient, ApiError, ConnectionError } from "./api.js";
import { SessionHistory } from "./history.js";
import { CloudViewer } from "./viewer.js";
import type { QueryResponse } from "./types.js";

export interface App {
  ready: Promise<void>;
  selectScene(imageId: string): void;
  submitQuery(text: string): Promise<void>;
  readonly history: SessionHistory;
  readonly lastResponse: QueryResponse | null;
}

export function summarize(doc: QueryResponse): string {
  if (doc.decision === "refuse") {
    return `refused (${doc.reason_code}): ${doc.message}`;
  }
  const n = doc.scores?.length ?? 0;
  return `proceed: ${doc.grounding?.label ?? "?"} / ${doc.affordance} over ${n} points`;
}

export function createApp(root: HTMLElement, api: ApiClient): App {
  root.innerHTML = `
    <div id="banner" class="banner" hidden></div>
    <div class="toolbar">
      <select id="scene-picker" aria-label="scene"></select>
      <input id="query-box" type="text" placeholder="Ask about the scene…" />
      <button id="submit" type="button">Ask</button>
    </div>
    <div class="panes">
      <div class="image-pane">
        <div id="image-wrap" class="image-wrap">
          <img id="scene-image" alt="" />
          <div id="bbox-overlay" class="bbox" hidden></div>
        </div>
        <div id="result-card" class="card" hidden></div>
      </div>
      <canvas id="cloud-canvas" width="480" height="400"></canvas>
      <ul id="history-panel" class="history"></ul>
    </div>
  `;

  const $ = <T extends HTMLElement>(id: string) =>
    root.querySelector<T>(`#${id}`) as T;
  const banner = $("banner");
  const picker = $<HTMLSelectElement>("scene-picker");
  const queryBox = $<HTMLInputElement>("query-box");
  const submitBtn = $<HTMLButtonElement>("submit");
  const sceneImage = $<HTMLImageElement>("scene-image");
  const bbox = $("bbox-overlay");
  const resultCard = $("result-card");
  const historyPanel = $<HTMLUListElement>("history-panel");
  const canvas = $<HTMLCanvasElement>("cloud-canvas");
  const viewer = new CloudViewer(canvas);
  const history = new SessionHistory();

  let currentImage = "";
  let pending = false;
  let lastResponse: QueryResponse | null = null;

  function showBanner(text: string | null): void {
    banner.hidden = text === null;
    banner.textContent = text ?? "";
  }

  function clearBbox(): void {
    bbox.hidden = true;
  }

  function showBbox(box: [number, number, number, number]): void {
    const [x0, y0, x1, y1] = box;
    bbox.style.left = `${x0 * 100}%`;
    bbox.style.top = `${y0 * 100}%`;
    bbox.style.width = `${(x1 - x0) * 100}%`;
    bbox.style.height = `${(y1 - y0) * 100}%`;
    bbox.hidden = false;
  }

  function showCard(kind: "proceed" | "refusal" | "error", html: string): void {
    resultCard.hidden = false;
    resultCard.className = `card ${kind}`;
    resultCard.innerHTML = html;
  }

  function esc(s: string): string {
    const d = root.ownerDocument.createElement("span");
    d.textContent = s;
    return d.innerHTML;
  }

  function renderHistory(): void {
    historyPanel.innerHTML = "";
    for (const entry of history.entries()) {
      const li = root.ownerDocument.createElement("li");
      const btn = root.ownerDocument.createElement("button");
      btn.type = "button";
      btn.className = "history-item";
      btn.textContent = entry.text;
      btn.title = entry.summary;
      btn.addEventListener("click", () => {
        queryBox.value = entry.text;
        void submitQuery(entry.text);
      });
      li.appendChild(btn);
      historyPanel.appendChild(li);
    }
  }

  function selectScene(imageId: string): void {
    currentImage = imageId;
    picker.value = imageId;
    sceneImage.src = api.imageUrl(imageId);
    clearBbox(); // new scene: stale grounding box goes away, history stays
    resultCard.hidden = true;
  }

  async function renderProceed(doc: QueryResponse): Promise<void> {
    if (doc.grounding) showBbox(doc.grounding.bbox);
    showCard(
      "proceed",
      `<strong>${esc(doc.grounding?.label ?? "")}</strong> — ` +
        `${esc(doc.affordance ?? "")} ` +
        `<span class="conf">confidence ${doc.grounding?.confidence.toFixed(2)}</span>`,
    );
    if (doc.cloud_id && doc.scores) {
      const cloud = await api.getCloud(doc.cloud_id);
      viewer.setCloud(cloud.points, doc.scores);
    }
  }

  async function submitQuery(text: string): Promise<void> {
    if (pending || !text.trim() || !currentImage) return;
    pending = true;
    submitBtn.disabled = true;
    try {
      const doc = await api.query(text, currentImage);
      lastResponse = doc;
      showBanner(null);
      if (doc.decision === "refuse") {
        clearBbox();
        showCard(
          "refusal",
          `<span class="reason">${esc(doc.reason_code ?? "")}</span>` +
            `<p>${esc(doc.message ?? "")}</p>`,
        );
      } else {
        await renderProceed(doc);
      }
      history.append(text, summarize(doc));
      renderHistory();
    } catch (e) {
      if (e instanceof ConnectionError) {
        showBanner("Connection to the service lost — retry when it is back.");
      } else if (e instanceof ApiError) {
        showCard("error", `<p>Request failed (${e.status}): ${esc(e.message)}</p>`);
      } else {
        console.error(e);
        showCard("error", `<p>Unexpected response from the service.</p>`);
      }
    } finally {
      pending = false;
      submitBtn.disabled = false;
    }
  }

  picker.addEventListener("change", () => selectScene(picker.value));
  submitBtn.addEventListener("click", () => void submitQuery(queryBox.value));
  queryBox.addEventListener("keydown", (e) => {
    if (e.key === "Enter") void submitQuery(queryBox.value);
  });

  const ready = (async () => {
    try {
      const images = await api.listImages();
      for (const img of images) {
        const opt = root.ownerDocument.createElement("option");
        opt.value = img.image_id;
        opt.textContent = `${img.image_id} (${img.scene_id}: ${img.labels.join(", ")})`;
        picker.appendChild(opt);
      }
      if (images.length > 0) selectScene(images[0].image_id);
    } catch (e) {
      showBanner(
        e instanceof ConnectionError
          ? "Connection to the service lost — retry when it is back."
          : `Failed to list scenes: ${String(e)}`,
      );
    }
  })();

  return {
    ready,
    selectScene,
    submitQuery,
    history,
    get lastResponse() {
      return lastResponse;
    },
  };
}
