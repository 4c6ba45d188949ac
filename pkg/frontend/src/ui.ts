/** DOM wiring: attribute rows with toggles and intensity sliders, live
 * preview through the debounced translate call, a content panel for gated
 * models, an inspector, and the contact-sheet export. */

import { ApiError, Client } from "./api.js";
import { Debouncer } from "./debounce.js";
import { composeSheet, DEFAULT_STEPS, fetchGrid } from "./grid.js";
import {
  applySchema,
  blockedReason,
  canApply,
  decodeFragment,
  encodeFragment,
  initialState,
  requestMaps,
  setAlpha,
  setBit,
  StudioState,
} from "./state.js";

export interface StudioHandles {
  state: () => StudioState;
  loadSchema: () => Promise<void>;
  apply: () => void;
  applyNow: () => Promise<void>;
  setSource: (b64: string) => void;
  exportGrid: (steps?: number[]) => Promise<void>;
  debouncer: Debouncer<StudioState>;
  root: HTMLElement;
}

export const DEBOUNCE_MS = 150;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function buildStudio(root: HTMLElement, client?: Client): StudioHandles {
  let state = initialState();
  if (typeof window !== "undefined" && window.location?.hash) {
    state = decodeFragment(window.location.hash, state);
  }
  let api = client ?? new Client(state.baseUrl);

  root.innerHTML = "";
  const banner = el("div", { id: "banner", class: "banner", hidden: "hidden" });
  const baseInput = el("input", { id: "base-url", value: state.baseUrl });
  const loadBtn = el("button", { id: "load-schema" }, "Connect");
  const fileInput = el("input", { id: "file", type: "file", accept: "image/png" });
  const rows = el("div", { id: "attribute-rows" });
  const applyBtn = el("button", { id: "apply", disabled: "disabled" }, "Apply");
  const applyNote = el("span", { id: "apply-note" });
  const sourceImg = el("img", { id: "source-image", alt: "source" });
  const resultImg = el("img", { id: "result-image", alt: "result" });
  const contentPanel = el("div", { id: "content-panel", hidden: "hidden" });
  const contentImg = el("img", { id: "content-image", alt: "content" });
  contentPanel.append(el("h3", {}, "Content"), contentImg);
  const inspector = el("pre", { id: "inspector" });
  const stepsInput = el("input", { id: "grid-steps", value: DEFAULT_STEPS.join(",") });
  const exportBtn = el("button", { id: "export-grid" }, "Export grid");
  const gridOut = el("div", { id: "grid-cells" });

  root.append(
    banner, baseInput, loadBtn, fileInput,
    el("h3", {}, "Attributes"), rows, applyBtn, applyNote,
    el("h3", {}, "Source"), sourceImg,
    el("h3", {}, "Result"), resultImg,
    contentPanel, inspector, stepsInput, exportBtn, gridOut,
  );

  function showError(message: string | null): void {
    state = { ...state, error: message };
    if (message === null) {
      banner.hidden = true;
      banner.textContent = "";
    } else {
      banner.hidden = false;
      banner.textContent = message;
    }
  }

  function syncFragment(): void {
    if (typeof window !== "undefined" && window.history?.replaceState) {
      window.history.replaceState(null, "", `#${encodeFragment(state)}`);
    }
  }

  function updateControls(): void {
    const allowed = canApply(state);
    if (allowed) {
      applyBtn.removeAttribute("disabled");
      applyNote.textContent = "";
    } else {
      applyBtn.setAttribute("disabled", "disabled");
      applyNote.textContent = blockedReason(state) ?? "";
    }
    syncFragment();
  }

  const debouncer = new Debouncer<StudioState>(DEBOUNCE_MS, async (snapshot, token) => {
    await runTranslate(snapshot, token);
  });

  async function runTranslate(snapshot: StudioState, token: number): Promise<void> {
    if (!canApply(snapshot) || !snapshot.schema || !snapshot.sourceImage) return;
    const { set, alpha } = requestMaps(snapshot);
    state = { ...state, inFlight: true };
    try {
      const res = await api.translate({ image: snapshot.sourceImage, set, alpha });
      if (!debouncer.isCurrent(token)) return; // a newer request superseded us
      state = {
        ...state,
        inFlight: false,
        resultImage: res.image,
        resolvedLabel: res.resolved_label,
        resolvedAlpha: res.resolved_alpha,
      };
      resultImg.src = `data:image/png;base64,${res.image}`;
      inspector.textContent = JSON.stringify({
        resolved_label: res.resolved_label,
        resolved_alpha: res.resolved_alpha,
        latency_ms: Math.round(res.latency_ms * 100) / 100,
      }, null, 1);
      showError(null);
    } catch (err) {
      state = { ...state, inFlight: false };
      showError(err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err));
    }
  }

  function renderRows(): void {
    rows.innerHTML = "";
    const schema = state.schema;
    if (!schema) return;
    schema.names.forEach((name, i) => {
      const row = el("div", { class: "attribute-row", id: `row-${name}` });
      const toggle = el("input", { type: "checkbox", id: `bit-${name}` });
      (toggle as HTMLInputElement).checked = state.bits[i] === 1;
      toggle.addEventListener("change", () => {
        state = setBit(state, i, (toggle as HTMLInputElement).checked);
        renderRows();
        updateControls();
        if (canApply(state)) debouncer.submit(state);
      });
      const slider = el("input", {
        type: "range", min: "0", max: "1", step: "0.01",
        id: `alpha-${name}`, value: String(state.alphas[i] ?? 1),
      });
      const readout = el("span", { id: `alpha-value-${name}` },
        String(state.alphas[i] ?? 1));
      slider.addEventListener("input", () => {
        state = setAlpha(state, i, Number((slider as HTMLInputElement).value));
        readout.textContent = String(state.alphas[i]);
        updateControls();
        if (canApply(state)) debouncer.submit(state);
      });
      row.append(el("label", { for: `bit-${name}` }, name), toggle, slider, readout);
      rows.append(row);
    });
  }

  async function refreshContent(): Promise<void> {
    if (!state.schema?.gate_enabled || !state.sourceImage) return;
    try {
      const res = await api.content(state.sourceImage);
      state = { ...state, contentImage: res.image };
      contentImg.src = `data:image/png;base64,${res.image}`;
    } catch (err) {
      showError(err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err));
    }
  }

  async function loadSchema(): Promise<void> {
    state = { ...state, baseUrl: (baseInput as HTMLInputElement).value };
    api = client ?? new Client(state.baseUrl);
    try {
      const schema = await api.schema();
      const restoredBits = state.bits;
      const restoredAlphas = state.alphas;
      state = applySchema(state, schema);
      if (restoredBits.length === schema.n) state = { ...state, bits: restoredBits };
      if (restoredAlphas.length === schema.n) {
        state = { ...state, alphas: restoredAlphas };
      }
      contentPanel.hidden = !schema.gate_enabled;
      renderRows();
      updateControls();
      showError(null);
    } catch (err) {
      showError(err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err));
      rows.innerHTML = "";
      applyBtn.setAttribute("disabled", "disabled");
    }
  }

  function setSource(b64: string): void {
    state = { ...state, sourceImage: b64 };
    sourceImg.src = `data:image/png;base64,${b64}`;
    updateControls();
    void refreshContent();
  }

  fileInput.addEventListener("change", () => {
    const file = (fileInput as HTMLInputElement).files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => {
      const url = String(reader.result);
      setSource(url.slice(url.indexOf(",") + 1));
    };
    reader.readAsDataURL(file);
  });
  loadBtn.addEventListener("click", () => void loadSchema());
  applyBtn.addEventListener("click", () => {
    if (canApply(state)) debouncer.flush(state);
  });

  async function exportGrid(steps?: number[]): Promise<void> {
    const parsed = steps ?? (stepsInput as HTMLInputElement).value
      .split(",").map((v) => Number(v.trim())).filter((v) => Number.isFinite(v));
    try {
      const cells = await fetchGrid(api, state, parsed);
      gridOut.innerHTML = "";
      for (const cell of cells) {
        const img = el("img", { class: "grid-cell", alt: cell.kind });
        if (cell.image) img.src = `data:image/png;base64,${cell.image}`;
        img.dataset.kind = cell.kind;
        if (cell.alpha !== undefined) img.dataset.alpha = String(cell.alpha);
        gridOut.append(img);
      }
      if (typeof document.createElement("canvas").getContext === "function") {
        try {
          const sheet = await composeSheet(cells, state.schema?.image_size ?? 32);
          const link = el("a", {
            download: "intensity-grid.png", href: sheet.toDataURL("image/png"),
          });
          link.click();
        } catch {
          // canvas rasterization is best-effort; the cells stay visible
        }
      }
      showError(null);
    } catch (err) {
      showError(err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err));
    }
  }
  exportBtn.addEventListener("click", () => void exportGrid());

  return {
    state: () => state,
    loadSchema,
    apply: () => {
      if (canApply(state)) debouncer.submit(state);
    },
    applyNow: async () => {
      if (canApply(state)) debouncer.flush(state);
      await new Promise((resolve) => setTimeout(resolve, 0));
    },
    setSource,
    exportGrid,
    debouncer,
    root,
  };
}
