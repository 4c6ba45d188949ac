/** Studio state: per-attribute toggles and intensity sliders, the loaded
 * images, and the request/error status. Sliders live on a 0.01 grid. */

import type { SchemaInfo } from "./api.js";

export interface StudioState {
  baseUrl: string;
  schema: SchemaInfo | null;
  bits: number[];
  alphas: number[];
  sourceImage: string | null;
  resultImage: string | null;
  contentImage: string | null;
  resolvedLabel: number[] | null;
  resolvedAlpha: number[] | null;
  inFlight: boolean;
  error: string | null;
}

export function initialState(baseUrl = "http://127.0.0.1:8000"): StudioState {
  return {
    baseUrl,
    schema: null,
    bits: [],
    alphas: [],
    sourceImage: null,
    resultImage: null,
    contentImage: null,
    resolvedLabel: null,
    resolvedAlpha: null,
    inFlight: false,
    error: null,
  };
}

export function applySchema(state: StudioState, schema: SchemaInfo): StudioState {
  return {
    ...state,
    schema,
    bits: new Array(schema.n).fill(0),
    // sliders default to full intensity so a bare toggle reproduces a
    // plain translation
    alphas: new Array(schema.n).fill(1),
    error: null,
  };
}

export function clampAlpha(value: number): number {
  if (!Number.isFinite(value)) return 1;
  const bounded = Math.min(1, Math.max(0, value));
  return Math.round(bounded * 100) / 100;
}

export function setBit(state: StudioState, index: number, on: boolean): StudioState {
  const bits = state.bits.slice();
  bits[index] = on ? 1 : 0;
  if (on && state.schema) {
    for (const group of state.schema.exclusivity_groups) {
      if (group.includes(index)) {
        for (const other of group) if (other !== index) bits[other] = 0;
      }
    }
    if (state.schema.mode === "one_hot") {
      for (let i = 0; i < bits.length; i++) if (i !== index) bits[i] = 0;
    }
  }
  return { ...state, bits };
}

export function setAlpha(state: StudioState, index: number, value: number): StudioState {
  const alphas = state.alphas.slice();
  alphas[index] = clampAlpha(value);
  return { ...state, alphas };
}

export function labelIsZero(state: StudioState): boolean {
  return state.bits.every((b) => b === 0);
}

/** The Apply action is allowed only when a request would be accepted by the
 * server: schema and source loaded, and at least one attribute selected. */
export function canApply(state: StudioState): boolean {
  return state.schema !== null && state.sourceImage !== null && !labelIsZero(state);
}

export function blockedReason(state: StudioState): string | null {
  if (state.schema === null) return "schema not loaded";
  if (state.sourceImage === null) return "choose a source image first";
  if (labelIsZero(state)) {
    return "select at least one attribute: the translator needs a non-zero label";
  }
  return null;
}

export function requestMaps(state: StudioState): {
  set: Record<string, number>;
  alpha: Record<string, number>;
} {
  const schema = state.schema;
  if (!schema) throw new Error("schema not loaded");
  const set: Record<string, number> = {};
  const alpha: Record<string, number> = {};
  schema.names.forEach((name, i) => {
    set[name] = state.bits[i];
    alpha[name] = state.alphas[i];
  });
  return { set, alpha };
}

/** Controls round-trip through the URL fragment so an editing session can be
 * shared or restored. */
export function encodeFragment(state: StudioState): string {
  const params = new URLSearchParams();
  params.set("base", state.baseUrl);
  if (state.bits.length) params.set("bits", state.bits.join(","));
  if (state.alphas.length) params.set("alphas", state.alphas.join(","));
  return params.toString();
}

export function decodeFragment(fragment: string, state: StudioState): StudioState {
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  const next = { ...state };
  const base = params.get("base");
  if (base) next.baseUrl = base;
  const bits = params.get("bits");
  if (bits) {
    next.bits = bits.split(",").map((v) => (v === "1" ? 1 : 0));
  }
  const alphas = params.get("alphas");
  if (alphas) {
    next.alphas = alphas.split(",").map((v) => clampAlpha(Number(v)));
  }
  return next;
}
