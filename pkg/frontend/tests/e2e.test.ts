/** End-to-end acceptance against a live translation service.
 *
 * Builds a tiny dataset and checkpoint through the Python CLI, serves it,
 * and drives the real UI in jsdom: zero-intensity preview versus the content
 * endpoint, debounce behaviour under scripted dragging, the zero-label
 * guard, and the grid export layout.
 */

// @vitest-environment jsdom

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import { DEBOUNCE_MS, buildStudio, StudioHandles } from "../src/ui.js";

const PYTHON = process.env.SWITCHGAN_PYTHON ?? "python3";
const PORT = 8765 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let work: string;
let server: ChildProcess | null = null;
let sampleB64: string;

function cli(args: string[]): void {
  execFileSync(PYTHON, ["-m", "switchgan.cli", ...args], {
    stdio: ["ignore", "pipe", "pipe"],
    timeout: 600_000,
  });
}

async function waitHealthy(): Promise<void> {
  for (let i = 0; i < 240; i++) {
    try {
      const res = await fetch(`${BASE}/v1/healthz`);
      if (res.ok) {
        const body = await res.json();
        if (body.model_loaded) return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "studio-e2e-"));
  const data = join(work, "data");
  const run = join(work, "run");
  cli(["synth-data", "--out", data, "--count", "12", "--size", "32", "--seed", "5"]);
  cli(["train", "--data", data, "--out", run, "--steps", "1", "--gate", "--cfm",
       "--batch", "4", "--base-channels", "8", "--checkpoint-every", "1",
       "--seed", "0"]);
  const manifest = JSON.parse(readFileSync(join(data, "manifest.json"), "utf-8"));
  sampleB64 = readFileSync(join(data, manifest.records[0].file)).toString("base64");
  server = spawn(PYTHON, ["-m", "switchgan.cli", "serve",
                          "--ckpt", join(run, "checkpoints", "step_1.ckpt"),
                          "--port", String(PORT), "--workers", "2"],
                 { stdio: ["ignore", "pipe", "pipe"] });
  await waitHealthy();
}, 600_000);

afterAll(() => {
  if (server) server.kill("SIGTERM");
  if (work) rmSync(work, { recursive: true, force: true });
});

function studio(): StudioHandles {
  window.history.replaceState(null, "", "#");
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  return buildStudio(root, new Client(BASE));
}

async function settle(handles: StudioHandles): Promise<void> {
  for (let i = 0; i < 100; i++) {
    if (!handles.state().inFlight) {
      await new Promise((resolve) => setTimeout(resolve, 20));
      if (!handles.state().inFlight) return;
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

describe("intensity studio against the live service", () => {
  it("loads one slider row per schema attribute", async () => {
    const handles = studio();
    await handles.loadSchema();
    const rows = document.querySelectorAll(".attribute-row");
    expect(rows.length).toBe(3);
    expect(document.getElementById("row-hair_blond")).toBeTruthy();
    expect(document.getElementById("row-glasses")).toBeTruthy();
    expect(document.getElementById("row-smile")).toBeTruthy();
    expect((document.getElementById("content-panel") as HTMLElement).hidden)
      .toBe(false);
  });

  it("zero-label state disables Apply and explains why", async () => {
    const handles = studio();
    await handles.loadSchema();
    handles.setSource(sampleB64);
    const apply = document.getElementById("apply") as HTMLButtonElement;
    expect(apply.hasAttribute("disabled")).toBe(true);
    expect(document.getElementById("apply-note")?.textContent)
      .toMatch(/non-zero/);
    const toggle = document.getElementById("bit-smile") as HTMLInputElement;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change"));
    expect(apply.hasAttribute("disabled")).toBe(false);
    expect(document.getElementById("apply-note")?.textContent).toBe("");
  });

  it("sliders at zero render the content image pixel-identically", async () => {
    const handles = studio();
    await handles.loadSchema();
    handles.setSource(sampleB64);
    await settle(handles); // content panel fetch

    // enable two attributes, drag every slider to zero, then apply
    for (const name of ["glasses", "smile"]) {
      const toggle = document.getElementById(`bit-${name}`) as HTMLInputElement;
      toggle.checked = true;
      toggle.dispatchEvent(new Event("change"));
    }
    for (const name of ["hair_blond", "glasses", "smile"]) {
      const slider = document.getElementById(`alpha-${name}`) as HTMLInputElement;
      slider.value = "0";
      slider.dispatchEvent(new Event("input"));
    }
    await handles.applyNow();
    await settle(handles);

    const state = handles.state();
    expect(state.resultImage).toBeTruthy();
    expect(state.contentImage).toBeTruthy();
    // the service encodes both deterministically: equal base64 means
    // byte-identical PNGs, hence pixel-identical rendering
    expect(state.resultImage).toBe(state.contentImage);
    const resultSrc = (document.getElementById("result-image") as HTMLImageElement).src;
    const contentSrc = (document.getElementById("content-image") as HTMLImageElement).src;
    expect(resultSrc).toBe(contentSrc);
    expect(state.resolvedAlpha).toEqual([0, 0, 0]);
  });

  it("scripted dragging emits at most one request per debounce window", async () => {
    const handles = studio();
    await handles.loadSchema();
    handles.setSource(sampleB64);
    await settle(handles);

    const toggle = document.getElementById("bit-smile") as HTMLInputElement;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change"));
    await settle(handles);
    const before = handles.debouncer.requestCount;

    const slider = document.getElementById("alpha-smile") as HTMLInputElement;
    const start = Date.now();
    let moves = 0;
    // drag for ~3 windows, far faster than the debounce window
    while (Date.now() - start < DEBOUNCE_MS * 3) {
      slider.value = String((moves % 100) / 100);
      slider.dispatchEvent(new Event("input"));
      moves += 1;
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
    await settle(handles);
    await new Promise((resolve) => setTimeout(resolve, DEBOUNCE_MS * 2));
    await settle(handles);

    const emitted = handles.debouncer.requestCount - before;
    const windows = Math.ceil((Date.now() - start) / DEBOUNCE_MS);
    expect(moves).toBeGreaterThan(20);
    expect(emitted).toBeLessThanOrEqual(windows);
    expect(emitted).toBeGreaterThanOrEqual(1);
  });

  it("grid export with default steps yields the six-cell sheet", async () => {
    const handles = studio();
    await handles.loadSchema();
    handles.setSource(sampleB64);
    const toggle = document.getElementById("bit-glasses") as HTMLInputElement;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change"));
    await settle(handles);

    await handles.exportGrid();
    const cells = document.querySelectorAll("#grid-cells img");
    expect(cells.length).toBe(6);
    const kinds = Array.from(cells).map((c) => (c as HTMLElement).dataset.kind);
    expect(kinds).toEqual(
      ["source", "content", "translate", "translate", "translate", "translate"]);
    const alphas = Array.from(cells)
      .filter((c) => (c as HTMLElement).dataset.kind === "translate")
      .map((c) => Number((c as HTMLElement).dataset.alpha));
    expect(alphas).toEqual([0.25, 0.5, 0.75, 1]);
    for (const cell of Array.from(cells)) {
      expect((cell as HTMLImageElement).src.length).toBeGreaterThan(30);
    }
  }, 120_000);

  it("never sends a request the server would reject", async () => {
    const handles = studio();
    await handles.loadSchema();
    handles.setSource(sampleB64);
    const before = handles.debouncer.requestCount;
    // apply with a zero label must be a no-op
    handles.apply();
    await new Promise((resolve) => setTimeout(resolve, DEBOUNCE_MS * 2));
    expect(handles.debouncer.requestCount).toBe(before);
    expect(handles.state().error).toBeNull();
  });
}, 600_000);
