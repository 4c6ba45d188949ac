/** Contact-sheet export: the source, the content image on gated models, and
 * one translation per intensity step applied to the active attributes,
 * ordered by ascending intensity. */

import type { Client } from "./api.js";
import type { StudioState } from "./state.js";
import { requestMaps } from "./state.js";

export const DEFAULT_STEPS = [0.25, 0.5, 0.75, 1];

export interface GridCell {
  kind: "source" | "content" | "translate";
  alpha?: number;
  image: string | null;
}

export function planGrid(gateEnabled: boolean, steps: number[]): GridCell[] {
  const ordered = steps.slice().sort((a, b) => a - b);
  const cells: GridCell[] = [{ kind: "source", image: null }];
  if (gateEnabled) cells.push({ kind: "content", image: null });
  for (const step of ordered) {
    cells.push({ kind: "translate", alpha: step, image: null });
  }
  return cells;
}

export async function fetchGrid(
  client: Client,
  state: StudioState,
  steps: number[] = DEFAULT_STEPS,
): Promise<GridCell[]> {
  if (!state.schema || !state.sourceImage) {
    throw new Error("load a schema and a source image before exporting");
  }
  const cells = planGrid(state.schema.gate_enabled, steps);
  const { set } = requestMaps(state);
  for (const cell of cells) {
    if (cell.kind === "source") {
      cell.image = state.sourceImage;
    } else if (cell.kind === "content") {
      cell.image = (await client.content(state.sourceImage)).image;
    } else {
      const alpha: Record<string, number> = {};
      state.schema.names.forEach((name, i) => {
        alpha[name] = state.bits[i] ? (cell.alpha as number) : 1;
      });
      const res = await client.translate({
        image: state.sourceImage,
        set,
        alpha,
      });
      cell.image = res.image;
    }
  }
  return cells;
}

/** Rasterize fetched cells onto a canvas for download. Only runs in a real
 * browser (needs canvas 2d and Image decoding). */
export async function composeSheet(cells: GridCell[], cellSize: number):
    Promise<HTMLCanvasElement> {
  const canvas = document.createElement("canvas");
  canvas.width = cellSize * cells.length;
  canvas.height = cellSize;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  await Promise.all(cells.map((cell, i) => new Promise<void>((resolve, reject) => {
    if (!cell.image) {
      resolve();
      return;
    }
    const img = new Image();
    img.onload = () => {
      ctx.drawImage(img, i * cellSize, 0, cellSize, cellSize);
      resolve();
    };
    img.onerror = () => reject(new Error(`cell ${i} failed to decode`));
    img.src = `data:image/png;base64,${cell.image}`;
  })));
  return canvas;
}
