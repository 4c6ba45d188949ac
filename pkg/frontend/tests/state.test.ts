import { describe, expect, it } from "vitest";

import type { SchemaInfo } from "../src/api.js";
import {
  applySchema,
  blockedReason,
  canApply,
  clampAlpha,
  decodeFragment,
  encodeFragment,
  initialState,
  labelIsZero,
  requestMaps,
  setAlpha,
  setBit,
} from "../src/state.js";

const schema: SchemaInfo = {
  n: 3,
  names: ["hair_blond", "glasses", "smile"],
  mode: "multi_hot",
  exclusivity_groups: [],
  gate_enabled: true,
  image_size: 32,
  native_size: 32,
  checkpoint_digest: "abc",
};

function loaded() {
  let s = applySchema(initialState(), schema);
  s = { ...s, sourceImage: "AAAA" };
  return s;
}

describe("state", () => {
  it("schema application builds one row per attribute with sliders at 1", () => {
    const s = applySchema(initialState(), schema);
    expect(s.bits).toEqual([0, 0, 0]);
    expect(s.alphas).toEqual([1, 1, 1]);
  });

  it("sliders clamp to [0,1] on a 0.01 grid", () => {
    expect(clampAlpha(1.7)).toBe(1);
    expect(clampAlpha(-0.3)).toBe(0);
    expect(clampAlpha(0.123456)).toBe(0.12);
    expect(clampAlpha(Number.NaN)).toBe(1);
  });

  it("zero label disables Apply with an explanation", () => {
    const s = loaded();
    expect(labelIsZero(s)).toBe(true);
    expect(canApply(s)).toBe(false);
    expect(blockedReason(s)).toMatch(/non-zero/);
    const on = setBit(s, 2, true);
    expect(canApply(on)).toBe(true);
    expect(blockedReason(on)).toBeNull();
  });

  it("apply is blocked without a source image", () => {
    let s = applySchema(initialState(), schema);
    s = setBit(s, 0, true);
    expect(canApply(s)).toBe(false);
    expect(blockedReason(s)).toMatch(/source image/);
  });

  it("one-hot mode keeps a single active bit", () => {
    const oneHot = { ...schema, mode: "one_hot" as const };
    let s = applySchema(initialState(), oneHot);
    s = setBit(s, 0, true);
    s = setBit(s, 2, true);
    expect(s.bits).toEqual([0, 0, 1]);
  });

  it("exclusivity groups clear rivals", () => {
    const grouped = { ...schema, exclusivity_groups: [[0, 1]] };
    let s = applySchema(initialState(), grouped);
    s = setBit(s, 0, true);
    s = setBit(s, 1, true);
    expect(s.bits).toEqual([0, 1, 0]);
  });

  it("request maps cover every attribute by name", () => {
    let s = loaded();
    s = setBit(s, 1, true);
    s = setAlpha(s, 1, 0.25);
    const { set, alpha } = requestMaps(s);
    expect(set).toEqual({ hair_blond: 0, glasses: 1, smile: 0 });
    expect(alpha).toEqual({ hair_blond: 1, glasses: 0.25, smile: 1 });
  });

  it("URL fragment round-trips the controls", () => {
    let s = loaded();
    s = setBit(s, 0, true);
    s = setAlpha(s, 0, 0.4);
    s = setAlpha(s, 2, 0.05);
    const fragment = encodeFragment(s);
    let restored = applySchema(initialState(), schema);
    restored = { ...restored, sourceImage: "AAAA" };
    restored = decodeFragment(fragment, restored);
    expect(restored.bits).toEqual(s.bits);
    expect(restored.alphas).toEqual(s.alphas);
    expect(restored.baseUrl).toBe(s.baseUrl);
  });
});
