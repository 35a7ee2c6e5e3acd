// End-to-end checks against a running service instance.  Enabled by
// CLICKSEG_E2E=1 (and CLICKSEG_BASE to point somewhere other than
// http://127.0.0.1:8791); skipped otherwise so the default suite needs
// no server.

import { describe, expect, it } from "vitest";
import { Api } from "../src/api.js";
import { BannerLog, SessionController } from "../src/controller.js";
import { decodeRle, masksEqual } from "../src/rle.js";
import { demoObjectCenter, demoScene, demoSequence } from "../src/scene.js";
import { base64OfBytes, bitmapToPpm, CanvasState } from "../src/state.js";

const LIVE = process.env.CLICKSEG_E2E === "1";
const BASE = process.env.CLICKSEG_BASE ?? "http://127.0.0.1:8791";

async function refinedSession(api: Api): Promise<{ sid: string; state: CanvasState }> {
  const scene = demoScene();
  const sid = await api.createSession({
    image: base64OfBytes(bitmapToPpm(scene.bitmap)),
    backend: { kind: "oracle", params: { gt: scene.gt } },
    gt: scene.gt,
  });
  const state = new CanvasState(scene.bitmap.width, scene.bitmap.height, scene.bitmap);
  const controller = new SessionController(api, sid, state, new BannerLog());
  const center = demoObjectCenter();
  controller.clickPixel(center.x, center.y, "pos");
  await controller.flush();
  if (controller.banners.banners.length > 0) {
    throw new Error(controller.banners.banners[0].text);
  }
  return { sid, state };
}

describe.skipIf(!LIVE)("live service", () => {
  it("health endpoint answers", async () => {
    const api = new Api(BASE);
    expect((await api.health()).status).toBe("ok");
  });

  it(
    "round-trips click, overlay, undo, and restore against the real engine",
    async () => {
      const api = new Api(BASE);
      const scene = demoScene();
      const sid = await api.createSession({
        image: base64OfBytes(bitmapToPpm(scene.bitmap)),
        backend: { kind: "oracle", params: { gt: scene.gt } },
        gt: scene.gt,
      });
      const state = new CanvasState(
        scene.bitmap.width,
        scene.bitmap.height,
        scene.bitmap,
      );
      const controller = new SessionController(api, sid, state, new BannerLog());
      await controller.refreshFromServer();
      expect(state.step).toBe(0);

      const center = demoObjectCenter();
      expect(controller.clickPixel(center.x, center.y, "pos")).toBe(true);
      await controller.flush();
      expect(controller.banners.banners).toEqual([]);
      expect(state.step).toBe(1);
      expect(state.iouHint).toBeCloseTo(1.0, 6);
      expect(masksEqual(state.overlay!, decodeRle(scene.gt))).toBe(true);

      controller.undo();
      await controller.flush();
      expect(controller.banners.banners).toEqual([]);
      expect(state.step).toBe(0);
      expect(state.overlay!.data.every((v) => v === 0)).toBe(true);

      const remote = await api.getSession(sid);
      expect(remote.step_count).toBe(0);
      expect(remote.width).toBe(scene.bitmap.width);
    },
    30000,
  );

  it(
    "filters out-of-bounds input client-side so the service never sees it",
    async () => {
      const api = new Api(BASE);
      const { sid, state } = await refinedSession(api);
      const controller = new SessionController(api, sid, state, new BannerLog());
      expect(controller.clickPixel(-1, 0)).toBe(false);
      expect(controller.clickPixel(state.width, 0)).toBe(false);
      expect(controller.strokeAt([[-20, -20], [-1, -1]])).toBe(false);
      await controller.flush();
      expect(controller.banners.banners).toEqual([]);
      const remote = await api.getSession(sid);
      expect(remote.step_count).toBe(1); // only the refine click from setup
    },
    30000,
  );

  it(
    "uploads a sequence, propagates, finds the worst frame, and corrects it",
    async () => {
      const api = new Api(BASE);
      const { sid } = await refinedSession(api);
      const scenes = demoSequence(5);
      const qid = await api.createSequence(
        scenes.map((s) => bitmapToPpm(s.bitmap)),
        2.0,
      );
      await api.attachFirstFrame(qid, sid);
      const masks = await api.propagate(qid);
      expect(masks).toHaveLength(5);
      for (const m of masks) {
        const d = decodeRle(m);
        expect(d.width).toBe(scenes[0].bitmap.width);
        expect(d.height).toBe(scenes[0].bitmap.height);
      }
      expect(decodeRle(masks[0]).data.some((v) => v === 1)).toBe(true);

      const worst = await api.worstFrame(qid);
      expect(worst.index).toBeGreaterThanOrEqual(1);
      expect(worst.index).toBeLessThan(5);
      expect(Number.isFinite(worst.score)).toBe(true);

      const target = demoObjectCenter(
        scenes[0].bitmap.width,
        scenes[0].bitmap.height,
        worst.index * 2,
      );
      const res = await api.correctFrame(qid, worst.index, {
        clicks: [{ x: target.x, y: target.y, polarity: "pos" }],
      });
      expect(res.frame).toBe(worst.index);
      const corrected = decodeRle(res.mask);
      expect(corrected.width).toBe(scenes[0].bitmap.width);
    },
    120000,
  );

  it("serves the built bundle at the web root", async () => {
    const page = await fetch(BASE + "/");
    expect(page.status).toBe(200);
    expect(await page.text()).toContain('<div id="app">');
    const js = await fetch(BASE + "/app.js");
    expect(js.status).toBe(200);
    expect((await js.text()).length).toBeGreaterThan(1000);
  });
});
