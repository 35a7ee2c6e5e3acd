// @vitest-environment jsdom
//
// Scripted-browser round trip: boot the app in a DOM, press its buttons,
// dispatch real mouse events on the canvas, and check what goes over the
// wire and what the overlay becomes.

import { beforeEach, describe, expect, it } from "vitest";
import { Api } from "../src/api.js";
import { initApp, type App } from "../src/main.js";
import { decodeRle, masksEqual } from "../src/rle.js";
import { demoObjectCenter } from "../src/scene.js";
import { FakeServer, settle } from "./fake_server.js";

let server: FakeServer;
let root: HTMLElement;
let app: App;

function mouse(type: string, x: number, y: number, opts: MouseEventInit = {}): MouseEvent {
  return new MouseEvent(type, { clientX: x, clientY: y, bubbles: true, ...opts });
}

function clickCanvas(
  canvas: HTMLCanvasElement,
  x: number,
  y: number,
  opts: MouseEventInit = {},
): void {
  canvas.dispatchEvent(mouse("mousedown", x, y, opts));
  canvas.dispatchEvent(mouse("mouseup", x, y, opts));
}

async function waitFor(cond: () => boolean, ms = 3000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > ms) throw new Error("timed out waiting for condition");
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

function button(id: string): HTMLButtonElement {
  const el = root.querySelector<HTMLButtonElement>(`#${id}`);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

async function startOracleDemo(): Promise<void> {
  button("new-demo-oracle").click();
  await waitFor(() => app.session !== null && app.session.state.overlay !== null);
}

beforeEach(() => {
  // jsdom has no 2D context; return null so the renderer's guard path
  // runs without jsdom's "not implemented" noise
  (HTMLCanvasElement.prototype as unknown as { getContext: () => null }).getContext =
    () => null;
  location.hash = "";
  document.body.innerHTML = '<div id="root"></div>';
  root = document.getElementById("root")!;
  server = new FakeServer();
  app = initApp(root, new Api("", server.fetch));
});

describe("oracle demo round trip", () => {
  it("creates a session, posts one canvas click, and overlays the returned mask", async () => {
    await startOracleDemo();
    const session = app.session!;
    expect(session.state.step).toBe(0);
    expect(session.state.overlay!.data.every((v) => v === 0)).toBe(true);

    const scale = session.state.transform.scale;
    const center = demoObjectCenter();
    clickCanvas(app.canvas, center.x * scale + scale / 2, center.y * scale + scale / 2);
    await session.flush();
    await settle();

    const posts = server.requests("/interactions", "POST");
    expect(posts).toHaveLength(1);
    expect(posts[0].body).toEqual({
      clicks: [{ x: center.x, y: center.y, polarity: "pos" }],
      strokes: [],
    });
    // the overlay is exactly the decode of the mask the server returned
    const rec = server.sessions.get(session.sessionId)!;
    const returned = rec.maskHistory[rec.maskHistory.length - 1];
    expect(masksEqual(session.state.overlay!, decodeRle(returned))).toBe(true);
    expect(session.state.overlay!.data.some((v) => v === 1)).toBe(true);
    expect(session.state.step).toBe(1);
    expect(session.state.iouHint).toBe(1.0);
    // the session id landed in the URL for reload restore
    expect(location.hash).toBe(`#s=${session.sessionId}`);
  });

  it("never posts out-of-bounds clicks", async () => {
    await startOracleDemo();
    const session = app.session!;
    const scale = session.state.transform.scale;
    clickCanvas(app.canvas, session.state.width * scale + 40, 10); // right of image
    clickCanvas(app.canvas, 10, session.state.height * scale + 2); // below image
    await session.flush();
    await settle();
    expect(server.requests("/interactions", "POST")).toHaveLength(0);
    expect(session.state.step).toBe(0);
  });

  it("undo reverts the overlay to the previous mask", async () => {
    await startOracleDemo();
    const session = app.session!;
    const rec = server.sessions.get(session.sessionId)!;
    const before = decodeRle(rec.maskHistory[0]);

    const scale = session.state.transform.scale;
    const center = demoObjectCenter();
    clickCanvas(app.canvas, center.x * scale + 1, center.y * scale + 1);
    await session.flush();
    expect(session.state.step).toBe(1);
    expect(masksEqual(session.state.overlay!, before)).toBe(false);

    button("undo").click();
    await session.flush();
    await settle();
    expect(session.state.step).toBe(0);
    expect(masksEqual(session.state.overlay!, before)).toBe(true);
  });

  it("posts a drag as a stroke with at least two points", async () => {
    await startOracleDemo();
    const session = app.session!;
    app.canvas.dispatchEvent(mouse("mousedown", 80, 80));
    app.canvas.dispatchEvent(mouse("mousemove", 120, 96));
    app.canvas.dispatchEvent(mouse("mouseup", 160, 120));
    await session.flush();
    const posts = server.requests("/interactions", "POST");
    expect(posts).toHaveLength(1);
    const body = posts[0].body as {
      clicks: unknown[];
      strokes: { points: [number, number][] }[];
    };
    expect(body.clicks).toHaveLength(0);
    expect(body.strokes).toHaveLength(1);
    expect(body.strokes[0].points.length).toBeGreaterThanOrEqual(2);
  });

  it("shift-click posts a negative click", async () => {
    await startOracleDemo();
    const session = app.session!;
    const scale = session.state.transform.scale;
    clickCanvas(app.canvas, 2 * scale + 1, 3 * scale + 1, { shiftKey: true });
    await session.flush();
    const posts = server.requests("/interactions", "POST");
    expect(posts).toHaveLength(1);
    expect((posts[0].body as { clicks: { polarity: string }[] }).clicks[0]).toEqual({
      x: 2,
      y: 3,
      polarity: "neg",
    });
  });

  it("surfaces a failed post as a dismissible banner", async () => {
    await startOracleDemo();
    const session = app.session!;
    server.failWith("/interactions", 500, "internal", "backend exploded", 1);
    const scale = session.state.transform.scale;
    clickCanvas(app.canvas, 4 * scale, 4 * scale);
    await session.flush();
    await settle();
    const banner = root.querySelector(".banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("backend exploded");
    banner!.querySelector("button")!.click();
    await settle();
    expect(root.querySelector(".banner")).toBeNull();
  });
});

describe("reload restore", () => {
  it("rebuilds session state from the id in the URL hash", async () => {
    await startOracleDemo();
    const session = app.session!;
    const scale = session.state.transform.scale;
    const center = demoObjectCenter();
    clickCanvas(app.canvas, center.x * scale + 1, center.y * scale + 1);
    await session.flush();
    expect(location.hash).toBe(`#s=${session.sessionId}`);

    // simulate a reload: fresh DOM, same URL, same service
    document.body.innerHTML = '<div id="root2"></div>';
    const root2 = document.getElementById("root2")!;
    const app2 = initApp(root2, new Api("", server.fetch));
    await waitFor(() => app2.session !== null && app2.session.state.overlay !== null);
    const restored = app2.session!;
    expect(restored.sessionId).toBe(session.sessionId);
    expect(restored.state.step).toBe(1);
    expect(restored.state.width).toBe(session.state.width);
    expect(restored.state.clickHistory).toEqual([
      [{ x: center.x, y: center.y, polarity: "pos" }],
    ]);
    expect(masksEqual(restored.state.overlay!, session.state.overlay!)).toBe(true);
  });
});

describe("sequence panel", () => {
  it("runs demo creation, propagation, worst-frame jump, and correction", async () => {
    button("seq-demo").click();
    await waitFor(() => app.sequence.sequenceId !== null, 5000);
    expect(app.sequence.frameCount).toBe(6);
    // the demo attached a refined first-frame session
    expect(server.requests("/first-frame/", "POST")).toHaveLength(1);

    button("seq-propagate").click();
    await waitFor(() => app.sequence.masks.length === 6 && app.sequence.masks[0] !== null);

    button("seq-worst").click();
    await waitFor(() => app.sequence.worst !== null);
    expect(app.sequence.current).toBe(app.sequence.worst!.index);

    // scrub to another frame, then correct it with a canvas click
    const scrub = root.querySelector<HTMLInputElement>("#seq-scrub")!;
    expect(scrub.disabled).toBe(false);
    scrub.value = "3";
    scrub.dispatchEvent(new Event("input", { bubbles: true }));
    expect(app.sequence.current).toBe(3);

    app.seqCanvas.dispatchEvent(mouse("mousedown", 10, 10));
    await waitFor(() => server.requests("/frames/3/interactions", "POST").length === 1);
    await waitFor(() => !app.sequence.busy);
    const post = server.requests("/frames/3/interactions", "POST")[0];
    const clicks = (post.body as { clicks: { x: number; y: number }[] }).clicks;
    expect(clicks).toHaveLength(1);
    expect(clicks[0].x).toBeGreaterThanOrEqual(0);
    expect(clicks[0].y).toBeGreaterThanOrEqual(0);
    expect(app.sequence.masks[3]!.data.every((v) => v === 1)).toBe(true);
  });
});
