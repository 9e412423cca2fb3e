/**
 * Browser entry point.
 *
 * Query parameters: ?server=ws://host:port (default same host, port
 * 8000), &step=0.002 (m per tick), &rot=0.02 (rad per tick), &rate=20
 * (commands/s), &magnet=0.  The steer loop runs at 20 ticks/s; the
 * token bucket keeps actual traffic at or under the configured rate.
 */

import { TeleopConsole } from "./console.js";
import { DEFAULT_BINDINGS, isBound } from "./input.js";
import { renderHtml, renderModel } from "./view.js";

const TICK_MS = 50;

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function main(): void {
  const defaultServer = `ws://${window.location.hostname || "127.0.0.1"}:8000`;
  const server = param("server", defaultServer).replace(/\/$/, "");
  const consoleEl = document.getElementById("console");
  if (!consoleEl) throw new Error("missing #console element");

  const tele = new TeleopConsole({
    url: `${server}/ws`,
    factory: (url) => new WebSocket(url),
    now: () => performance.now(),
    gains: {
      step: Number(param("step", "0.002")),
      rotStep: Number(param("rot", "0.02")),
    },
    ratePerSec: Number(param("rate", "20")),
    magnet: Number(param("magnet", "0")),
  });

  let dirty = true;
  tele.onChange = () => {
    dirty = true;
  };
  const paint = () => {
    if (dirty) {
      dirty = false;
      consoleEl.innerHTML = renderHtml(renderModel(tele.view));
    }
    requestAnimationFrame(paint);
  };
  requestAnimationFrame(paint);

  window.addEventListener("keydown", (ev) => {
    if (isBound(ev.key, DEFAULT_BINDINGS)) {
      ev.preventDefault();
      tele.keyDown(ev.key);
    }
  });
  window.addEventListener("keyup", (ev) => tele.keyUp(ev.key));
  window.addEventListener("blur", () => tele.releaseKeys());

  const wire = (id: string, fn: () => void) =>
    document.getElementById(id)?.addEventListener("click", fn);
  wire("btn-pause", () => tele.pause());
  wire("btn-resume", () => tele.resume());
  wire("btn-reset", () => tele.reset());

  const rateSlider = document.getElementById("rate-slider") as HTMLInputElement | null;
  rateSlider?.addEventListener("change", () => tele.setRate(Number(rateSlider.value)));
  const stepSlider = document.getElementById("step-slider") as HTMLInputElement | null;
  stepSlider?.addEventListener("input", () => {
    tele.gains.step = Number(stepSlider.value) / 1000;
  });

  setInterval(() => {
    const pads = navigator.getGamepads?.() ?? [];
    const pad = pads.find((p) => p !== null) ?? null;
    tele.setGamepadAxes(pad ? [...pad.axes] : null);
    tele.tick();
  }, TICK_MS);

  tele.connect();
}

main();
