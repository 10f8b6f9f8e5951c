/**
 * Browser entry point. Reads server/room/name, an avatar choice, and an
 * optional scenario to attach from URL query parameters, joins the room, and
 * draws the scene in a requestAnimationFrame loop with mouse-orbit controls.
 */

import { ViewerClient } from "./client.js";
import { defaultCamera, orbit, zoom } from "./camera.js";
import { buildScene } from "./scene.js";
import { drawScene } from "./render.js";
import { wsTransportFactory } from "./transport.js";

const params = new URLSearchParams(location.search);
const serverUrl = params.get("server") ?? `ws://${location.hostname || "127.0.0.1"}:8081`;
const room = params.get("room") ?? "lobby";
const name = params.get("name") ?? "viewer";
const scenario = params.get("scenario");
const avatarId = params.get("avatar");
const color = params.get("color");

const avatar: Record<string, unknown> = {};
if (avatarId !== null) avatar["avatar_id"] = avatarId;
// The server wants #rrggbb; accept a bare rrggbb so the # needn't be escaped.
if (color !== null) avatar["color"] = color.startsWith("#") ? color : `#${color}`;

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusLine = document.getElementById("status") as HTMLDivElement;
const readout = document.getElementById("readout") as HTMLDivElement;
const rosterList = document.getElementById("roster") as HTMLUListElement;
const ctrlLine = document.getElementById("ctrl-result") as HTMLDivElement;
const speedInput = document.getElementById("speed") as HTMLInputElement;
const scenarioInput = document.getElementById("scenario") as HTMLInputElement;

const cam = defaultCamera();
const client = new ViewerClient(wsTransportFactory(serverUrl), {
  room,
  name,
  ...(Object.keys(avatar).length > 0 ? { avatar } : {}),
  ...(scenario !== null ? { source: { scenario } } : {}),
});

function renderHud(): void {
  const s = client.store;
  statusLine.textContent = s.statusDetail !== "" ? `${s.status}: ${s.statusDetail}` : s.status;
  statusLine.dataset["state"] = s.status;
  const rtt = s.rttMs !== null ? `${s.rttMs.toFixed(1)} ms` : "-";
  const tick = s.batch !== null ? String(s.batch.tick) : "-";
  readout.textContent =
    `room ${s.room} | tick ${tick} | rtt ${rtt}` +
    (s.discardedTicks > 0 ? ` | discarded ${s.discardedTicks}` : "");
  rosterList.replaceChildren(
    ...s.roster.map((p) => {
      const li = document.createElement("li");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = s.colorFor(p.participant_id);
      li.append(swatch, `${p.name}${p.camera_id !== "" ? ` (${p.camera_id})` : ""}`);
      return li;
    }),
  );
  ctrlLine.textContent = s.lastCtrl;
}

client.onChange = renderHud;

function resize(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
}
window.addEventListener("resize", resize);
resize();

let dragging = false;
canvas.addEventListener("mousedown", () => {
  dragging = true;
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
window.addEventListener("mousemove", (ev) => {
  if (dragging) orbit(cam, -ev.movementX * 0.005, ev.movementY * 0.005);
});
canvas.addEventListener(
  "wheel",
  (ev) => {
    ev.preventDefault();
    zoom(cam, ev.deltaY > 0 ? 1.1 : 1 / 1.1);
  },
  { passive: false },
);

document.getElementById("pause")!.addEventListener("click", () => client.ctrl("pause"));
document.getElementById("resume")!.addEventListener("click", () => client.ctrl("resume"));
document.getElementById("set-speed")!.addEventListener("click", () => {
  const v = Number(speedInput.value);
  if (Number.isFinite(v)) client.ctrl("speed", v);
});
document.getElementById("set-scenario")!.addEventListener("click", () => {
  if (scenarioInput.value !== "") client.ctrl("scenario", scenarioInput.value);
});

function frame(): void {
  const s = client.store;
  const sinceBatch = s.batchReceivedAt !== null ? performance.now() - s.batchReceivedAt : 0;
  const figures = buildScene(s.batch, (pid) => s.colorFor(pid), sinceBatch);
  drawScene(ctx, figures, cam, canvas.width, canvas.height);
  requestAnimationFrame(frame);
}

client.connect();
renderHud();
setInterval(() => client.ping(), 2000);
requestAnimationFrame(frame);
