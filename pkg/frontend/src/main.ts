// Wires the console together: snapshot + event stream -> fold -> mimic.

import { GatewayApi } from "./api.js";
import { applyMimic, renderMimic } from "./mimic.js";
import { WorldState, foldEvent, foldSnapshot, initialState } from "./state.js";
import { CommandKind, Snapshot, WsFrame } from "./types.js";
import { EventStream, StreamStatus } from "./ws.js";

let world: WorldState | null = null;
let api: GatewayApi;
let stream: EventStream | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function setConnection(status: StreamStatus): void {
  const banner = $("conn-banner");
  banner.textContent =
    status === "open" || status === "reconnected" ? "" : `gateway ${status}…`;
  banner.classList.toggle("hidden", status === "open" || status === "reconnected");
  $("mimic").classList.toggle("disconnected", !(status === "open" || status === "reconnected"));
  if (status === "reconnected" && world) {
    world = { ...world, gapDetected: true };
    // a reconnect may have dropped frames: resynchronize from the source
    void resync();
  }
}

async function resync(): Promise<void> {
  try {
    const snap = await api.getState();
    if (world) {
      world = foldSnapshot(world, snap);
      world = { ...world, breakerPos: snap.breaker_pos, shots: snap.shots,
                recloserMode: snap.recloser_mode, lockedOut: snap.locked_out, amp: snap.amp };
      render();
    }
  } catch {
    /* next event or reconnect will retry */
  }
}

function logEntryHtml(text: string, kind: string): HTMLElement {
  const li = document.createElement("li");
  li.className = `log-${kind}`;
  li.textContent = text;
  return li;
}

function render(): void {
  if (!world) return;
  applyMimic(renderMimic(world), document);
  $("recloser-mode").textContent = world.recloserMode;
  $("gap-flag").classList.toggle("hidden", !world.gapDetected);
  const list = $("event-log");
  list.replaceChildren(
    ...world.log.slice(0, 200).map((e) =>
      logEntryHtml(`${String(e.timeMs).padStart(6, " ")} ms  ${e.text}`, e.kind),
    ),
  );
}

function onFrame(frame: WsFrame): void {
  if (!world) return;
  world = foldEvent(world, frame);
  render();
}

async function command(kind: CommandKind, value: number | string): Promise<void> {
  const buttons = document.querySelectorAll<HTMLButtonElement>(`[data-cmd="${kind}"]`);
  buttons.forEach((b) => (b.disabled = true));
  try {
    const result = await api.send(kind, value);
    if (!result.ok) {
      toast(`${kind}: ${result.error ?? "failed"}`);
    } else {
      await resync(); // setpoints only travel in snapshots
    }
  } finally {
    buttons.forEach((b) => (b.disabled = false));
  }
}

function toast(message: string): void {
  const el = $("toast");
  el.textContent = message;
  el.classList.remove("hidden");
  setTimeout(() => el.classList.add("hidden"), 4000);
}

async function connect(): Promise<void> {
  const base = (document.getElementById("gateway-url") as HTMLInputElement).value
    .replace(/\/$/, "");
  api = new GatewayApi(base);
  stream?.stop();
  let snap: Snapshot;
  try {
    snap = await api.getState();
  } catch (err) {
    toast(`cannot reach gateway: ${err instanceof Error ? err.message : err}`);
    return;
  }
  world = initialState(snap);
  render();
  const wsUrl = base.replace(/^http/, "ws") + "/events";
  stream = new EventStream(wsUrl, onFrame, setConnection);
  stream.start();
}

export function boot(): void {
  $("connect").addEventListener("click", () => void connect());
  $("load-apply").addEventListener("click", () => {
    const amps = Number((document.getElementById("load-spinner") as HTMLInputElement).value);
    void command("load", amps);
  });
  $("disc-open").addEventListener("click", () => void command("disconnector", "open"));
  $("disc-close").addEventListener("click", () => void command("disconnector", "closed"));
  $("fault-apply").addEventListener("click", () => {
    const amps = Number((document.getElementById("fault-spinner") as HTMLInputElement).value);
    void command("fault", amps);
  });
  $("fault-clear").addEventListener("click", () => void command("fault", "clear"));
  void connect();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
