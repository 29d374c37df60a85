// Single-line mimic of the feeder: bus bar — disconnector — breaker — CT
// — load.  Pure view-model first, DOM application second, so the diagram
// logic is testable without a browser.

import { WorldState } from "./state.js";

export interface MimicView {
  discSymbol: string;
  discClass: "closed" | "open";
  breakerSymbol: string;
  breakerClass: "on" | "off" | "intermediate" | "bad";
  currentText: string;
  lockoutVisible: boolean;
  tripVisible: boolean;
  shotsText: string;
  line: string; // ASCII one-liner, also used as the accessible label
}

const BREAKER_GLYPH: Record<string, string> = {
  on: "[■]",
  off: "[ ]",
  intermediate: "[~]",
  bad: "[?]",
};

export function renderMimic(state: WorldState): MimicView {
  const discClosed = state.disconnector === "closed";
  const breakerClass = (["on", "off", "intermediate", "bad"].includes(state.breakerPos)
    ? state.breakerPos
    : "bad") as MimicView["breakerClass"];
  const discSymbol = discClosed ? "—/—" : "— / ";
  const breakerSymbol = BREAKER_GLYPH[breakerClass];
  const currentText = `${state.amp.toFixed(1)} A`;
  const line =
    `bus ═══ disc ${discSymbol} brk ${breakerSymbol} ct(${currentText}) ─── ` +
    `load ${state.loadA.toFixed(0)} A` +
    (state.faultA > 0 ? ` ⚡fault ${state.faultA.toFixed(0)} A` : "");
  return {
    discSymbol,
    discClass: discClosed ? "closed" : "open",
    breakerSymbol,
    breakerClass,
    currentText,
    lockoutVisible: state.lockedOut,
    tripVisible: state.trip,
    shotsText: `${state.shots}/3`,
    line,
  };
}

export function applyMimic(view: MimicView, root: Document | HTMLElement): void {
  const byId = (id: string) =>
    (root instanceof Document ? root : root.ownerDocument!).getElementById(id);
  const set = (id: string, text: string) => {
    const el = byId(id);
    if (el) el.textContent = text;
  };
  set("mimic-line", view.line);
  set("mimic-current", view.currentText);
  set("shot-counter", view.shotsText);
  const breaker = byId("mimic-breaker");
  if (breaker) {
    breaker.textContent = view.breakerSymbol;
    breaker.className = `breaker ${view.breakerClass}`;
  }
  const disc = byId("mimic-disc");
  if (disc) {
    disc.textContent = view.discSymbol;
    disc.className = `disc ${view.discClass}`;
  }
  const lockout = byId("lockout-badge");
  if (lockout) lockout.classList.toggle("hidden", !view.lockoutVisible);
  const trip = byId("trip-badge");
  if (trip) trip.classList.toggle("hidden", !view.tripVisible);
}
