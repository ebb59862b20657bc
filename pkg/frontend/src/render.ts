import { SessionView } from "./client.js";

function fmtEta(eta: number | null): string {
  if (eta === null) return "--:--";
  const s = Math.round(eta);
  const m = Math.floor(s / 60);
  return `${m}:${String(s % 60).padStart(2, "0")}`;
}

// Plain-text summary of the view, used for the status line and in tests.
export function formatView(view: SessionView): string {
  const parts = [
    view.connection,
    view.phase ?? "-",
    `${Math.round(view.progress * 100)}%`,
    `layer ${view.layer}`,
    `eta ${fmtEta(view.eta)}`,
    `flow x${view.flowMult.toFixed(2)}`,
  ];
  if (view.stale) parts.push("STALE");
  if (view.lastError) parts.push(`error: ${view.lastError}`);
  return parts.join(" | ");
}
