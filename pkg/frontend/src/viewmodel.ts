// The ViewModel is derived exclusively from server events; rendering reads
// it, gestures send messages, and nothing else mutates it. Applying the
// event stream from a snapshot reconstructs the server state exactly.

import type {
  FeatureFlags,
  PanelKey,
  PanelView,
  ServerMessage,
  Snapshot,
  SummaryView,
  TriggerView,
} from "./protocol.js";

export interface ViewModel extends Snapshot {}

export function emptyViewModel(): ViewModel {
  const hidden = (): PanelView => ({
    state: "hidden",
    since_ms: 0,
    dimmed: false,
    opacity: 0,
  });
  return {
    phase: "function_selection",
    config: {
      self_summary: true,
      other_summary: true,
      word_suggestions: true,
      offtopic_detection: true,
      popup_animation: true,
    },
    panels: {
      self_summary: hidden(),
      other_summary: hidden(),
      suggestions: hidden(),
    },
    trigger_active: false,
    assist_count: 0,
    summaries: {
      self: { keywords: [], version: 0 },
      other: { keywords: [], version: 0 },
    },
    suggestion: { words: [] },
    trigger: { level: 0, color: [0.85, 0.85, 0.85], active: false },
    confetti_bursts: 0,
  };
}

export function fromSnapshot(snapshot: Snapshot): ViewModel {
  return structuredClone(snapshot);
}

/** Fold one server event into the view model (pure; returns a new object). */
export function applyServerMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  const next = structuredClone(vm);
  const p = msg.payload as Record<string, any>;
  switch (msg.type) {
    case "session_created":
      return fromSnapshot(msg.payload as unknown as Snapshot);
    case "config_draft":
      next.config = p.config as FeatureFlags;
      break;
    case "phase_changed":
      next.phase = p.phase;
      next.config = p.config as FeatureFlags;
      break;
    case "panels_state":
      next.panels = p.panels as Record<PanelKey, PanelView>;
      next.trigger_active = Boolean(p.trigger_active);
      next.assist_count = Number(p.assist_count);
      next.trigger = { ...next.trigger, active: Boolean(p.trigger_active) };
      break;
    case "summary_update": {
      const side = p.channel === "self" ? "self" : "other";
      const update: SummaryView = {
        keywords: p.keywords as string[],
        version: Number(p.version),
      };
      next.summaries[side] = update;
      break;
    }
    case "suggestion_update":
      next.suggestion = { words: p.words as string[] };
      break;
    case "trigger_state":
      next.trigger = p as unknown as TriggerView;
      break;
    case "feedback":
      next.assist_count = Number(p.assist_count);
      next.confetti_bursts = Number(p.confetti_bursts);
      break;
    default:
      break; // errors and unknown events leave the view untouched
  }
  return next;
}
