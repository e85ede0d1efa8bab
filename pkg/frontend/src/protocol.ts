// Wire protocol types, mirroring the server's message catalog.
// Client->server: hello, set_config, confirm, utterance, gaze_trigger,
// gaze_focus, gaze_unfocus, trigger_poke, confetti_tap, end.
// Server->client: session_created, config_draft, phase_changed, panels_state,
// summary_update, suggestion_update, trigger_state, feedback, error.

export type Phase = "function_selection" | "conversation" | "feedback";

export type PanelKey = "self_summary" | "other_summary" | "suggestions";

export interface FeatureFlags {
  self_summary: boolean;
  other_summary: boolean;
  word_suggestions: boolean;
  offtopic_detection: boolean;
  popup_animation: boolean;
}

export interface PanelView {
  state: "hidden" | "visible" | "focused";
  since_ms: number;
  dimmed: boolean;
  opacity: number;
  popup?: boolean;
}

export interface SummaryView {
  keywords: string[];
  version: number;
}

export interface TriggerView {
  level: number;
  color: number[];
  active: boolean;
}

// The full client-facing state; also the session_created payload and the
// GET /sessions/{id} snapshot body.
export interface Snapshot {
  phase: Phase;
  config: FeatureFlags;
  panels: Record<PanelKey, PanelView>;
  trigger_active: boolean;
  assist_count: number;
  summaries: { self: SummaryView; other: SummaryView };
  suggestion: { words: string[] };
  trigger: TriggerView;
  confetti_bursts: number;
}

export interface ServerMessage {
  type: string;
  session: string;
  seq?: number | null;
  payload: Record<string, unknown>;
}

export interface ClientMessage {
  type: string;
  payload?: Record<string, unknown>;
}

export type Speaker = "self" | "partner";

export const PANEL_KEYS: PanelKey[] = ["self_summary", "other_summary", "suggestions"];

export const FEATURE_LABELS: Record<keyof FeatureFlags, string> = {
  self_summary: "Self Summarization",
  other_summary: "Other Summarization",
  word_suggestions: "Word Suggestions",
  offtopic_detection: "Off-topic Detection",
  popup_animation: "Pop-up Animation",
};

export const FEATURE_ICONS: Record<keyof FeatureFlags, string> = {
  self_summary: "\u{1F5E3}",
  other_summary: "\u{1F465}",
  word_suggestions: "\u{1F4A1}",
  offtopic_detection: "\u{1F9ED}",
  popup_animation: "\u{2728}",
};
