// DOM rendering for the three session phases. Rendering is a pure function
// of the ViewModel; only explicit user gestures send protocol messages.

import type { SessionClient } from "./client.js";
import {
  FEATURE_ICONS,
  FEATURE_LABELS,
  PANEL_KEYS,
  type FeatureFlags,
  type PanelKey,
} from "./protocol.js";
import type { ViewModel } from "./viewmodel.js";

const PANEL_TITLES: Record<PanelKey, string> = {
  self_summary: "Self-Summarization",
  other_summary: "Other-Summarization",
  suggestions: "Word Suggestions",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(root: HTMLElement, vm: ViewModel, client: SessionClient): void {
  root.replaceChildren();
  if (vm.phase === "function_selection") {
    root.appendChild(renderSelection(vm, client));
  } else if (vm.phase === "conversation") {
    root.appendChild(renderConversation(vm, client));
  } else {
    root.appendChild(renderFeedback(vm, client));
  }
}

function renderSelection(vm: ViewModel, client: SessionClient): HTMLElement {
  const view = el("div", "selection");
  view.appendChild(el("h1", "title", "Choose your support"));
  const grid = el("div", "feature-grid");
  (Object.keys(FEATURE_LABELS) as (keyof FeatureFlags)[]).forEach((name) => {
    const active = vm.config[name];
    const tile = el("button", active ? "feature active" : "feature");
    tile.appendChild(el("div", "feature-icon", FEATURE_ICONS[name]));
    tile.appendChild(el("div", "feature-label", FEATURE_LABELS[name]));
    // lower opacity denotes an active function; deactivated tiles sit at
    // full opacity so switching off is visually loud
    tile.style.opacity = active ? "0.55" : "1.0";
    tile.onclick = () => client.toggleFeature(name, !active);
    grid.appendChild(tile);
  });
  view.appendChild(grid);
  const confirm = el("button", "confirm", "Confirm");
  confirm.onclick = () => client.confirm();
  view.appendChild(confirm);
  return view;
}

function renderConversation(vm: ViewModel, client: SessionClient): HTMLElement {
  const view = el("div", "conversation");

  const panelRow = el("div", "panel-row");
  for (const key of PANEL_KEYS) {
    const panel = vm.panels[key];
    const box = el("div", "panel");
    box.dataset.panel = key;
    box.style.opacity = String(panel.opacity);
    box.classList.toggle("hidden", panel.state === "hidden");
    box.classList.toggle("popup", Boolean(panel.popup));
    box.appendChild(el("h2", "panel-title", PANEL_TITLES[key]));
    const body = el("div", "panel-body");
    if (key === "suggestions") {
      body.textContent = vm.suggestion.words.join(" ");
    } else {
      const side = key === "self_summary" ? "self" : "other";
      body.textContent = vm.summaries[side].keywords.join(", ");
    }
    box.appendChild(body);
    if (panel.state !== "hidden") {
      box.onmouseenter = () => client.gazeFocus(key);
      box.onmouseleave = () => client.gazeUnfocus();
    }
    panelRow.appendChild(box);
  }
  view.appendChild(panelRow);

  const trigger = el("div", "trigger");
  trigger.classList.toggle("trigger-active", vm.trigger.active);
  const [r, g, b] = vm.trigger.color;
  trigger.style.background = `rgb(${Math.round(r * 255)}, ${Math.round(
    g * 255,
  )}, ${Math.round(b * 255)})`;
  trigger.title = "glance down (G) to toggle panels; poke (P) to finish";
  trigger.onclick = () => client.gazeTrigger();
  trigger.ondblclick = () => client.pokeTrigger();
  view.appendChild(trigger);

  const input = el("div", "say");
  const speaker = el("select") as HTMLSelectElement;
  for (const who of ["self", "partner"]) {
    const opt = el("option", undefined, who) as HTMLOptionElement;
    opt.value = who;
    speaker.appendChild(opt);
  }
  const text = el("input") as HTMLInputElement;
  text.placeholder = "type an utterance and press Enter";
  text.onkeydown = (ev) => {
    if (ev.key === "Enter" && text.value.trim()) {
      client.sayUtterance(speaker.value as "self" | "partner", text.value);
      text.value = "";
    }
  };
  input.appendChild(speaker);
  input.appendChild(text);
  view.appendChild(input);
  return view;
}

function renderFeedback(vm: ViewModel, client: SessionClient): HTMLElement {
  const view = el("div", "feedback");
  view.appendChild(el("h1", "title", "Nice conversation!"));
  view.appendChild(el("div", "assist-count", String(vm.assist_count)));
  view.appendChild(el("p", "assist-caption", "times you actively sought support"));
  const confetti = el("div", "confetti-zone", "tap for confetti");
  confetti.onclick = () => {
    client.confettiTap();
    spawnBurst(view);
  };
  view.appendChild(confetti);
  view.appendChild(el("p", "bursts", `${vm.confetti_bursts} bursts so far`));
  return view;
}

function spawnBurst(host: HTMLElement): void {
  for (let i = 0; i < 24; i++) {
    const bit = el("span", "confetti-bit");
    bit.style.left = `${50 + (Math.random() - 0.5) * 40}%`;
    bit.style.setProperty("--dx", `${(Math.random() - 0.5) * 240}px`);
    bit.style.setProperty("--hue", `${Math.floor(Math.random() * 360)}`);
    host.appendChild(bit);
    setTimeout(() => bit.remove(), 1200);
  }
}

export function bindHotkeys(client: SessionClient): void {
  document.addEventListener("keydown", (ev) => {
    if ((ev.target as HTMLElement | null)?.tagName === "INPUT") return;
    if (ev.key === "g") client.gazeTrigger();
    if (ev.key === "p") client.pokeTrigger();
  });
}
