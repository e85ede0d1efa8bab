import { SessionClient } from "./client.js";
import { bindHotkeys, render } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("server") ?? "http://127.0.0.1:8722";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = new SessionClient({
  baseUrl,
  topic: params.get("topic") ?? "",
  session: params.get("session") ?? undefined,
  onChange: (vm) => render(root, vm, client),
  onError: (kind, detail) => {
    const bar = document.getElementById("status");
    if (bar) {
      bar.textContent = `${kind}: ${detail}`;
      bar.classList.add("visible");
      setTimeout(() => bar.classList.remove("visible"), 2500);
    }
  },
});

client
  .connect()
  .then(() => bindHotkeys(client))
  .catch((err) => {
    root.textContent = `cannot reach ${baseUrl}: ${err}`;
  });
