// Session client: one socket, events applied in seq order; a gap in the
// broadcast sequence triggers a snapshot refetch so the view never drifts.

import type { ClientMessage, ServerMessage, Snapshot, Speaker } from "./protocol.js";
import { applyServerMessage, emptyViewModel, fromSnapshot, type ViewModel } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
}

export interface ClientOptions {
  baseUrl: string; // e.g. http://127.0.0.1:8722
  topic?: string;
  session?: string; // reattach to an existing session
  socketFactory?: (url: string) => SocketLike;
  fetchImpl?: typeof fetch;
  onChange?: (vm: ViewModel) => void;
  onError?: (kind: string, detail: string) => void;
}

export class SessionClient {
  vm: ViewModel = emptyViewModel();
  sessionId = "";
  lastSeq = 0;
  private socket: SocketLike | null = null;
  private readonly opts: ClientOptions;
  private readonly fetchImpl: typeof fetch;

  constructor(opts: ClientOptions) {
    this.opts = opts;
    this.fetchImpl = opts.fetchImpl ?? fetch;
  }

  connect(): Promise<void> {
    const wsUrl = this.opts.baseUrl.replace(/^http/, "ws") + "/ws";
    const factory =
      this.opts.socketFactory ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(wsUrl);
    this.socket = socket;
    return new Promise((resolve, reject) => {
      let settled = false;
      socket.onopen = () => {
        socket.send(
          JSON.stringify({
            type: "hello",
            payload: {
              topic: this.opts.topic ?? "",
              ...(this.opts.session ? { session: this.opts.session } : {}),
            },
          }),
        );
      };
      socket.onclose = () => {
        if (!settled) reject(new Error("socket closed before session_created"));
      };
      socket.onmessage = (ev) => {
        const msg = JSON.parse(String(ev.data)) as ServerMessage;
        if (!settled && msg.type === "session_created") {
          settled = true;
          this.sessionId = msg.session;
          this.lastSeq = msg.seq ?? 0;
          this.vm = fromSnapshot(msg.payload as unknown as Snapshot);
          this.opts.onChange?.(this.vm);
          resolve();
          return;
        }
        void this.handle(msg);
      };
    });
  }

  private async handle(msg: ServerMessage): Promise<void> {
    if (msg.type === "error") {
      const p = msg.payload as { error?: string; detail?: string };
      this.opts.onError?.(p.error ?? "error", p.detail ?? "");
      return;
    }
    if (typeof msg.seq === "number") {
      if (msg.seq <= this.lastSeq) return; // duplicate
      if (msg.seq > this.lastSeq + 1) {
        await this.refetchSnapshot(); // gap: rebuild from server authority
        return;
      }
      this.lastSeq = msg.seq;
    }
    this.vm = applyServerMessage(this.vm, msg);
    this.opts.onChange?.(this.vm);
  }

  async refetchSnapshot(): Promise<void> {
    const resp = await this.fetchImpl(`${this.opts.baseUrl}/sessions/${this.sessionId}`);
    if (!resp.ok) return;
    const body = (await resp.json()) as { seq: number; snapshot: Snapshot };
    this.lastSeq = body.seq;
    this.vm = fromSnapshot(body.snapshot);
    this.opts.onChange?.(this.vm);
  }

  send(msg: ClientMessage): void {
    this.socket?.send(JSON.stringify({ payload: {}, ...msg }));
  }

  // gestures -----------------------------------------------------------------

  toggleFeature(name: string, enabled: boolean): void {
    this.send({ type: "set_config", payload: { config: { [name]: enabled } } });
  }

  confirm(): void {
    this.send({ type: "confirm" });
  }

  sayUtterance(speaker: Speaker, text: string): void {
    this.send({ type: "utterance", payload: { speaker, text } });
  }

  gazeTrigger(): void {
    this.send({ type: "gaze_trigger" });
  }

  gazeFocus(panel: string): void {
    this.send({ type: "gaze_focus", payload: { panel } });
  }

  gazeUnfocus(): void {
    this.send({ type: "gaze_unfocus" });
  }

  pokeTrigger(): void {
    this.send({ type: "trigger_poke" });
  }

  confettiTap(): void {
    this.send({ type: "confetti_tap" });
  }

  end(): void {
    this.send({ type: "end" });
  }

  close(): void {
    this.socket?.close();
  }
}
