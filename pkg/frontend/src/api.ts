// Gateway commands: one user gesture, exactly one POST.  The control
// stays disabled until the reply lands or the 2 s timeout expires.

import { CommandKind, Snapshot } from "./types.js";

export interface CommandResult {
  ok: boolean;
  status: number;
  error?: string;
}

export const COMMAND_TIMEOUT_MS = 2000;

type FetchLike = typeof fetch;

export class GatewayApi {
  private pending = new Set<CommandKind>();

  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = fetch,
    private timeoutMs: number = COMMAND_TIMEOUT_MS,
  ) {}

  isPending(kind: CommandKind): boolean {
    return this.pending.has(kind);
  }

  async getState(): Promise<Snapshot> {
    const resp = await this.fetchImpl(`${this.baseUrl}/state`);
    if (!resp.ok) throw new Error(`GET /state -> ${resp.status}`);
    return (await resp.json()) as Snapshot;
  }

  async send(kind: CommandKind, value: number | string): Promise<CommandResult> {
    if (this.pending.has(kind)) {
      return { ok: false, status: 0, error: `${kind} command already in flight` };
    }
    this.pending.add(kind);
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/${this.path(kind)}`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(this.body(kind, value)),
        signal: controller.signal,
      });
      if (!resp.ok) {
        const detail = await resp.json().catch(() => ({}));
        return {
          ok: false,
          status: resp.status,
          error: (detail as { error?: string }).error ?? `HTTP ${resp.status}`,
        };
      }
      return { ok: true, status: resp.status };
    } catch (err) {
      return { ok: false, status: 0, error: err instanceof Error ? err.message : String(err) };
    } finally {
      clearTimeout(timer);
      this.pending.delete(kind);
    }
  }

  private path(kind: CommandKind): string {
    return kind === "load" ? "load" : kind === "disconnector" ? "disconnector" : "fault";
  }

  private body(kind: CommandKind, value: number | string): Record<string, unknown> {
    if (kind === "load") return { amps: value };
    if (kind === "disconnector") return { position: value };
    return value === "clear" ? { clear: true } : { amps: value };
  }
}
