// Thin typed client for the play service. The console never computes game
// state itself; everything displayed comes from these responses.

export type SessionStatus = "ongoing" | "success" | "failure";

export interface SessionStart {
  session_id: string;
  choices: string[];
  turn: number;
}

export interface ActResult {
  response_text: string;
  turn: number;
  reward_delta: number;
  cumulative_reward: number;
  status: SessionStatus;
}

export interface SceneJson {
  id: string;
  w: number;
  h: number;
  square: [number, number];
  circle: [number, number];
  obstacles: [number, number][];
  traps: [number, number][];
  solve_length: number;
  difficulty: string;
  split: string;
}

export interface SceneReveal {
  scene: SceneJson;
  solve_length: number;
  turns: number;
  moves: number;
  outcome: SessionStatus;
  cumulative_reward: number;
}

export interface Stats {
  episodes: number;
  success_rate: number | null;
  avg_reward: number | null;
}

export interface StartOptions {
  scene_id?: string;
  split?: string;
  seed?: number;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, init);
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through with the status code only
  }
  if (!response.ok) {
    const message =
      body && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : `request failed with status ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body as T;
}

export class GridtalkApi {
  constructor(private readonly base: string = "") {}

  createSession(options: StartOptions = {}): Promise<SessionStart> {
    return request<SessionStart>(this.base, "/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options),
    });
  }

  act(sessionId: string, actionIndex: number): Promise<ActResult> {
    return request<ActResult>(this.base, `/api/sessions/${sessionId}/act`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action_index: actionIndex }),
    });
  }

  reveal(sessionId: string): Promise<SceneReveal> {
    return request<SceneReveal>(this.base, `/api/sessions/${sessionId}/reveal`);
  }

  stats(): Promise<Stats> {
    return request<Stats>(this.base, "/api/stats");
  }
}
