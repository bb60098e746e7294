// Session view-state: a pure mirror of what the service has said so far.
// The reducers never invent values; rows and totals come verbatim from
// responses, so the displayed reward always equals the service's number.

import type { ActResult, SessionStart, SessionStatus } from "./api.js";

export interface TranscriptRow {
  agent: string;
  user: string;
  rewardDelta: number;
}

export interface SessionView {
  sessionId: string;
  sceneId: string | null;
  choices: string[];
  rows: TranscriptRow[];
  turn: number;
  cumulativeReward: number;
  status: SessionStatus;
}

export function newSession(start: SessionStart, sceneId: string | null = null): SessionView {
  return {
    sessionId: start.session_id,
    sceneId,
    choices: start.choices,
    rows: [],
    turn: start.turn,
    cumulativeReward: 0,
    status: "ongoing",
  };
}

export function applyAct(view: SessionView, choiceText: string, act: ActResult): SessionView {
  return {
    ...view,
    rows: [...view.rows, { agent: choiceText, user: act.response_text, rewardDelta: act.reward_delta }],
    turn: act.turn,
    cumulativeReward: act.cumulative_reward,
    status: act.status,
  };
}

export function canAct(view: SessionView | null): view is SessionView {
  return view !== null && view.status === "ongoing";
}
