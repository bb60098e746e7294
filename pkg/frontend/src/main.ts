// Console wiring: one session per tab, one in-flight request at a time.
// The grid stays hidden until the service reports a terminal status.

import { ApiError, GridtalkApi } from "./api.js";
import type { SceneReveal, StartOptions, Stats } from "./api.js";
import { renderGrid } from "./grid.js";
import { applyAct, canAct, newSession } from "./state.js";
import type { SessionView } from "./state.js";

const REFERENCE_BASELINE = { success_rate: 0.95, avg_reward: 43.4 };

export interface ConsoleController {
  start(options?: StartOptions): Promise<void>;
  act(index: number): Promise<void>;
  refreshStats(): Promise<void>;
  whenIdle(): Promise<void>;
  readonly view: SessionView | null;
}

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

export function initConsole(root: HTMLElement, apiBase = ""): ConsoleController {
  const api = new GridtalkApi(apiBase);

  let view: SessionView | null = null;
  let reveal: SceneReveal | null = null;
  let stats: Stats | null = null;
  let error: string | null = null;
  let busy = false;
  let lastStart: StartOptions = {};
  let pending: Promise<void> = Promise.resolve();

  root.innerHTML = "";
  const banner = el("div", "error-banner hidden");
  const bannerText = el("span", "error-text");
  const retryButton = el("button", "retry", "retry");
  banner.append(bannerText, retryButton);

  const startForm = el("div", "start-form");
  const splitSelect = el("select", "split-select");
  for (const name of ["test", "train", "validation"]) {
    const option = el("option", undefined, name);
    option.value = name;
    splitSelect.appendChild(option);
  }
  const sceneInput = el("input", "scene-input");
  sceneInput.placeholder = "scene id (optional)";
  const startButton = el("button", "start-button", "start episode");
  startForm.append(splitSelect, sceneInput, startButton);

  const header = el("div", "status-bar hidden");
  const sceneLabel = el("span", "scene-label");
  const turnLabel = el("span", "turn-label");
  const rewardLabel = el("span", "reward-label");
  const statusLabel = el("span", "status-label");
  header.append(sceneLabel, turnLabel, rewardLabel, statusLabel);

  const transcript = el("ol", "transcript");
  const choicesBox = el("div", "choices");
  const revealBox = el("div", "reveal hidden");
  const statsBox = el("div", "stats");
  root.append(banner, startForm, header, transcript, choicesBox, revealBox, statsBox);

  function render(): void {
    banner.classList.toggle("hidden", error === null);
    bannerText.textContent = error ?? "";

    header.classList.toggle("hidden", view === null);
    transcript.innerHTML = "";
    choicesBox.innerHTML = "";
    if (view !== null) {
      sceneLabel.textContent = view.sceneId ? `scene ${view.sceneId}` : "random scene";
      turnLabel.textContent = `turn ${view.turn}`;
      rewardLabel.textContent = `reward ${view.cumulativeReward}`;
      statusLabel.textContent = view.status;
      statusLabel.className = `status-label ${view.status}`;
      for (const row of view.rows) {
        const item = el("li", "turn-row");
        item.append(
          el("span", "agent-text", row.agent),
          el("span", "user-text", row.user),
          el("span", "delta", `${row.rewardDelta > 0 ? "+" : ""}${row.rewardDelta}`),
        );
        transcript.appendChild(item);
      }
      view.choices.forEach((text, index) => {
        const button = el("button", "choice", text);
        button.dataset.index = String(index);
        button.disabled = busy || view!.status !== "ongoing";
        button.addEventListener("click", () => void controller.act(index));
        choicesBox.appendChild(button);
      });
    }

    revealBox.innerHTML = "";
    const showReveal = reveal !== null && view !== null && view.status !== "ongoing";
    revealBox.classList.toggle("hidden", !showReveal);
    if (showReveal && reveal !== null) {
      revealBox.append(
        el("h2", undefined, view!.status === "success" ? "solved!" : "out of turns"),
        el(
          "p",
          "reveal-caption",
          `optimal ${reveal.solve_length} moves; you made ${reveal.moves} moves ` +
            `over ${reveal.turns} turns for a total reward of ${reveal.cumulative_reward}`,
        ),
        renderGrid(reveal.scene),
      );
    }

    statsBox.innerHTML = "";
    if (stats !== null) {
      statsBox.append(el("h2", undefined, "local human baseline"));
      const n = stats.episodes;
      const rate = stats.success_rate === null ? "n/a" : stats.success_rate.toFixed(2);
      const avg = stats.avg_reward === null ? "n/a" : stats.avg_reward.toFixed(1);
      statsBox.append(
        el("p", "stats-line", `${n} episode${n === 1 ? "" : "s"}: success ${rate}, avg reward ${avg}`),
        el(
          "p",
          "stats-reference",
          `reference human baseline: success ${REFERENCE_BASELINE.success_rate.toFixed(2)}, ` +
            `avg reward ${REFERENCE_BASELINE.avg_reward.toFixed(1)}`,
        ),
      );
    }
  }

  function track(task: Promise<void>): Promise<void> {
    pending = pending.then(() => task).catch(() => undefined) as Promise<void>;
    return task;
  }

  const controller: ConsoleController = {
    get view() {
      return view;
    },

    start(options: StartOptions = lastStart): Promise<void> {
      if (busy) return Promise.resolve();
      busy = true;
      lastStart = options;
      render();
      const task = (async () => {
        try {
          const started = await api.createSession(options);
          view = newSession(started, options.scene_id ?? null);
          reveal = null;
          error = null;
        } catch (exc) {
          // no phantom session on failure: leave the previous state alone
          error = exc instanceof Error ? exc.message : String(exc);
        } finally {
          busy = false;
          render();
        }
      })();
      return track(task);
    },

    act(index: number): Promise<void> {
      // one in-flight action per session; extra clicks are dropped, and a
      // terminal session is final
      if (busy || !canAct(view)) return Promise.resolve();
      busy = true;
      render();
      const current = view;
      const task = (async () => {
        try {
          const acted = await api.act(current.sessionId, index);
          view = applyAct(current, current.choices[index], acted);
          error = null;
          if (view.status !== "ongoing") {
            reveal = await api.reveal(current.sessionId);
          }
        } catch (exc) {
          if (exc instanceof ApiError) {
            error = exc.message;
          } else {
            error = exc instanceof Error ? exc.message : String(exc);
          }
        } finally {
          busy = false;
          render();
        }
      })();
      return track(task);
    },

    refreshStats(): Promise<void> {
      const task = (async () => {
        try {
          stats = await api.stats();
          error = null;
        } catch (exc) {
          error = exc instanceof Error ? exc.message : String(exc);
        }
        render();
      })();
      return track(task);
    },

    whenIdle(): Promise<void> {
      return pending;
    },
  };

  startButton.addEventListener("click", () => {
    const options: StartOptions = {};
    const sceneId = sceneInput.value.trim();
    if (sceneId) {
      options.scene_id = sceneId;
    } else {
      options.split = splitSelect.value;
    }
    void controller.start(options);
  });
  retryButton.addEventListener("click", () => void controller.start());

  render();
  void controller.refreshStats();
  return controller;
}

// auto-boot in a real page; tests call initConsole themselves
const mount = typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount !== null && mount.childElementCount === 0) {
  initConsole(mount);
}
