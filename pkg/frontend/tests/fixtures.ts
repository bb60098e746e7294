// Shared test fixtures: the service address and known scenes whose solve
// lengths are small enough to script by hand.

import type { SceneJson } from "../src/api.js";

export const SERVICE_BASE = "http://127.0.0.1:8917";

export const MOVE_UP_INDEX = 5; // "Move the square up"
export const ASK_ABOVE_INDEX = 0; // "Is the square above the circle?"

// square (0,0), circle (0,2): two ups, optimal reward 59
export const TWO_UP: SceneJson = {
  id: "two-up",
  w: 6,
  h: 6,
  square: [0, 0],
  circle: [0, 2],
  obstacles: [],
  traps: [],
  solve_length: 2,
  difficulty: "short",
  split: "test",
};

// square (0,0), circle (2,0) with a trap between: optimal 4 either way
export const TRAPPED: SceneJson = {
  id: "trapped",
  w: 6,
  h: 6,
  square: [0, 0],
  circle: [2, 0],
  obstacles: [],
  traps: [[1, 0]],
  solve_length: 4,
  difficulty: "medium",
  split: "test",
};

// the worked 6x6 example: six obstacles, six traps
export const WORKED_EXAMPLE: SceneJson = {
  id: "worked-example",
  w: 6,
  h: 6,
  square: [4, 5],
  circle: [2, 3],
  obstacles: [
    [0, 0],
    [0, 3],
    [1, 3],
    [3, 4],
    [5, 4],
    [2, 5],
  ],
  traps: [
    [1, 0],
    [5, 1],
    [3, 2],
    [2, 4],
    [1, 5],
    [3, 5],
  ],
  solve_length: 4,
  difficulty: "medium",
  split: "test",
};

export const FIXTURE_SCENES: SceneJson[] = [TWO_UP, TRAPPED, WORKED_EXAMPLE];
