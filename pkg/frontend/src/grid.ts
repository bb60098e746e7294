// Post-episode grid rendering: traps black, obstacles grey, the square and
// circle in their own colors. Row 0 of the DOM is the TOP of the grid
// (highest y), so "up" on screen matches "up" in the game.

import type { SceneJson } from "./api.js";

export type CellKind = "square" | "circle" | "obstacle" | "trap" | "empty";

export function cellKind(scene: SceneJson, x: number, y: number): CellKind {
  const match = (p: [number, number]) => p[0] === x && p[1] === y;
  if (match(scene.square)) return "square";
  if (match(scene.circle)) return "circle";
  if (scene.obstacles.some(match)) return "obstacle";
  if (scene.traps.some(match)) return "trap";
  return "empty";
}

export function renderGrid(scene: SceneJson): HTMLElement {
  const grid = document.createElement("div");
  grid.className = "grid";
  grid.style.gridTemplateColumns = `repeat(${scene.w}, 2rem)`;
  for (let y = scene.h - 1; y >= 0; y--) {
    for (let x = 0; x < scene.w; x++) {
      const cell = document.createElement("div");
      cell.className = `cell ${cellKind(scene, x, y)}`;
      cell.dataset.x = String(x);
      cell.dataset.y = String(y);
      grid.appendChild(cell);
    }
  }
  return grid;
}
