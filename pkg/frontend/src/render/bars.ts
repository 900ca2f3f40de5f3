/**
 * Posterior bar display: four labeled bars (one per class) whose widths are
 * the smoothed probabilities, with the raw per-window probabilities drawn as
 * thin overlays. Since probabilities sum to 1 the bars tile the full width.
 *
 * The layout math is kept pure so it can be unit-tested without a DOM.
 */

import { CLASS_NAMES, PosteriorMsg } from "../protocol.js";

export interface BarSpec {
  label: string;
  /** Smoothed probability — the main bar width, as a fraction of full width. */
  smoothed: number;
  /** Raw (unsmoothed) probability — thin overlay width. */
  raw: number;
}

/** Pure layout: one BarSpec per class, in class order. */
export function computeBars(frame: PosteriorMsg): BarSpec[] {
  return frame.smoothed.map((p, i) => ({
    label: CLASS_NAMES[i] ?? `class ${i}`,
    smoothed: p,
    raw: frame.probs[i] ?? 0,
  }));
}

/** Build (once) the DOM skeleton for the bars inside `root`. */
export function mountBars(root: HTMLElement, nClasses: number = CLASS_NAMES.length): void {
  root.innerHTML = "";
  root.classList.add("bars");
  for (let i = 0; i < nClasses; i++) {
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = CLASS_NAMES[i] ?? `class ${i}`;
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    const raw = document.createElement("div");
    raw.className = "bar-raw";
    const value = document.createElement("span");
    value.className = "bar-value";
    track.append(fill, raw);
    row.append(label, track, value);
    root.append(row);
  }
}

/** Update the mounted bars in place from one validated frame. */
export function renderBars(root: HTMLElement, frame: PosteriorMsg): void {
  const specs = computeBars(frame);
  const rows = root.querySelectorAll<HTMLElement>(".bar-row");
  specs.forEach((spec, i) => {
    const row = rows[i];
    if (!row) return;
    const fill = row.querySelector<HTMLElement>(".bar-fill");
    const raw = row.querySelector<HTMLElement>(".bar-raw");
    const value = row.querySelector<HTMLElement>(".bar-value");
    if (fill) fill.style.width = `${(spec.smoothed * 100).toFixed(1)}%`;
    if (raw) raw.style.width = `${(spec.raw * 100).toFixed(1)}%`;
    if (value) value.textContent = spec.smoothed.toFixed(2);
  });
}
