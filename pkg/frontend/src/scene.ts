/**
 * Scene assembly: one skeleton figure per FRAME_BATCH entry.
 *
 * Figures hold references to the parsed joint arrays, so what the renderer
 * draws is bit-for-bit what the server sent. Projection to screen space
 * happens at draw time in scratch buffers and never writes back.
 */

import type { FrameBatch } from "./protocol.js";

export const STALE_TRANSLUCENT_MS = 500;

export interface SkeletonFigure {
  participantId: string;
  personIndex: number;
  color: string;
  /** true once the pose data is older than STALE_TRANSLUCENT_MS */
  translucent: boolean;
  /** world-space joint positions, exactly as received */
  joints: ReadonlyArray<ReadonlyArray<number>>;
}

/**
 * Build the figures for the last accepted batch. `extraStaleMs` lets the UI
 * add time elapsed since the batch arrived, so figures fade even when the
 * stream stalls; headless checks pass 0 to keep the result a pure function
 * of the batch.
 */
export function buildScene(
  batch: FrameBatch | null,
  colorFor: (participantId: string) => string,
  extraStaleMs = 0,
): SkeletonFigure[] {
  if (batch === null) return [];
  return batch.entries.map((entry) => ({
    participantId: entry.participant_id,
    personIndex: entry.person_index,
    color: colorFor(entry.participant_id),
    translucent: entry.staleness_ms + extraStaleMs > STALE_TRANSLUCENT_MS,
    joints: entry.joints,
  }));
}
