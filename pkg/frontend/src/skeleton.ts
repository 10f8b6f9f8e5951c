/**
 * Topology of the 24-joint avatar skeleton used in FRAME_BATCH entries.
 *
 * Joint 0 is the pelvis root and always equals the body translation; every
 * other joint hangs off its parent, so drawing one segment per (child,
 * parent) pair renders the whole figure.
 */

import { N_JOINTS } from "./protocol.js";

export const JOINT_PARENT: readonly number[] = [
  -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

if (JOINT_PARENT.length !== N_JOINTS) {
  throw new Error(`joint parent table has ${JOINT_PARENT.length} rows, expected ${N_JOINTS}`);
}

/** Bone segments as [child, parent] joint index pairs. */
export const BONES: ReadonlyArray<readonly [number, number]> = JOINT_PARENT.map(
  (parent, child) => [child, parent] as const,
).filter(([, parent]) => parent >= 0);
