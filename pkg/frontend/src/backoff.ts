/** Reconnect backoff: 0.5 s doubling per consecutive failure, capped at 8 s. */

export const RECONNECT_BASE_MS = 500;
export const RECONNECT_CAP_MS = 8000;

export function reconnectDelayMs(attempt: number): number {
  const step = Math.max(0, Math.floor(attempt));
  // 2**step overflows to Infinity for huge steps; the cap absorbs that
  return Math.min(RECONNECT_BASE_MS * 2 ** step, RECONNECT_CAP_MS);
}
