/**
 * Orbit camera: yaw/pitch around a target point at a fixed distance, with a
 * perspective projection into canvas pixels. World axes follow the capture
 * convention (y up, people standing a few meters down +z), so the default
 * pose looks at the room from where the physical camera would sit.
 */

export interface OrbitCamera {
  target: [number, number, number];
  distance: number;
  /** radians around the world y axis */
  yaw: number;
  /** radians above the horizon, clamped shy of the poles */
  pitch: number;
  /** vertical field of view in radians */
  fovY: number;
}

export interface Projected {
  x: number;
  y: number;
  /** distance along the view axis, for size attenuation and draw order */
  depth: number;
}

const NEAR = 0.05;
const PITCH_LIMIT = Math.PI / 2 - 0.05;

export function defaultCamera(): OrbitCamera {
  return { target: [0, 0.2, 3.0], distance: 4.5, yaw: Math.PI, pitch: 0.2, fovY: Math.PI / 4 };
}

export function cameraEye(cam: OrbitCamera): [number, number, number] {
  const cp = Math.cos(cam.pitch);
  return [
    cam.target[0] + cam.distance * cp * Math.sin(cam.yaw),
    cam.target[1] + cam.distance * Math.sin(cam.pitch),
    cam.target[2] + cam.distance * cp * Math.cos(cam.yaw),
  ];
}

export function orbit(cam: OrbitCamera, dYaw: number, dPitch: number): void {
  cam.yaw += dYaw;
  cam.pitch = Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, cam.pitch + dPitch));
}

export function zoom(cam: OrbitCamera, factor: number): void {
  cam.distance = Math.min(40, Math.max(0.5, cam.distance * factor));
}

/** Project a world point; null when it falls behind the near plane. */
export function projectPoint(
  cam: OrbitCamera,
  p: ReadonlyArray<number>,
  width: number,
  height: number,
): Projected | null {
  const eye = cameraEye(cam);
  let fx = cam.target[0] - eye[0];
  let fy = cam.target[1] - eye[1];
  let fz = cam.target[2] - eye[2];
  const fn = Math.hypot(fx, fy, fz);
  fx /= fn;
  fy /= fn;
  fz /= fn;
  // right = up x forward, trueUp = forward x right (y-up world)
  let rx = fz;
  let ry = 0;
  let rz = -fx;
  const rn = Math.hypot(rx, ry, rz);
  if (rn < 1e-9) return null;
  rx /= rn;
  rz /= rn;
  const ux = fy * rz - fz * ry;
  const uy = fz * rx - fx * rz;
  const uz = fx * ry - fy * rx;

  const dx = p[0] - eye[0];
  const dy = p[1] - eye[1];
  const dz = p[2] - eye[2];
  const depth = dx * fx + dy * fy + dz * fz;
  if (depth < NEAR) return null;
  const scale = height / 2 / Math.tan(cam.fovY / 2);
  return {
    x: width / 2 + (scale * (dx * rx + dy * ry + dz * rz)) / depth,
    y: height / 2 - (scale * (dx * ux + dy * uy + dz * uz)) / depth,
    depth,
  };
}
