import { describe, expect, it } from "vitest";
import { cameraEye, orbit, projectPoint, zoom, type OrbitCamera } from "../src/camera.js";

function frontCamera(): OrbitCamera {
  // eye at (0, 0, -1) looking down +z toward the target
  return { target: [0, 0, 3], distance: 4, yaw: Math.PI, pitch: 0, fovY: Math.PI / 4 };
}

describe("orbit camera", () => {
  it("places the eye opposite the yaw direction", () => {
    const eye = cameraEye(frontCamera());
    expect(eye[0]).toBeCloseTo(0, 9);
    expect(eye[1]).toBeCloseTo(0, 9);
    expect(eye[2]).toBeCloseTo(-1, 9);
  });

  it("projects the target to the canvas center", () => {
    const cam = frontCamera();
    const p = projectPoint(cam, cam.target, 800, 600)!;
    expect(p.x).toBeCloseTo(400, 6);
    expect(p.y).toBeCloseTo(300, 6);
    expect(p.depth).toBeCloseTo(4, 9);
  });

  it("maps world +x right and +y up on screen", () => {
    const cam = frontCamera();
    const right = projectPoint(cam, [1, 0, 3], 800, 600)!;
    const up = projectPoint(cam, [0, 1, 3], 800, 600)!;
    expect(right.x).toBeGreaterThan(400);
    expect(right.y).toBeCloseTo(300, 6);
    expect(up.y).toBeLessThan(300);
    expect(up.x).toBeCloseTo(400, 6);
  });

  it("drops points behind the eye", () => {
    expect(projectPoint(frontCamera(), [0, 0, -2], 800, 600)).toBeNull();
  });

  it("shrinks farther points", () => {
    const cam = frontCamera();
    const near = projectPoint(cam, [0.5, 0, 2], 800, 600)!;
    const far = projectPoint(cam, [0.5, 0, 7], 800, 600)!;
    expect(near.x - 400).toBeGreaterThan(far.x - 400);
    expect(far.depth).toBeGreaterThan(near.depth);
  });

  it("clamps pitch and zoom", () => {
    const cam = frontCamera();
    orbit(cam, 0, 10);
    expect(cam.pitch).toBeLessThan(Math.PI / 2);
    orbit(cam, 0, -20);
    expect(cam.pitch).toBeGreaterThan(-Math.PI / 2);
    for (let i = 0; i < 100; i++) zoom(cam, 0.5);
    expect(cam.distance).toBe(0.5);
    for (let i = 0; i < 100; i++) zoom(cam, 2);
    expect(cam.distance).toBe(40);
  });
});
