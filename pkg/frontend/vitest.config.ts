import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // live tests spawn a real server and wait on sockets
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
