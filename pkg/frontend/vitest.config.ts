import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // every wrapped operation spawns the Python CLI; parity loops run
    // hundreds of invocations
    testTimeout: 600_000,
    hookTimeout: 600_000,
  },
});
