import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: "./tests/server.setup.ts",
    testTimeout: 300_000,
    hookTimeout: 120_000,
  },
});
