import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the live round trip boots a real gateway before asserting
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
