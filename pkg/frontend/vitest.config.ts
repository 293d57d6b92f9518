import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 60_000,
    // The e2e spec spawns a live service; keep files sequential so only
    // one server runs at a time on the single sandbox core.
    fileParallelism: false,
  },
});
