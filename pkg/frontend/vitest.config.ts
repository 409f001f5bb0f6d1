import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // the parity suite boots real server processes
    testTimeout: 30_000,
    hookTimeout: 90_000,
  },
});
