import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // the integration suite boots a real server process and waits out a
    // full alignment sweep plus a quiescence window
    testTimeout: 60_000,
    hookTimeout: 30_000,
  },
});
