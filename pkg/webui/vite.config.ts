import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    // Same-origin API during development; the service runs separately.
    proxy: {
      "/segment": "http://127.0.0.1:8761",
      "/mesh": "http://127.0.0.1:8761",
      "/model": "http://127.0.0.1:8761",
      "/health": "http://127.0.0.1:8761",
    },
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
