import { defineConfig } from "vitest/config";

export default defineConfig({
  // Relative asset URLs so the bundle works under any static mount,
  // including the API server's `serve --static-dir`.
  base: "./",
  server: {
    // During development the API runs as a separate process; the built
    // bundle is served by the API process itself, so no proxy is needed
    // in production.
    proxy: {
      "/api": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
  },
});
