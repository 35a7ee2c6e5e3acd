import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    environmentOptions: {
      jsdom: { url: "http://localhost:8791/" },
    },
    include: ["test/**/*.test.ts"],
  },
});
