// The frontend lives beside the engine repo's shared fixture tree; tests
// resolve fixtures relative to this file so the suite runs from any cwd.

import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

const here = dirname(fileURLToPath(import.meta.url));

export const repoRoot = join(here, "..", "..");

export function fixturePath(...parts: string[]): string {
  return join(repoRoot, "fixtures", ...parts);
}
