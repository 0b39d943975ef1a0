/**
 * Entry point: read connection settings, pull /ui-config from the service,
 * mount the console. Settings come from the query string with localStorage
 * fallbacks, so the static bundle needs no per-deployment build.
 */

import { AnnotationApi } from "./api.js";
import { AnnotatorApp } from "./app.js";

function setting(name: string, fallback: string): string {
  const fromQuery = new URLSearchParams(window.location.search).get(name);
  if (fromQuery) {
    window.localStorage.setItem(`annotator.${name}`, fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem(`annotator.${name}`) ?? fallback;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const baseUrl = setting("service", window.location.origin).replace(/\/$/, "");
  const token = setting("token", "");
  const annotator = setting("annotator", "anonymous");

  const api = new AnnotationApi(baseUrl, token || undefined);
  const config = await api.uiConfig();
  const app = new AnnotatorApp(root, api, config, annotator);
  window.addEventListener("pagehide", () => void app.flush());
  await app.start();
}

boot().catch((error) => {
  const root = document.getElementById("app");
  if (root) {
    root.textContent = `failed to reach the review service: ${error}`;
  }
});
