import "./style.css";
import { ApiClient } from "./api";
import { startApp } from "./app";

const root = document.querySelector<HTMLElement>("#app");
if (root) {
  startApp(root, new ApiClient()).catch((err) => {
    const message = err instanceof Error ? err.message : String(err);
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.setAttribute("role", "alert");
    banner.textContent = `could not reach the API: ${message}`;
    root.replaceChildren(banner);
  });
}
