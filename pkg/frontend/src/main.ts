import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8703";
const root = document.getElementById("app");
if (root) {
  createApp(root, new ApiClient(base));
}
