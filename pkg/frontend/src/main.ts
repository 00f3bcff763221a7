import { App } from "./app.js";

const baseUrl = new URLSearchParams(window.location.search).get("api")
  ?? "http://127.0.0.1:8760";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
new App(root, baseUrl);
