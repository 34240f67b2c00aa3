import { Client } from "./api.js";
import { mountConsole } from "./view.js";

// ?api=http://host:port points the console at a service on another
// origin; default is same-origin (behind a proxy or the service host).
const base = new URLSearchParams(location.search).get("api") ?? "";
const root = document.getElementById("app");
if (root) mountConsole(root, new Client(base));
