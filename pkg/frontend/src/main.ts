import { ApiClient } from "./api.js";
import { App } from "./ui.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const app = new App(root, new ApiClient((input, init) => fetch(input, init)));
app.start(1500);
