import { buildStudio } from "./ui.js";

const root = document.getElementById("app");
if (root) {
  buildStudio(root);
}
