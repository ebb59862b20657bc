export * from "./protocol.js";
export * from "./client.js";
export { formatView } from "./render.js";
