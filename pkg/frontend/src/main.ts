import { Api } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
new App({ doc: document, api: new Api(base) }).start();
