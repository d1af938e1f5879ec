import { bootstrap } from './app.js';

void bootstrap(document);
