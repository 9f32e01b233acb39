export { connect, Client, DatasetView } from './client.js';
export type {
  ClientConfig,
  DatasetObject,
  DatasetRecord,
  LineageGraph,
  ObjectEntry,
} from './client.js';
export { ApiError, HttpClient } from './http.js';
export { parseCsv } from './csv.js';
export type { ParsedTable } from './csv.js';
