import { parseCsv } from './csv.js';
import { ApiError, HttpClient } from './http.js';

export interface ClientConfig {
  baseUrl: string;
  token?: string;
  timeoutSeconds?: number;
  retries?: number;
}

export interface ObjectEntry {
  id: string;
  labels?: Record<string, string>;
  rows?: number;
  link?: { dataset: string; object: string; params?: Record<string, unknown> };
}

export interface DatasetObject {
  objectId: string;
  header: string[];
  rows: string[][];
}

export interface LineageGraph {
  nodes: string[];
  edges: { from: string; to: string; via: string; input_position: number }[];
}

export interface DatasetRecord {
  id: string;
  kind: 'explicit' | 'virtual';
  name: string;
  object_count: number;
  [key: string]: unknown;
}

/**
 * Data-loader view of one dataset. Iteration yields objects exactly as the
 * service materializes them, in index order; no computation happens locally.
 */
export class DatasetView {
  constructor(
    private readonly http: HttpClient,
    readonly datasetId: string,
  ) {}

  async record(): Promise<DatasetRecord> {
    return this.http.json('GET', `/v1/datasets/${this.datasetId}`);
  }

  async objectIndex(): Promise<ObjectEntry[]> {
    const doc = await this.http.json<{ objects: ObjectEntry[] }>(
      'GET',
      `/v1/datasets/${this.datasetId}/objects`,
    );
    return doc.objects;
  }

  async objectCsv(objectId: string): Promise<Uint8Array> {
    return this.http.bytes(`/v1/datasets/${this.datasetId}/objects/${objectId}`);
  }

  async *objects(): AsyncGenerator<DatasetObject> {
    const index = await this.objectIndex();
    for (const entry of index) {
      const raw = await this.objectCsv(entry.id);
      const { header, rows } = parseCsv(new TextDecoder().decode(raw));
      yield { objectId: entry.id, header, rows };
    }
  }

  /**
   * Pure re-chunking across objects in index order: concatenating all batches
   * reproduces the concatenation of all objects' rows exactly.
   */
  async *batches(batchSize: number): AsyncGenerator<string[][]> {
    if (batchSize < 1) throw new ApiError('BAD_REQUEST', 'batchSize must be >= 1', 0);
    let pending: string[][] = [];
    for await (const obj of this.objects()) {
      for (const row of obj.rows) {
        pending.push(row);
        if (pending.length === batchSize) {
          yield pending;
          pending = [];
        }
      }
    }
    if (pending.length > 0) yield pending;
  }
}

export class Client {
  readonly http: HttpClient;

  constructor(config: ClientConfig) {
    this.http = new HttpClient(config);
  }

  /** Declare a virtual dataset from an SSVD YAML document; returns its id. */
  async createVirtual(yamlText: string): Promise<string> {
    const doc = await this.http.json<{ id: string }>('POST', '/v1/datasets/virtual', {
      body: yamlText,
      headers: { 'content-type': 'application/yaml' },
    });
    return doc.id;
  }

  dataset(id: string): DatasetView {
    return new DatasetView(this.http, id);
  }

  async lineage(id: string, direction: 'backward' | 'forward' = 'backward', depth?: number): Promise<LineageGraph> {
    const params = new URLSearchParams({ direction });
    if (depth !== undefined) params.set('depth', String(depth));
    return this.http.json('GET', `/v1/datasets/${id}/lineage?${params}`);
  }

  async listTransforms(): Promise<{ id: string }[]> {
    const doc = await this.http.json<{ transforms: { id: string }[] }>('GET', '/v1/transforms');
    return doc.transforms;
  }
}

export function connect(config: ClientConfig): Client {
  return new Client(config);
}
