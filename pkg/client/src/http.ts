export interface HttpOptions {
  baseUrl: string;
  token?: string;
  timeoutSeconds?: number;
  retries?: number;
}

/** Error carrying the service's machine code alongside the HTTP status. */
export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly details?: Record<string, unknown>,
  ) {
    super(`${code}: ${message}`);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class HttpClient {
  constructor(private readonly opts: HttpOptions) {}

  /** Retries apply only to idempotent requests (GETs); writes run once. */
  async request(method: string, path: string, init?: RequestInit): Promise<Response> {
    const retries = method === 'GET' ? this.opts.retries ?? 2 : 0;
    const timeoutMs = (this.opts.timeoutSeconds ?? 30) * 1000;
    let attempt = 0;
    for (;;) {
      const controller = new AbortController();
      const timer = setTimeout(() => controller.abort(), timeoutMs);
      try {
        const headers = new Headers(init?.headers);
        if (this.opts.token) headers.set('authorization', `Bearer ${this.opts.token}`);
        const resp = await fetch(this.opts.baseUrl + path, {
          ...init,
          method,
          headers,
          signal: controller.signal,
        });
        if (resp.status >= 500 && attempt < retries) {
          attempt++;
          await sleep(100 * 2 ** attempt);
          continue;
        }
        if (!resp.ok) {
          let code = `HTTP_${resp.status}`;
          let message = resp.statusText;
          let details: Record<string, unknown> | undefined;
          try {
            const doc = await resp.json();
            code = doc.code ?? code;
            message = doc.message ?? message;
            details = doc.details;
          } catch {
            /* non-JSON error body */
          }
          throw new ApiError(code, message, resp.status, details);
        }
        return resp;
      } catch (err) {
        if (err instanceof ApiError) throw err;
        if (attempt < retries) {
          attempt++;
          await sleep(100 * 2 ** attempt);
          continue;
        }
        throw new ApiError('CONNECTION', String(err), 0);
      } finally {
        clearTimeout(timer);
      }
    }
  }

  async json<T>(method: string, path: string, init?: RequestInit): Promise<T> {
    const resp = await this.request(method, path, init);
    return (await resp.json()) as T;
  }

  async bytes(path: string): Promise<Uint8Array> {
    const resp = await this.request('GET', path);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
