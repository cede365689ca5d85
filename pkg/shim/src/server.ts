/** HTTP server exposing the five gateway endpoints.
 *
 * POST /v1/qg          {context, answer}   -> {question}
 * POST /v1/qg_boolean  {context}           -> {question}
 * POST /v1/qa          {context, question} -> {answerable, answer}
 * POST /v1/paraphrase  {question, k}       -> {questions}
 * GET  /v1/health                          -> {status: "ok"}
 *
 * Bad request bodies return 400 (terminal for the record on the client
 * side); engine failures return 500 (retryable).
 */

import * as http from 'node:http'

import { ConfigError, ShimConfig, loadConfig } from './config'
import { paraphraseQuestion } from './paraphrase'
import { answerQuestion } from './qa'
import { generateBooleanQuestion, generateQuestion } from './qg'

const MAX_BODY_BYTES = 1 << 20

class BadRequest extends Error {}

function requireString(body: Record<string, unknown>, key: string): string {
  const value = body[key]
  if (typeof value !== 'string' || value.length === 0) {
    throw new BadRequest(`field "${key}" must be a non-empty string`)
  }
  return value
}

function requirePositiveInt(body: Record<string, unknown>, key: string): number {
  const value = body[key]
  if (typeof value !== 'number' || !Number.isInteger(value) || value < 1) {
    throw new BadRequest(`field "${key}" must be a positive integer`)
  }
  return value
}

type Handler = (body: Record<string, unknown>) => unknown

function buildRoutes(cfg: ShimConfig): Map<string, Handler> {
  return new Map<string, Handler>([
    ['/v1/qg', (body) => ({
      question: generateQuestion(requireString(body, 'context'), requireString(body, 'answer')),
    })],
    ['/v1/qg_boolean', (body) => ({
      question: generateBooleanQuestion(requireString(body, 'context')),
    })],
    ['/v1/qa', (body) =>
      answerQuestion(requireString(body, 'context'), requireString(body, 'question')),
    ],
    ['/v1/paraphrase', (body) => ({
      questions: paraphraseQuestion(
        requireString(body, 'question'),
        Math.min(requirePositiveInt(body, 'k'), cfg.maxBatch * 4),
      ),
    })],
  ])
}

function sendJson(res: http.ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload)
  res.writeHead(status, { 'Content-Type': 'application/json; charset=utf-8' })
  res.end(body)
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = []
    let size = 0
    req.on('data', (chunk: Buffer) => {
      size += chunk.length
      if (size > MAX_BODY_BYTES) {
        reject(new BadRequest('request body too large'))
        req.destroy()
        return
      }
      chunks.push(chunk)
    })
    req.on('end', () => resolve(Buffer.concat(chunks).toString('utf-8')))
    req.on('error', reject)
  })
}

export function createShimServer(cfg: ShimConfig): http.Server {
  const routes = buildRoutes(cfg)
  return http.createServer(async (req, res) => {
    const url = req.url ?? ''
    try {
      if (req.method === 'GET' && url === '/v1/health') {
        sendJson(res, 200, {
          status: 'ok',
          qg_model: cfg.qgModelId,
          qa_model: cfg.qaModelId,
          paraphrase_model: cfg.paraphraseModelId,
        })
        return
      }
      const handler = routes.get(url)
      if (!handler) {
        sendJson(res, 404, { error: `no such endpoint: ${url}` })
        return
      }
      if (req.method !== 'POST') {
        sendJson(res, 405, { error: 'POST required' })
        return
      }
      const raw = await readBody(req)
      let body: Record<string, unknown>
      try {
        body = JSON.parse(raw)
      } catch {
        throw new BadRequest('request body is not valid JSON')
      }
      if (typeof body !== 'object' || body === null || Array.isArray(body)) {
        throw new BadRequest('request body must be a JSON object')
      }
      sendJson(res, 200, handler(body))
    } catch (err) {
      if (err instanceof BadRequest) {
        sendJson(res, 400, { error: err.message })
      } else {
        console.error(`shim: ${url} failed:`, err)
        sendJson(res, 500, { error: 'inference failure' })
      }
    }
  })
}

export function main(): void {
  let cfg: ShimConfig
  try {
    cfg = loadConfig(process.argv.slice(2))
  } catch (err) {
    if (err instanceof ConfigError || err instanceof SyntaxError) {
      console.error(`shim: invalid configuration: ${(err as Error).message}`)
      process.exit(1)
    }
    throw err
  }
  const server = createShimServer(cfg)
  server.listen(cfg.port, () => {
    const address = server.address()
    const port = typeof address === 'object' && address ? address.port : cfg.port
    console.error(`shim: listening on port ${port} (qg=${cfg.qgModelId}, qa=${cfg.qaModelId}, paraphrase=${cfg.paraphraseModelId})`)
  })
}

if (require.main === module) {
  main()
}
