import assert from 'node:assert/strict'
import { after, before, test } from 'node:test'
import type { AddressInfo } from 'node:net'

import { DEFAULTS, loadConfig, ConfigError } from '../src/config'
import { createShimServer } from '../src/server'

const server = createShimServer(DEFAULTS)
let base = ''

before(async () => {
  await new Promise<void>((resolve) => server.listen(0, '127.0.0.1', resolve))
  const { port } = server.address() as AddressInfo
  base = `http://127.0.0.1:${port}`
})

after(() => new Promise<void>((resolve, reject) =>
  server.close((err) => (err ? reject(err) : resolve()))))

async function post(path: string, body: unknown): Promise<{ status: number; json: any }> {
  const res = await fetch(`${base}${path}`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  })
  return { status: res.status, json: (await res.json()) as any }
}

test('health endpoint reports ok', async () => {
  const res = await fetch(`${base}/v1/health`)
  assert.equal(res.status, 200)
  const json = (await res.json()) as any
  assert.equal(json.status, 'ok')
})

test('qg returns a question', async () => {
  const { status, json } = await post('/v1/qg', {
    context: 'Waves of water are rolling against some rocks.',
    answer: 'some rocks',
  })
  assert.equal(status, 200)
  assert.equal(typeof json.question, 'string')
  assert.ok(json.question.endsWith('?'))
})

test('qg_boolean returns a question', async () => {
  const { status, json } = await post('/v1/qg_boolean', {
    context: 'Waves of water are rolling against some rocks.',
  })
  assert.equal(status, 200)
  assert.ok(json.question.endsWith('?'))
})

test('qa answers and refuses with the contract shape', async () => {
  const context = 'Waves of water are rolling against some rocks.'
  const on = await post('/v1/qa', { context, question: 'What are waves of water rolling against?' })
  assert.equal(on.status, 200)
  assert.deepEqual(Object.keys(on.json).sort(), ['answer', 'answerable'])
  assert.equal(on.json.answerable, true)

  const off = await post('/v1/qa', {
    context: 'A quiet library reading room.',
    question: 'What are waves of water rolling against?',
  })
  assert.deepEqual(off.json, { answerable: false, answer: '' })
})

test('paraphrase returns up to k distinct questions', async () => {
  const { status, json } = await post('/v1/paraphrase', {
    question: 'What are waves of water rolling against?',
    k: 5,
  })
  assert.equal(status, 200)
  assert.ok(Array.isArray(json.questions))
  assert.ok(json.questions.length <= 5)
  assert.equal(new Set(json.questions).size, json.questions.length)
})

test('missing fields are 400', async () => {
  const { status } = await post('/v1/qg', { context: 'x' })
  assert.equal(status, 400)
})

test('empty strings are 400', async () => {
  const { status } = await post('/v1/qa', { context: '', question: 'Q?' })
  assert.equal(status, 400)
})

test('non-integer k is 400', async () => {
  const { status } = await post('/v1/paraphrase', { question: 'Q?', k: 'five' })
  assert.equal(status, 400)
})

test('malformed JSON is 400', async () => {
  const res = await fetch(`${base}/v1/qg`, { method: 'POST', body: '{nope' })
  assert.equal(res.status, 400)
})

test('unknown endpoint is 404, wrong method is 405', async () => {
  const missing = await post('/v1/nope', {})
  assert.equal(missing.status, 404)
  const got = await fetch(`${base}/v1/qg`)
  assert.equal(got.status, 405)
})

test('config validation rejects bad ports and batch sizes', () => {
  assert.throws(() => loadConfig(['--port', '70000']), ConfigError)
  assert.equal(loadConfig(['--port', '9000']).port, 9000)
  assert.equal(loadConfig([], { AQUALLM_SHIM_PORT: '7001' } as any).port, 7001)
  assert.throws(() => loadConfig([], { AQUALLM_SHIM_PORT: 'nope' } as any), ConfigError)
})
