/** Shim configuration from a JSON file, environment, and flags. */

import * as fs from 'node:fs'

export interface ShimConfig {
  qgModelId: string
  qaModelId: string
  paraphraseModelId: string
  port: number
  device: string
  maxBatch: number
}

export const DEFAULTS: ShimConfig = {
  qgModelId: 'rule-qg/v1',
  qaModelId: 'rule-qa/v1',
  paraphraseModelId: 'rule-paraphrase/v1',
  port: 8008,
  device: 'cpu',
  maxBatch: 8,
}

export class ConfigError extends Error {}

export function validate(cfg: ShimConfig): ShimConfig {
  if (!Number.isInteger(cfg.port) || cfg.port < 0 || cfg.port > 65535) {
    throw new ConfigError(`port out of range: ${cfg.port}`)
  }
  if (!Number.isInteger(cfg.maxBatch) || cfg.maxBatch < 1) {
    throw new ConfigError(`max_batch must be >= 1, got ${cfg.maxBatch}`)
  }
  return cfg
}

export function loadConfig(argv: string[] = [], env = process.env): ShimConfig {
  let cfg: ShimConfig = { ...DEFAULTS }

  const fileIdx = argv.indexOf('--config')
  if (fileIdx >= 0) {
    const path = argv[fileIdx + 1]
    if (!path) throw new ConfigError('--config requires a path')
    const doc = JSON.parse(fs.readFileSync(path, 'utf-8'))
    cfg = {
      ...cfg,
      qgModelId: doc.qg_model_id ?? cfg.qgModelId,
      qaModelId: doc.qa_model_id ?? cfg.qaModelId,
      paraphraseModelId: doc.paraphrase_model_id ?? cfg.paraphraseModelId,
      port: doc.port ?? cfg.port,
      device: doc.device ?? cfg.device,
      maxBatch: doc.max_batch ?? cfg.maxBatch,
    }
  }

  if (env.AQUALLM_SHIM_PORT) cfg.port = Number(env.AQUALLM_SHIM_PORT)
  if (env.AQUALLM_SHIM_QG_MODEL) cfg.qgModelId = env.AQUALLM_SHIM_QG_MODEL
  if (env.AQUALLM_SHIM_QA_MODEL) cfg.qaModelId = env.AQUALLM_SHIM_QA_MODEL
  if (env.AQUALLM_SHIM_PARAPHRASE_MODEL) cfg.paraphraseModelId = env.AQUALLM_SHIM_PARAPHRASE_MODEL

  const portIdx = argv.indexOf('--port')
  if (portIdx >= 0) cfg.port = Number(argv[portIdx + 1])

  return validate(cfg)
}
