/** Extractive question answering with no-answer detection.
 *
 * A question is considered on-topic when at least half of its content
 * words occur in the context; the answer is then the longest contiguous
 * context span whose tokens the question does not mention. Off-topic
 * questions map to { answerable: false, answer: "" }, the SQuAD2-style
 * refusal the pipeline's filter expects.
 */

import { STOPWORDS, Tok, tokenize } from './text'

export interface QaResult {
  answerable: boolean
  answer: string
}

const NO_ANSWER: QaResult = { answerable: false, answer: '' }

export function answerQuestion(context: string, question: string): QaResult {
  const ctx = tokenize(context)
  const q = tokenize(question)
  if (ctx.length === 0 || q.length === 0) return NO_ANSWER

  const ctxNorms = new Set(ctx.map((t) => t.norm))
  const content = q.filter((t) => !STOPWORDS.has(t.norm))
  if (content.length === 0) return NO_ANSWER
  const matched = content.filter((t) => ctxNorms.has(t.norm)).length
  if (matched / content.length < 0.5) return NO_ANSWER

  const qNorms = new Set(q.map((t) => t.norm))
  let best: Tok[] = []
  let run: Tok[] = []
  for (const tok of ctx) {
    if (!qNorms.has(tok.norm)) {
      run.push(tok)
      if (run.length > best.length) best = run.slice()
    } else {
      run = []
    }
  }
  if (best.length === 0) return NO_ANSWER
  return { answerable: true, answer: best.map((t) => t.surface).join(' ') }
}
