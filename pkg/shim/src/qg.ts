/** Question generation: turn (caption, answer span) into a wh-question.
 *
 * The answer span is removed from the caption and the remainder becomes
 * the question body, with subject-aux inversion when an auxiliary is
 * available. Purely rule-driven, so identical inputs always produce the
 * identical question.
 */

import { AUX, Tok, findSpan, isNumericWord, lowerFirst, tokenize, upperFirst } from './text'

function surfacesWithoutSentenceCase(toks: Tok[], sentenceInitial: Tok | null): string[] {
  return toks.map((t) => (t === sentenceInitial ? lowerFirst(t.surface) : t.surface))
}

export function generateQuestion(context: string, answer: string): string {
  const ctx = tokenize(context)
  const ans = tokenize(answer)
  const start = findSpan(ctx, ans)
  if (start < 0 || ctx.length === 0) {
    return 'What is happening in this scene?'
  }
  const end = start + ans.length - 1
  const remainder = ctx.filter((_, i) => i < start || i > end)
  const sentenceInitial = start === 0 ? null : ctx[0]

  if (ans.every((t) => isNumericWord(t.norm))) {
    const tail = ctx.slice(end + 1)
    if (tail.length === 0) return 'How many are mentioned?'
    return `How many ${surfacesWithoutSentenceCase(tail, null).join(' ')}?`
  }

  if (remainder.length === 0) {
    return 'What is happening in this scene?'
  }
  if (start === 0) {
    // answer was the subject: no inversion needed
    return `What ${remainder.map((t) => t.surface).join(' ')}?`
  }
  const auxIdx = remainder.findIndex((t) => AUX.has(t.norm))
  if (auxIdx >= 0) {
    const aux = remainder[auxIdx]
    const rest = remainder.filter((_, i) => i !== auxIdx)
    return `What ${aux.norm} ${surfacesWithoutSentenceCase(rest, sentenceInitial).join(' ')}?`
  }
  return `What goes with ${surfacesWithoutSentenceCase(remainder, sentenceInitial).join(' ')}?`
}

export function generateBooleanQuestion(context: string): string {
  const ctx = tokenize(context)
  if (ctx.length === 0) return 'Is it true?'
  const auxIdx = ctx.findIndex((t) => AUX.has(t.norm))
  if (auxIdx >= 0) {
    const rest = ctx.filter((_, i) => i !== auxIdx)
    const body = surfacesWithoutSentenceCase(rest, auxIdx === 0 ? null : ctx[0])
    return `${upperFirst(ctx[auxIdx].norm)} ${body.join(' ')}?`
  }
  const body = surfacesWithoutSentenceCase(ctx, ctx[0])
  return `Is it true that ${body.join(' ')}?`
}
