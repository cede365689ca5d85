/** Question paraphrasing via fixed rewrite rules, ranked in rule order. */

import { lowerFirst } from './text'

type Rule = (q: string) => string

const stripMark = (q: string) => (q.endsWith('?') ? q.slice(0, -1) : q)

const RULES: Rule[] = [
  (q) => `Could you tell me ${lowerFirst(stripMark(q))}?`,
  (q) => `In the recording, ${lowerFirst(q)}`,
  (q) => `${stripMark(q)}, please?`,
  (q) => `Specifically, ${lowerFirst(q)}`,
  (q) => (q.startsWith('What ') ? `Just what ${q.slice(5)}` : `Now, ${lowerFirst(q)}`),
]

export function paraphraseQuestion(question: string, k: number): string[] {
  const out: string[] = []
  const seen = new Set<string>([normalize(question)])
  for (const rule of RULES) {
    if (out.length >= k) break
    const rewrite = rule(question)
    if (!rewrite.endsWith('?')) continue
    const norm = normalize(rewrite)
    if (seen.has(norm)) continue
    seen.add(norm)
    out.push(rewrite)
  }
  return out
}

function normalize(q: string): string {
  return q.toLowerCase().split(/\s+/).filter(Boolean).join(' ')
}
