/** Shared tokenization for the three engines. */

export interface Tok {
  /** surface form with edge punctuation stripped */
  surface: string
  /** lowercase surface, used for all matching */
  norm: string
}

const EDGE_PUNCT = /^[^\p{L}\p{N}]+|[^\p{L}\p{N}]+$/gu

export function tokenize(text: string): Tok[] {
  return text
    .split(/\s+/)
    .filter(Boolean)
    .map((raw) => {
      const stripped = raw.replace(EDGE_PUNCT, '')
      const surface = stripped || raw
      return { surface, norm: surface.toLowerCase() }
    })
    .filter((t) => t.norm.length > 0)
}

export const AUX = new Set([
  'is', 'are', 'was', 'were', 'am', 'be', 'been', 'being',
  'has', 'have', 'had', 'do', 'does', 'did',
  'can', 'could', 'will', 'would', 'shall', 'should', 'may', 'might', 'must',
])

export const WH = new Set(['what', 'which', 'who', 'whom', 'whose', 'where', 'when', 'why', 'how'])

/** Words ignored when judging whether a question is about a context. */
export const STOPWORDS = new Set([
  ...AUX, ...WH,
  'a', 'an', 'the', 'of', 'in', 'on', 'at', 'to', 'and', 'or', 'it', 'its',
  'this', 'that', 'these', 'those', 'some', 'any', 'many', 'much', 'there',
  'true', 'goes', 'with', 'you', 'me', 'tell', 'please', 'say', 'now',
  'just', 'specifically', 'recording', 'scene', 'happening',
])

const NUMBER_WORDS = new Set([
  'zero', 'one', 'two', 'three', 'four', 'five', 'six', 'seven', 'eight',
  'nine', 'ten', 'eleven', 'twelve', 'thirteen', 'fourteen', 'fifteen',
  'sixteen', 'seventeen', 'eighteen', 'nineteen', 'twenty', 'thirty',
  'forty', 'fifty', 'sixty', 'seventy', 'eighty', 'ninety', 'hundred',
  'thousand', 'million',
])

export function isNumericWord(norm: string): boolean {
  return /^\d+([.,]\d+)?$/.test(norm) || NUMBER_WORDS.has(norm)
}

export function lowerFirst(word: string): string {
  if (word === 'I' || /^[A-Z]{2,}/.test(word)) return word
  return word.charAt(0).toLowerCase() + word.slice(1)
}

export function upperFirst(word: string): string {
  return word.charAt(0).toUpperCase() + word.slice(1)
}

/** First index whose norm matches consecutive answer norms, or -1. */
export function findSpan(context: Tok[], answer: Tok[]): number {
  if (answer.length === 0 || answer.length > context.length) return -1
  outer: for (let i = 0; i + answer.length <= context.length; i++) {
    for (let j = 0; j < answer.length; j++) {
      if (context[i + j].norm !== answer[j].norm) continue outer
    }
    return i
  }
  return -1
}
