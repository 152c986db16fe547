import { createHash } from 'node:crypto';
import type { PairEncoder, PairEncoding } from './types.js';

/**
 * Deterministic stand-in for a pretrained contextual encoder.
 *
 * Tokens are split into fixed-width character "subwords"; every subword gets
 * a unit vector seeded from its SHA-256 digest; each subword vector is then
 * mixed with the mean of the whole [query ; SEP ; support] pair so a token's
 * representation depends on the specific pairing; finally subword vectors
 * are mean-pooled back to token granularity. No randomness outside the
 * digests, so identical inputs give identical bytes on every platform.
 */

const SUBWORD_WIDTH = 4;
const SEPARATOR = '[SEP]';

function mulberry32(seed: number): () => number {
    let state = seed >>> 0;
    return () => {
        state = (state + 0x6d2b79f5) >>> 0;
        let t = state;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

function subwordVector(subword: string, dim: number): Float64Array {
    const digest = createHash('sha256').update(subword.toLowerCase(), 'utf8').digest();
    const rand = mulberry32(digest.readUInt32LE(0) ^ digest.readUInt32LE(4));
    const vec = new Float64Array(dim);
    let norm = 0;
    for (let i = 0; i < dim; i++) {
        // Box-Muller on two uniforms keeps components roughly gaussian
        const u = Math.max(rand(), 1e-12);
        const v = rand();
        vec[i] = Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
        norm += vec[i] * vec[i];
    }
    norm = Math.sqrt(norm) || 1;
    for (let i = 0; i < dim; i++) vec[i] /= norm;
    return vec;
}

export function splitSubwords(token: string): string[] {
    if (token.length === 0) return [];
    const pieces: string[] = [];
    for (let i = 0; i < token.length; i += SUBWORD_WIDTH) {
        pieces.push(`${token.slice(i, i + SUBWORD_WIDTH)}@${i / SUBWORD_WIDTH}`);
    }
    return pieces;
}

export class HashPairEncoder implements PairEncoder {
    readonly name = 'hash-mix';
    readonly revision = '1';
    readonly dim: number;
    private readonly mix: number;

    constructor(dim = 32, mix = 0.5) {
        this.dim = dim;
        this.mix = mix;
    }

    async encodePair(queryTokens: string[], supportTokens: string[]): Promise<PairEncoding> {
        const queryPieces = queryTokens.map(splitSubwords);
        const supportPieces = supportTokens.map(splitSubwords);
        for (const [tokens, pieces, side] of [
            [queryTokens, queryPieces, 'query'],
            [supportTokens, supportPieces, 'support'],
        ] as const) {
            const bad = pieces.findIndex((p) => p.length === 0);
            if (bad >= 0) {
                throw new Error(
                    `tokenizer alignment failed on ${side} sentence: ` +
                    `token ${bad} of [${tokens.join(' ')}] produced no subwords`,
                );
            }
        }

        const flat: Float64Array[] = [];
        for (const pieces of queryPieces) for (const p of pieces) flat.push(subwordVector(p, this.dim));
        flat.push(subwordVector(SEPARATOR, this.dim));
        for (const pieces of supportPieces) for (const p of pieces) flat.push(subwordVector(p, this.dim));

        const mean = new Float64Array(this.dim);
        for (const vec of flat) for (let i = 0; i < this.dim; i++) mean[i] += vec[i];
        for (let i = 0; i < this.dim; i++) mean[i] /= flat.length;

        let cursor = 0;
        const pool = (pieces: string[][]): Float64Array[] =>
            pieces.map((tokenPieces) => {
                const out = new Float64Array(this.dim);
                for (let k = 0; k < tokenPieces.length; k++) {
                    const vec = flat[cursor++];
                    for (let i = 0; i < this.dim; i++) out[i] += vec[i] + this.mix * mean[i];
                }
                for (let i = 0; i < this.dim; i++) out[i] /= tokenPieces.length;
                return out;
            });

        const query = pool(queryPieces);
        cursor += 1; // separator
        const support = pool(supportPieces);
        return { query, support };
    }
}
