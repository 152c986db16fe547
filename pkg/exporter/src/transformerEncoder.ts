import type { PairEncoder, PairEncoding } from './types.js';

/**
 * Pair-wise encoder backed by a pretrained transformer via
 * `@xenova/transformers` (install it separately; model weights are fetched
 * from the configured hub or a local cache). The query and support token
 * lists are joined with the tokenizer's native sentence-pair convention and
 * subword vectors are mean-pooled back to the caller's token boundaries.
 * The model runs frozen; no dropout, so outputs are deterministic.
 */
export class TransformerPairEncoder implements PairEncoder {
    readonly name: string;
    readonly revision: string;
    dim = 0;

    private tokenizer: any;
    private model: any;

    private constructor(modelId: string, revision: string) {
        this.name = modelId;
        this.revision = revision;
    }

    static async load(modelId: string, revision = 'main'): Promise<TransformerPairEncoder> {
        let transformers: any;
        try {
            transformers = await import('@xenova/transformers');
        } catch {
            throw new Error(
                'the transformer encoder needs the optional dependency ' +
                '"@xenova/transformers"; install it with: npm install @xenova/transformers',
            );
        }
        const encoder = new TransformerPairEncoder(modelId, revision);
        encoder.tokenizer = await transformers.AutoTokenizer.from_pretrained(modelId, { revision });
        encoder.model = await transformers.AutoModel.from_pretrained(modelId, { revision });
        return encoder;
    }

    private async wordIds(tokens: string[], side: string): Promise<number[][]> {
        const spans: number[][] = [];
        for (let i = 0; i < tokens.length; i++) {
            const encoded = this.tokenizer.encode(tokens[i], { add_special_tokens: false });
            if (!encoded || encoded.length === 0) {
                throw new Error(
                    `tokenizer alignment failed on ${side} sentence: ` +
                    `token ${i} of [${tokens.join(' ')}] produced no subwords`,
                );
            }
            spans.push(Array.from(encoded, Number));
        }
        return spans;
    }

    async encodePair(queryTokens: string[], supportTokens: string[]): Promise<PairEncoding> {
        const querySpans = await this.wordIds(queryTokens, 'query');
        const supportSpans = await this.wordIds(supportTokens, 'support');

        const cls = Number(this.tokenizer.cls_token_id ?? this.tokenizer.bos_token_id ?? 0);
        const sep = Number(this.tokenizer.sep_token_id ?? this.tokenizer.eos_token_id ?? 0);

        const ids: number[] = [cls];
        const ranges: Array<[number, number]> = [];
        const pushSpans = (spans: number[][]) => {
            for (const span of spans) {
                ranges.push([ids.length, ids.length + span.length]);
                ids.push(...span);
            }
        };
        pushSpans(querySpans);
        ids.push(sep);
        pushSpans(supportSpans);
        ids.push(sep);

        const { Tensor } = await import('@xenova/transformers');
        const shape = [1, ids.length];
        const inputIds = new Tensor('int64', BigInt64Array.from(ids.map(BigInt)), shape);
        const attention = new Tensor('int64', BigInt64Array.from(ids.map(() => 1n)), shape);
        const output = await this.model({ input_ids: inputIds, attention_mask: attention });
        const hidden = output.last_hidden_state; // (1, seq, dim)
        const dim = hidden.dims[2];
        this.dim = dim;
        const data: Float32Array = hidden.data;

        const pool = (count: number, startIndex: number): Float64Array[] => {
            const out: Float64Array[] = [];
            for (let w = 0; w < count; w++) {
                const [lo, hi] = ranges[startIndex + w];
                const vec = new Float64Array(dim);
                for (let p = lo; p < hi; p++) {
                    for (let d = 0; d < dim; d++) vec[d] += data[p * dim + d];
                }
                for (let d = 0; d < dim; d++) vec[d] /= hi - lo;
                out.push(vec);
            }
            return out;
        };
        return {
            query: pool(queryTokens.length, 0),
            support: pool(supportTokens.length, queryTokens.length),
        };
    }
}
