export interface SentenceRecord {
    tokens: string[];
    tags: string[];
}

export interface EpisodeRecord {
    domain: string;
    support_id: string;
    query: SentenceRecord;
    support: SentenceRecord[];
}

/**
 * One encoded query/support pairing: per-token vectors for the query copy
 * conditioned on this support sentence, and for the support sentence
 * conditioned on the query.
 */
export interface PairEncoding {
    query: Float64Array[];
    support: Float64Array[];
}

export interface PairEncoder {
    readonly name: string;
    readonly revision: string;
    readonly dim: number;
    encodePair(queryTokens: string[], supportTokens: string[]): Promise<PairEncoding>;
}

export interface IndexRecord {
    query_id: number;
    support_id: string;
    offset: number; // element offset into vectors.bin (float32 units)
    query_shape: [number, number, number]; // (N_S, n, dim)
    support_shapes: Array<[number, number]>;
}

export interface Manifest {
    format_version: number;
    encoder: { name: string; revision: string };
    dim: number;
    episodes: number;
    vectors_file: string;
    index_file: string;
    checksum_sha256: string;
}
