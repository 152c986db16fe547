import { createHash } from 'node:crypto';
import { createReadStream } from 'node:fs';
import { mkdir, writeFile } from 'node:fs/promises';
import { createInterface } from 'node:readline';
import { join } from 'node:path';
import type { EpisodeRecord, IndexRecord, Manifest, PairEncoder } from './types.js';

export async function readEpisodes(path: string): Promise<EpisodeRecord[]> {
    const episodes: EpisodeRecord[] = [];
    const reader = createInterface({ input: createReadStream(path), crlfDelay: Infinity });
    let lineno = 0;
    for await (const line of reader) {
        lineno += 1;
        if (!line.trim()) continue;
        let record: EpisodeRecord;
        try {
            record = JSON.parse(line);
        } catch (err) {
            throw new Error(`${path}:${lineno}: invalid JSON (${(err as Error).message})`);
        }
        if (!record.query?.tokens || !Array.isArray(record.support)) {
            throw new Error(`${path}:${lineno}: episode record is missing query/support`);
        }
        episodes.push(record);
    }
    if (episodes.length === 0) throw new Error(`${path}: no episodes`);
    return episodes;
}

function toLittleEndianF32(values: number[]): Buffer {
    const buffer = Buffer.allocUnsafe(values.length * 4);
    for (let i = 0; i < values.length; i++) buffer.writeFloatLE(values[i], i * 4);
    return buffer;
}

export interface ExportResult {
    manifest: Manifest;
    outputDir: string;
}

/**
 * Encode every episode pair-wise and write the dump consumed by the
 * toolkit's external_dump embedding source: vectors.bin (little-endian
 * float32), index.jsonl (one record per episode with element offsets and
 * explicit shapes) and manifest.json (encoder id, dimension, checksum).
 */
export async function exportEpisodes(
    episodeFile: string,
    encoder: PairEncoder,
    outputDir: string,
): Promise<ExportResult> {
    const episodes = await readEpisodes(episodeFile);
    await mkdir(outputDir, { recursive: true });

    const chunks: Buffer[] = [];
    const indexLines: string[] = [];
    let offset = 0;

    for (let queryId = 0; queryId < episodes.length; queryId++) {
        const episode = episodes[queryId];
        const pairings = [];
        for (const support of episode.support) {
            pairings.push(await encoder.encodePair(episode.query.tokens, support.tokens));
        }

        const n = episode.query.tokens.length;
        const values: number[] = [];
        for (const pairing of pairings) {
            if (pairing.query.length !== n) {
                throw new Error(
                    `episode ${queryId}: encoder returned ${pairing.query.length} query vectors ` +
                    `for ${n} tokens in [${episode.query.tokens.join(' ')}]`,
                );
            }
            for (const vec of pairing.query) values.push(...vec);
        }
        const supportShapes: Array<[number, number]> = [];
        for (let s = 0; s < pairings.length; s++) {
            const sentence = episode.support[s];
            const encoded = pairings[s].support;
            if (encoded.length !== sentence.tokens.length) {
                throw new Error(
                    `episode ${queryId}: encoder returned ${encoded.length} support vectors ` +
                    `for ${sentence.tokens.length} tokens in [${sentence.tokens.join(' ')}]`,
                );
            }
            supportShapes.push([encoded.length, encoder.dim]);
            for (const vec of encoded) values.push(...vec);
        }
        if (values.some((v) => !Number.isFinite(v))) {
            throw new Error(`episode ${queryId}: encoder produced non-finite values`);
        }

        const record: IndexRecord = {
            query_id: queryId,
            support_id: episode.support_id,
            offset,
            query_shape: [episode.support.length, n, encoder.dim],
            support_shapes: supportShapes,
        };
        indexLines.push(JSON.stringify(record));
        chunks.push(toLittleEndianF32(values));
        offset += values.length;
    }

    const blob = Buffer.concat(chunks);
    const checksum = createHash('sha256').update(blob).digest('hex');
    const manifest: Manifest = {
        format_version: 1,
        encoder: { name: encoder.name, revision: encoder.revision },
        dim: encoder.dim,
        episodes: episodes.length,
        vectors_file: 'vectors.bin',
        index_file: 'index.jsonl',
        checksum_sha256: checksum,
    };

    await writeFile(join(outputDir, 'vectors.bin'), blob);
    await writeFile(join(outputDir, 'index.jsonl'), indexLines.join('\n') + '\n');
    await writeFile(join(outputDir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n');
    return { manifest, outputDir };
}
