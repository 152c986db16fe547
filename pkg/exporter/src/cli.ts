#!/usr/bin/env node
import { parseArgs } from 'node:util';
import { exportEpisodes } from './exporter.js';
import { HashPairEncoder } from './hashEncoder.js';
import type { PairEncoder } from './types.js';

const USAGE = `usage: fewtag-export --episodes <episodes.jsonl> --out <dump-dir>
                     [--encoder hash|transformer] [--dim N] [--model <id>]

Encodes every episode's query/support pairs and writes vectors.bin,
index.jsonl and manifest.json into the output directory.`;

export async function main(argv: string[]): Promise<number> {
    let values;
    try {
        ({ values } = parseArgs({
            args: argv,
            options: {
                episodes: { type: 'string' },
                out: { type: 'string' },
                encoder: { type: 'string', default: 'hash' },
                dim: { type: 'string', default: '32' },
                model: { type: 'string', default: 'Xenova/bert-base-uncased' },
                help: { type: 'boolean', default: false },
            },
        }));
    } catch (err) {
        console.error((err as Error).message);
        console.error(USAGE);
        return 1;
    }
    if (values.help || !values.episodes || !values.out) {
        console.error(USAGE);
        return values.help ? 0 : 1;
    }

    let encoder: PairEncoder;
    if (values.encoder === 'hash') {
        encoder = new HashPairEncoder(Number(values.dim));
    } else if (values.encoder === 'transformer') {
        const { TransformerPairEncoder } = await import('./transformerEncoder.js');
        encoder = await TransformerPairEncoder.load(values.model!);
    } else {
        console.error(`unknown encoder ${values.encoder}`);
        return 1;
    }

    try {
        const result = await exportEpisodes(values.episodes, encoder, values.out);
        console.log(
            `exported ${result.manifest.episodes} episodes ` +
            `(dim ${result.manifest.dim}, encoder ${result.manifest.encoder.name}) to ${values.out}`,
        );
        return 0;
    } catch (err) {
        console.error(`export failed: ${(err as Error).message}`);
        return 2;
    }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (invokedDirectly) {
    main(process.argv.slice(2)).then((code) => {
        process.exitCode = code;
    });
}
