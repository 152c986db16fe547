export { exportEpisodes, readEpisodes } from './exporter.js';
export { HashPairEncoder, splitSubwords } from './hashEncoder.js';
export type {
    EpisodeRecord,
    IndexRecord,
    Manifest,
    PairEncoder,
    PairEncoding,
    SentenceRecord,
} from './types.js';
