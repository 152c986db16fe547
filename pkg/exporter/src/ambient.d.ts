// The transformer encoder is optional; the package may be absent at build time.
declare module '@xenova/transformers';
