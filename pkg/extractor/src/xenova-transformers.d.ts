// Optional runtime dependency, loaded dynamically when --model is a CLIP
// checkpoint id; installed separately (`npm install @xenova/transformers`).
declare module "@xenova/transformers";
