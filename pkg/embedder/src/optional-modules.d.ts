// Optional peer dependency, loaded dynamically; typed as `any` so builds
// succeed when it is not installed.
declare module "@huggingface/transformers";
