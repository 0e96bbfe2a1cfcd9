export interface DatasetRecord {
  id: number;
  instruction: string;
  response?: string;
  source?: string;
}

/** Raised for malformed inputs; `file` and `line` locate the offence. */
export class DataError extends Error {
  constructor(message: string, readonly file?: string, readonly line?: number) {
    super(line !== undefined ? `${file}: line ${line}: ${message}` : message);
    this.name = "DataError";
  }
}

export class EncoderError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EncoderError";
  }
}
