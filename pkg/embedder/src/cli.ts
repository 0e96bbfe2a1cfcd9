#!/usr/bin/env node
import path from "node:path";
import { pathToFileURL } from "node:url";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { embedRecords } from "./embed.js";
import { loadEncoder } from "./encoder.js";
import { FilterMode, prepare } from "./prepare.js";
import { DataError, EncoderError } from "./types.js";

const DEFAULT_MODEL = "sentence-transformers/all-mpnet-base-v2";

async function runEmbed(argv: {
  in: string;
  out: string;
  model: string;
  batch: number;
  includeResponse: boolean;
}): Promise<void> {
  const encoder = await loadEncoder(argv.model);
  const { n, d } = await embedRecords(argv.in, argv.out, encoder, {
    batchSize: argv.batch,
    includeResponse: argv.includeResponse,
  });
  console.log(JSON.stringify({ out: argv.out, n, d, model: encoder.name }));
}

function runPrepare(argv: {
  in: string[];
  out: string;
  manifest?: string;
  filter?: string;
  filterMode: FilterMode;
}): void {
  const manifest = prepare(argv.in, argv.out, argv.manifest, {
    filterTag: argv.filter,
    filterMode: argv.filterMode,
  });
  console.log(JSON.stringify({ out: argv.out, total: manifest.total, sources: manifest.sources.length }));
}

export async function main(args: string[]): Promise<number> {
  try {
    await yargs(args)
      .scriptName("corepick-embed")
      .command(
        "embed",
        "Encode a records JSONL into a normalized EMB1 matrix",
        (y) =>
          y
            .option("in", { type: "string", demandOption: true, describe: "records JSONL" })
            .option("out", { type: "string", demandOption: true, describe: "EMB1 output path" })
            .option("model", { type: "string", default: DEFAULT_MODEL, describe: "encoder name or hash-<dim>" })
            .option("batch", { type: "number", default: 64 })
            .option("include-response", { type: "boolean", default: false, describe: "append response text" }),
        async (argv) =>
          runEmbed({
            in: argv.in,
            out: argv.out,
            model: argv.model,
            batch: argv.batch,
            includeResponse: argv["include-response"] as boolean,
          }),
      )
      .command(
        "prepare",
        "Merge, filter, and re-id record files",
        (y) =>
          y
            .option("in", { type: "string", array: true, demandOption: true })
            .option("out", { type: "string", demandOption: true })
            .option("manifest", { type: "string" })
            .option("filter", { type: "string", describe: "keep records matching this language tag" })
            .option("filter-mode", {
              choices: ["auto", "metadata", "fenced"] as const,
              default: "auto" as FilterMode,
            }),
        (argv) =>
          runPrepare({
            in: argv.in,
            out: argv.out,
            manifest: argv.manifest,
            filter: argv.filter,
            filterMode: argv["filter-mode"] as FilterMode,
          }),
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        throw err ?? new DataError(msg ?? "invalid arguments");
      })
      .parseAsync();
    return 0;
  } catch (err) {
    if (err instanceof DataError || err instanceof EncoderError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const entry = process.argv[1] ? pathToFileURL(path.resolve(process.argv[1])).href : "";
if (import.meta.url === entry) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
