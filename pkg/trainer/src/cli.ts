#!/usr/bin/env node
/**
 * preshape-trainer: train and run pre-shape classifiers on datasets
 * produced by the preshape-forge generator.
 *
 *   extract --data <root>                         warm the feature cache
 *   train   --data <root> --val <root> --out m.json [--head fc|recurrent]
 *           [--seed N] [--max-epochs N] [--batch N]
 *   predict --model m.json --data <root> --out preds.csv
 */

import { parseArgs } from "node:util";

import { FeatureStore, HandcraftedV1 } from "./features.js";
import { readManifest, writePredictions } from "./formats.js";
import {
  DEFAULT_CONFIG,
  loadModel,
  predict,
  saveModel,
  train,
} from "./train.js";

function fail(msg: string): never {
  console.error(`error: ${msg}`);
  process.exit(2);
}

function cmdExtract(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: { data: { type: "string" } },
  });
  if (!values.data) fail("--data is required");
  const store = new FeatureStore(values.data, new HandcraftedV1());
  for (const row of readManifest(values.data)) {
    store.sequenceFeatures(row);
  }
  console.log(
    `features ready: ${store.stats.computed} computed, ` +
      `${store.stats.cached} from cache`,
  );
  return 0;
}

function cmdTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      val: { type: "string" },
      out: { type: "string" },
      head: { type: "string", default: "fc" },
      seed: { type: "string", default: "0" },
      "max-epochs": { type: "string" },
      batch: { type: "string" },
    },
  });
  if (!values.data || !values.val || !values.out) {
    fail("--data, --val and --out are required");
  }
  const head = values.head as "fc" | "recurrent";
  if (head !== "fc" && head !== "recurrent") {
    fail(`unknown head ${values.head}`);
  }
  const cfg = {
    ...DEFAULT_CONFIG,
    head,
    ...(values["max-epochs"] ? { maxEpochs: Number(values["max-epochs"]) } : {}),
    ...(values.batch ? { batchSize: Number(values.batch) } : {}),
  };
  const { model, log } = train(cfg, values.data, values.val, Number(values.seed));
  saveModel(values.out, model);
  for (const e of log.epochs) {
    console.log(
      `epoch ${e.epoch}: train ${e.trainLoss.toFixed(4)} ` +
        `val ${e.valLoss.toFixed(4)} lr ${e.lr}`,
    );
  }
  console.log(
    `done: best epoch ${log.bestEpoch}, lr drops at ` +
      `[${log.lrDropEpochs.join(", ")}], ` +
      `${log.stoppedEarly ? "early-stopped" : "epoch budget reached"}; ` +
      `model -> ${values.out}`,
  );
  return 0;
}

function cmdPredict(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      data: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.model || !values.data || !values.out) {
    fail("--model, --data and --out are required");
  }
  const preds = predict(loadModel(values.model), values.data);
  writePredictions(values.out, preds);
  const frames = [...preds.scores.values()].reduce((a, v) => a + v.length, 0);
  console.log(
    `wrote ${frames} frame predictions for ${preds.seqIds.length} ` +
      `sequences -> ${values.out}`,
  );
  return 0;
}

export function main(argv: string[]): number {
  const [cmd, ...rest] = argv;
  switch (cmd) {
    case "extract":
      return cmdExtract(rest);
    case "train":
      return cmdTrain(rest);
    case "predict":
      return cmdPredict(rest);
    default:
      console.error(
        "usage: preshape-trainer <extract|train|predict> [options]",
      );
      return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
