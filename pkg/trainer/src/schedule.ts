/**
 * Learning-rate-on-plateau and early stopping.
 *
 * "No improvement" means the validation loss has not gone strictly below
 * the best seen so far. After each epoch:
 *   - sinceBest = epoch - bestEpoch
 *   - sinceBest >= earlyStopPatience          -> stop training
 *   - otherwise, sinceBest a positive multiple of plateauPatience
 *                                             -> lr *= plateauFactor
 * The drop applies to subsequent epochs; lr never increases.
 */

export interface ScheduleConfig {
  lrInit: number;
  plateauFactor: number;
  plateauPatience: number;
  earlyStopPatience: number;
}

export interface ScheduleEvents {
  dropEpochs: number[];
  stopEpoch: number | null; // epoch after which training stops
}

export class PlateauSchedule {
  lr: number;
  bestLoss = Infinity;
  bestEpoch = 0;
  readonly events: ScheduleEvents = { dropEpochs: [], stopEpoch: null };

  constructor(private readonly cfg: ScheduleConfig) {
    if (cfg.earlyStopPatience <= cfg.plateauPatience) {
      throw new Error("earlyStopPatience must exceed plateauPatience");
    }
    if (cfg.plateauPatience < 1 || cfg.plateauFactor <= 0 || cfg.lrInit <= 0) {
      throw new Error("schedule parameters must be positive");
    }
    this.lr = cfg.lrInit;
  }

  /** Record epoch's validation loss; returns false when training must stop. */
  observe(epoch: number, valLoss: number): boolean {
    if (valLoss < this.bestLoss) {
      this.bestLoss = valLoss;
      this.bestEpoch = epoch;
      return true;
    }
    const sinceBest = epoch - this.bestEpoch;
    if (sinceBest >= this.cfg.earlyStopPatience) {
      this.events.stopEpoch = epoch;
      return false;
    }
    if (sinceBest > 0 && sinceBest % this.cfg.plateauPatience === 0) {
      this.lr *= this.cfg.plateauFactor;
      this.events.dropEpochs.push(epoch);
    }
    return true;
  }
}

/** Replay a whole validation-loss trace; epochs are 1-indexed. */
export function simulateSchedule(
  cfg: ScheduleConfig,
  valLosses: number[],
): ScheduleEvents {
  const sched = new PlateauSchedule(cfg);
  for (let e = 1; e <= valLosses.length; e++) {
    if (!sched.observe(e, valLosses[e - 1])) break;
  }
  return sched.events;
}
