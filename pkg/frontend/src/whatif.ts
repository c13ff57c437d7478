// Threshold what-if slider: every displayed number is server-computed.
// When the server is unreachable the last data is kept visible behind a
// stale banner and the controls disable until a call succeeds again.

import type { ApiClient } from "./api.js";
import type { WhatIfResponse } from "./types.js";

export type WhatIfStatus = "idle" | "live" | "stale";

export interface WhatIfState {
  status: WhatIfStatus;
  cutoff: number;
  last: WhatIfResponse | null;
  controlsEnabled: boolean;
  banner: string | null;
}

export const STALE_BANNER =
  "Server unreachable — showing stale data; controls disabled.";

export function initialWhatIf(cutoff: number): WhatIfState {
  return { status: "idle", cutoff, last: null, controlsEnabled: true, banner: null };
}

export async function queryWhatIf(
  api: ApiClient,
  state: WhatIfState,
  cutoff: number,
): Promise<WhatIfState> {
  try {
    const response = await api.whatIf(cutoff);
    return {
      status: "live",
      cutoff,
      last: response,
      controlsEnabled: true,
      banner: null,
    };
  } catch {
    return {
      status: "stale",
      cutoff: state.cutoff,
      last: state.last,
      controlsEnabled: false,
      banner: STALE_BANNER,
    };
  }
}

export interface WhatIfDisplay {
  precisionLabel: string;
  sensitivityLabel: string;
  hoursLabel: string;
  coverageLabel: string;
}

export function whatIfDisplay(state: WhatIfState): WhatIfDisplay | null {
  if (state.last === null) {
    return null;
  }
  const r = state.last;
  return {
    precisionLabel: r.precision === null ? "undefined" : r.precision.toFixed(3),
    sensitivityLabel:
      r.sensitivity === null ? "undefined" : r.sensitivity.toFixed(3),
    hoursLabel: `${r.workload_hours.toFixed(1)} h/year`,
    coverageLabel: `${r.predicted_normal}/${r.cohort_size} predicted normal`,
  };
}
