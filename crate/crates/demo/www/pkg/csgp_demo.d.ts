/* tslint:disable */
/* eslint-disable */

/**
 * Expected exponential loss over a `grid` x `grid` lattice of (V^b, V^p)
 * for one week of simulated hours, with the optimum and the average-load
 * holding. With zero biases both forwards (45 base, 55 peak) are fair: mean
 * peak spot is 55 and mean off-peak spot makes the weekly average 45.
 * `bias_*` shift the expected spot of each class above that.
 */
export function hedge_surface(bias_base: number, bias_peak: number, price_sd: number, load_corr: number, scale: number, grid: number): string;

/**
 * Covariance of one kernel leaf against lag, `points` samples on
 * `[0, max_lag]` hours.
 */
export function kernel_profile(leaf: string, amplitude: number, lengthscale: number, shape: number, max_lag: number, points: number): string;

/**
 * Fits the coregional model to `train_days` of synthetic price and load and
 * forecasts `horizon_hours` ahead. Bands are two predictive SDs.
 */
export function posterior_demo(seed: number, train_days: number, sparsity: number, horizon_hours: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly hedge_surface: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly kernel_profile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly posterior_demo: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
