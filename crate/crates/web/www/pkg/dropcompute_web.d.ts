/* tslint:disable */
/* eslint-disable */

/**
 * Speedup curve plus its best threshold. `points` holds rows of
 * `[tau, s_eff, drop_rate]`.
 */
export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly points: Float64Array;
    readonly s_eff_star: number;
    readonly tau_star: number;
}

/**
 * Closed-form speedup curve for Gaussian micro-batch latencies.
 */
export function analytic_curve(mu: number, sigma: number, micro_batches: number, workers: number, comm_time: number, samples: number): Curve;

/**
 * Speedup and baseline efficiency as the worker count doubles.
 */
export function scale_curve(noise: string, base: number, spread: number, micro_batches: number, comm_time: number, max_workers: number, iterations: number, seed: bigint): Float64Array;

/**
 * Sample a latency trace and pick the threshold on it.
 */
export function simulated_curve(noise: string, base: number, spread: number, micro_batches: number, workers: number, comm_time: number, iterations: number, seed: bigint): Curve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly analytic_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly curve_points: (a: number) => [number, number];
    readonly curve_s_eff_star: (a: number) => number;
    readonly curve_tau_star: (a: number) => number;
    readonly scale_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number, number];
    readonly simulated_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
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
