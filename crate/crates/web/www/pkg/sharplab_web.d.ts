/* tslint:disable */
/* eslint-disable */

/**
 * A finished training run on 2-D blobs, flattened for plotting.
 */
export class BlobRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    flipped(): Uint32Array;
    /**
     * Predicted class per cell, row-major from the top-left corner.
     */
    grid(): Uint32Array;
    /**
     * Training labels after any injected noise.
     */
    labels(): Uint32Array;
    /**
     * Training inputs as `x0, y0, x1, y1, …`.
     */
    points(): Float64Array;
    train_ce(): Float64Array;
    valid_acc(): Float64Array;
    readonly grid_size: number;
    best_epoch: number;
    best_valid_acc: number;
}

/**
 * Values reported for the two-option example.
 */
export class Counterexample {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly ce_choice: string;
    readonly phi_choice: string;
    ce_a: number;
    ce_b: number;
    phi_a: number;
    phi_b: number;
}

export function counterexample(classes: number, delta: number): Counterexample;

export function phi_curve(kind: string, alpha: number, lo: number, hi: number, n: number): Float64Array;

export function train_blobs(family: string, rho: number, classes: number, spread: number, noise_rate: number, epochs: number, seed: number, grid_size: number): BlobRun;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_blobrun_free: (a: number, b: number) => void;
    readonly __wbg_counterexample_free: (a: number, b: number) => void;
    readonly __wbg_get_blobrun_best_epoch: (a: number) => number;
    readonly __wbg_get_blobrun_best_valid_acc: (a: number) => number;
    readonly __wbg_get_counterexample_ce_a: (a: number) => number;
    readonly __wbg_get_counterexample_ce_b: (a: number) => number;
    readonly __wbg_get_counterexample_phi_a: (a: number) => number;
    readonly __wbg_get_counterexample_phi_b: (a: number) => number;
    readonly __wbg_set_blobrun_best_epoch: (a: number, b: number) => void;
    readonly __wbg_set_blobrun_best_valid_acc: (a: number, b: number) => void;
    readonly __wbg_set_counterexample_ce_a: (a: number, b: number) => void;
    readonly __wbg_set_counterexample_ce_b: (a: number, b: number) => void;
    readonly __wbg_set_counterexample_phi_a: (a: number, b: number) => void;
    readonly __wbg_set_counterexample_phi_b: (a: number, b: number) => void;
    readonly blobrun_flipped: (a: number) => [number, number];
    readonly blobrun_grid: (a: number) => [number, number];
    readonly blobrun_grid_size: (a: number) => number;
    readonly blobrun_labels: (a: number) => [number, number];
    readonly blobrun_points: (a: number) => [number, number];
    readonly blobrun_train_ce: (a: number) => [number, number];
    readonly blobrun_valid_acc: (a: number) => [number, number];
    readonly counterexample: (a: number, b: number) => [number, number, number];
    readonly counterexample_ce_choice: (a: number) => [number, number];
    readonly counterexample_phi_choice: (a: number) => [number, number];
    readonly phi_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly train_blobs: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
