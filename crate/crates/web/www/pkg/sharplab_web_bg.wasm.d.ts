/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_blobrun_free: (a: number, b: number) => void;
export const __wbg_counterexample_free: (a: number, b: number) => void;
export const __wbg_get_blobrun_best_epoch: (a: number) => number;
export const __wbg_get_blobrun_best_valid_acc: (a: number) => number;
export const __wbg_get_counterexample_ce_a: (a: number) => number;
export const __wbg_get_counterexample_ce_b: (a: number) => number;
export const __wbg_get_counterexample_phi_a: (a: number) => number;
export const __wbg_get_counterexample_phi_b: (a: number) => number;
export const __wbg_set_blobrun_best_epoch: (a: number, b: number) => void;
export const __wbg_set_blobrun_best_valid_acc: (a: number, b: number) => void;
export const __wbg_set_counterexample_ce_a: (a: number, b: number) => void;
export const __wbg_set_counterexample_ce_b: (a: number, b: number) => void;
export const __wbg_set_counterexample_phi_a: (a: number, b: number) => void;
export const __wbg_set_counterexample_phi_b: (a: number, b: number) => void;
export const blobrun_flipped: (a: number) => [number, number];
export const blobrun_grid: (a: number) => [number, number];
export const blobrun_grid_size: (a: number) => number;
export const blobrun_labels: (a: number) => [number, number];
export const blobrun_points: (a: number) => [number, number];
export const blobrun_train_ce: (a: number) => [number, number];
export const blobrun_valid_acc: (a: number) => [number, number];
export const counterexample: (a: number, b: number) => [number, number, number];
export const counterexample_ce_choice: (a: number) => [number, number];
export const counterexample_phi_choice: (a: number) => [number, number];
export const phi_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const train_blobs: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
