/* tslint:disable */
/* eslint-disable */

/**
 * Mean curvature field of two independent binary variables on a
 * `grid` × `grid` parameter grid.
 */
export function independence_field(grid: number): string;

/**
 * Seeded minimality campaign; `shape` and `rank` are comma separated.
 */
export function minimality(shape: string, rank: string, samples: number, seed: bigint): string;

/**
 * Witness curves for a functional given by its entries (last index
 * fastest) on a tensor of the given shape.
 */
export function witness_curves(shape: string, values: string, span: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly independence_field: (a: number) => [number, number];
    readonly minimality: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number];
    readonly witness_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
