/* tslint:disable */
/* eslint-disable */

/**
 * Bounds for one `(d, n, k)` plus the intermediate grid quantities.
 */
export function bounds_row(d: number, n: number, k: number): string;

/**
 * Random indexed tanh encoder at `d = 1, n = 3, k = 1` with latent dimension
 * `m`: the antipodal residual around the circle and the searched collision.
 */
export function collision_demo(m: number, seed: number, restarts: number, samples: number): string;

/**
 * Region of the direction at `angle` (radians) on the circle, its antipode's
 * region, and the cover vertices.
 */
export function cover_point(angle: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bounds_row: (a: number, b: number, c: number) => [number, number];
    readonly collision_demo: (a: number, b: number, c: number, d: number) => [number, number];
    readonly cover_point: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
