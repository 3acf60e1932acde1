/* tslint:disable */
/* eslint-disable */

/**
 * Greedy players in the base game on `[0, 1]` (unit jump weights, pure
 * Tug-of-War on board 1, pure random walk on board 2): Monte Carlo mean
 * against the DPP value at `x0` on board 1.
 */
export function estimate_interval(x0: number, epsilon: number, slope: number, level: number, episodes: number, seed: number): string;

/**
 * One traced episode on the unit disk with payoffs `f = x1`, `g = 0`.
 * Player I pulls toward `(tx, ty)`, Player II toward the opposite point.
 */
export function play_disk(x: number, y: number, board: number, epsilon: number, tx: number, ty: number, seed: number): string;

/**
 * Solves the DPP on `[0, 1]` and returns the value profiles `u`, `v`.
 */
export function solve_interval(epsilon: number, slope: number, level: number, alpha_1: number, alpha_2: number, jump: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly estimate_interval: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly play_disk: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly solve_interval: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
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
