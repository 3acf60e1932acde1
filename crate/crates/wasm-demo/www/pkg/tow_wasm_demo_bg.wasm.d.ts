/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const estimate_interval: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const play_disk: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
export const solve_interval: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
