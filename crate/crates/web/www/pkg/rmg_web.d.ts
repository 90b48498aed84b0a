/* tslint:disable */
/* eslint-disable */

/**
 * Adversarial value `max_p -pᵀv` over a divergence ball of growing radius around `pbar`.
 * Families: `tv`, `kl`, `chi2`, `w1` (states on a line, unit spacing).
 */
export function dual_curve(request: string): string;

/**
 * Nash gap of a bimatrix profile next to the robust Nash gap of its zero-sum reduction.
 */
export function reduction_gap(request: string): string;

/**
 * Entropy-regularized saddle point of a zero-sum matrix game for each temperature.
 */
export function saddle_path(request: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly dual_curve: (a: number, b: number) => [number, number, number, number];
    readonly reduction_gap: (a: number, b: number) => [number, number, number, number];
    readonly saddle_path: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
