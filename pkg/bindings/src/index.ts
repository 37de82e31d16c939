/**
 * Thin Node bindings for the trace-gauge CLI.
 *
 * Every entry point shells out to the command-line tool and returns its
 * records untouched, so behaviour is defined in exactly one place (the
 * core package) and parity is mechanically testable: binding output is
 * byte-identical to the CLI's, record for record.
 *
 * The CLI is resolved from the TRACE_GAUGE_CLI environment variable
 * (a space-separated command) or defaults to `python3 -m tracegauge`.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type TraceStatusName = "valid" | "empty" | "missing" | "truncated";
export type MaskFlagName = "prompt" | "think";

export interface RoleMarkerPair {
  open: string;
  close: string;
}

export interface ProfileDocument {
  name: string;
  think_open: string;
  think_close: string;
  implicit_open: boolean;
  role_markers: {
    user: RoleMarkerPair;
    assistant: RoleMarkerPair;
    system: RoleMarkerPair;
  };
  generation_suffix: string;
  missing_reasoning_default: "empty-think" | "no-think";
  tolerate_unopened_close: boolean;
}

export type ProfileRef = string | ProfileDocument;

export interface ParsedRecord {
  id: string | number;
  status: TraceStatusName;
  reasoning: string | null;
  answer: string | null;
  raw_length: number;
}

export interface ScoredRecord extends ParsedRecord {
  answered: boolean;
  correct: boolean;
  extracted: string | null;
}

export interface SegmentRecord {
  kind: string;
  start: number;
  end: number;
  masked: boolean;
}

export interface MaskedRecord {
  id?: string | number;
  text: string;
  segments: SegmentRecord[];
  strategy: string;
  token_labels?: number[];
}

export interface Message {
  role: "user" | "assistant" | "system";
  content: string;
  reasoning?: string;
}

export interface Conversation {
  id?: string | number;
  messages: Message[];
  token_spans?: [number, number][];
}

export interface StatsDocument {
  n: number;
  counts: Record<string, number>;
  rates: Record<string, number>;
}

export interface IntervalDocument {
  low: number;
  high: number;
  level: number;
  method: string;
  resamples: number;
  seed: number;
}

export interface EvalDocument extends StatsDocument {
  pass1: number;
  rpass1: number | null;
  min_valid: number;
  ci: Record<string, IntervalDocument>;
}

export interface EvalOptions {
  minValid?: number;
  resamples?: number;
  seed?: number;
  level?: number;
}

export class TraceGaugeCliError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(exitCode: number, stderr: string) {
    super(`trace-gauge exited with code ${exitCode}: ${stderr.trim()}`);
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

export function cliCommand(): string[] {
  const override = process.env.TRACE_GAUGE_CLI;
  if (override && override.trim()) {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "tracegauge"];
}

/** Run one CLI subcommand, feeding JSONL records on stdin. */
export function runCli(args: string[], stdinLines: unknown[]): string {
  const [command, ...prefix] = cliCommand();
  const input = stdinLines.map((record) => JSON.stringify(record)).join("\n");
  const result = spawnSync(command, [...prefix, ...args], {
    input: input.length ? input + "\n" : "",
    encoding: "utf-8",
    maxBuffer: 1024 * 1024 * 256,
  });
  if (result.error) {
    throw result.error;
  }
  if (result.status !== 0) {
    throw new TraceGaugeCliError(result.status ?? -1, result.stderr ?? "");
  }
  return result.stdout;
}

function parseJsonl<T>(stdout: string): T[] {
  return stdout
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function withProfileFlag<T>(profile: ProfileRef, run: (flag: string) => T): T {
  if (typeof profile === "string") {
    return run(profile);
  }
  const dir = mkdtempSync(join(tmpdir(), "tracegauge-"));
  const path = join(dir, "profile.json");
  try {
    writeFileSync(path, JSON.stringify(profile), "utf-8");
    return run(path);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export interface ParseOptions {
  profile: ProfileRef;
}

export function parse(text: string, options: ParseOptions): ParsedRecord;
export function parse(texts: string[], options: ParseOptions): ParsedRecord[];
export function parse(
  textOrTexts: string | string[],
  options: ParseOptions,
): ParsedRecord | ParsedRecord[] {
  const texts = Array.isArray(textOrTexts) ? textOrTexts : [textOrTexts];
  const records = texts.map((text, index) => ({ id: index, text }));
  const stdout = withProfileFlag(options.profile, (flag) =>
    runCli(["parse", "--profile", flag], records),
  );
  const parsed = parseJsonl<ParsedRecord>(stdout);
  return Array.isArray(textOrTexts) ? parsed : parsed[0];
}

export interface ScoreRecordIn {
  id?: string | number;
  generation: string;
  gold?: string;
  external_result?: boolean;
}

export function score(
  records: ScoreRecordIn[],
  options: ParseOptions,
): ScoredRecord[] {
  const stdout = withProfileFlag(options.profile, (flag) =>
    runCli(["score", "--profile", flag], records),
  );
  return parseJsonl<ScoredRecord>(stdout);
}

/** Aggregate parsed/scored records into structural counts and rates. */
export function computeStats(records: ParsedRecord[]): StatsDocument {
  const stdout = runCli(["stats"], records);
  return JSON.parse(stdout) as StatsDocument;
}

/** Full evaluation: pass@1, conditioned rate, bootstrap intervals. */
export function computeEval(
  records: ScoredRecord[],
  options: EvalOptions = {},
): EvalDocument {
  const args = ["stats", "--eval"];
  if (options.minValid !== undefined) args.push("--min-valid", String(options.minValid));
  if (options.resamples !== undefined) args.push("--resamples", String(options.resamples));
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  if (options.level !== undefined) args.push("--level", String(options.level));
  const stdout = runCli(args, records);
  return JSON.parse(stdout) as EvalDocument;
}

export interface MaskOptions {
  profile: ProfileRef;
  mask: MaskFlagName[];
}

/** Build loss-masked training examples; token_spans on a conversation
 * yield token_labels (1 = excluded from the loss). */
export function applyMask(
  conversations: Conversation[],
  options: MaskOptions,
): MaskedRecord[] {
  const flagSet = [...new Set(options.mask)].sort().join(",");
  const stdout = withProfileFlag(options.profile, (flag) =>
    runCli(["mask", "--profile", flag, "--mask", flagSet], conversations),
  );
  return parseJsonl<MaskedRecord>(stdout);
}

export function hasValidReasoning(record: ParsedRecord): boolean {
  return record.status === "valid";
}

export function hasEmptyReasoning(record: ParsedRecord): boolean {
  return record.status === "empty";
}

export function hasMissingReasoning(record: ParsedRecord): boolean {
  return record.status === "missing";
}

export function hasTruncatedReasoning(record: ParsedRecord): boolean {
  return record.status === "truncated";
}

/** Canonical JSON: recursively key-sorted, for byte-level comparisons. */
export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([key, inner]) => `${JSON.stringify(key)}:${canonicalJson(inner)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}
