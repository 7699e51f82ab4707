import { z } from "zod";

export const VERDICTS = ["ACCEPT", "REJECT"] as const;
export type Verdict = (typeof VERDICTS)[number];

export const chartProgressSchema = z.object({
  decided: z.number().int().nonnegative(),
  total: z.number().int().nonnegative(),
});

export const queueItemSchema = z.object({
  chart_id: z.string(),
  domain_tags: z.array(z.string()).default([]),
  progress: chartProgressSchema,
});

export const chartsPageSchema = z.object({
  charts: z.array(queueItemSchema),
  next_cursor: z.string().nullable(),
});

export const decisionSchema = z.object({
  chart_id: z.string(),
  code: z.string(),
  reviewer_id: z.string(),
  verdict: z.string(),
  reason: z.string(),
  decided_at: z.string(),
  seq: z.number().int(),
  idempotency_key: z.string().nullable(),
});

export const labelSchema = z.object({
  code: z.string(),
  description: z.string().nullable(),
  rationale: z.string(),
  evidence_lines: z.array(z.number().int()),
  decisions: z.array(decisionSchema),
});

export const chartDetailSchema = z.object({
  chart: z.looseObject({
    chart_id: z.string(),
    lines: z.array(z.string()),
    domain_tags: z.array(z.string()).default([]),
  }),
  labels: z.array(labelSchema),
  progress: chartProgressSchema,
});

export const overallProgressSchema = z.object({
  total: z.number().int().nonnegative(),
  decided: z.number().int().nonnegative(),
  completeness: z.number(),
  charts: z.array(
    z.object({
      chart_id: z.string(),
      decided: z.number().int().nonnegative(),
      total: z.number().int().nonnegative(),
    }),
  ),
});

export const decisionResponseSchema = z.object({
  decision: decisionSchema,
  progress: chartProgressSchema,
});

export const exportRecordSchema = z.looseObject({
  chart_id: z.string(),
  assignments: z.array(
    z.looseObject({
      code: z.string(),
      source: z.string().optional(),
    }),
  ),
});

export const exportResponseSchema = z.object({
  records: z.array(exportRecordSchema),
  completeness: z.number(),
  undecided: z.array(z.tuple([z.string(), z.string()])),
  path: z.string().nullable(),
});

export type ChartProgress = z.infer<typeof chartProgressSchema>;
export type QueueItem = z.infer<typeof queueItemSchema>;
export type ChartsPage = z.infer<typeof chartsPageSchema>;
export type Decision = z.infer<typeof decisionSchema>;
export type Label = z.infer<typeof labelSchema>;
export type ChartDetail = z.infer<typeof chartDetailSchema>;
export type OverallProgress = z.infer<typeof overallProgressSchema>;
export type DecisionResponse = z.infer<typeof decisionResponseSchema>;
export type ExportResponse = z.infer<typeof exportResponseSchema>;
