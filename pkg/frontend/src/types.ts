import { z } from "zod";

/** Axes of the volume; a slice is taken perpendicular to its axis. */
export type Axis = "x" | "y" | "z";

export const AXES: readonly Axis[] = ["x", "y", "z"];

export const AXIS_INDEX: Record<Axis, number> = { x: 0, y: 1, z: 2 };

/** Volume axis indices spanned by a slice plane along each axis. */
export const PLANE_AXES: Record<Axis, [number, number]> = {
  x: [1, 2],
  y: [0, 2],
  z: [0, 1],
};

export type ClickClass = "tumor" | "background";

export const clickSchema = z.object({
  pos: z.tuple([z.number().int(), z.number().int(), z.number().int()]),
  cls: z.enum(["tumor", "background"]),
  iteration: z.number().int().nonnegative(),
});
export type Click = z.infer<typeof clickSchema>;

export const sessionMetaSchema = z.object({
  id: z.string(),
  dims: z.tuple([z.number().int(), z.number().int(), z.number().int()]),
  has_label: z.boolean(),
  clicks: z.array(clickSchema),
  iteration: z.number().int(),
  predict_count: z.number().int().nonnegative(),
  dice_history: z.array(z.number()),
});
export type SessionMeta = z.infer<typeof sessionMetaSchema>;

// dice/nsd present only when the session has a ground-truth label
export const predictResultSchema = z.object({
  iteration: z.number().int(),
  dice: z.number().optional(),
  nsd: z.number().optional(),
});
export type PredictResult = z.infer<typeof predictResultSchema>;

export const sliceSchema = z.object({
  axis: z.enum(["x", "y", "z"]),
  index: z.number().int(),
  extent: z.number().int(),
  plane_dims: z.tuple([z.number().int(), z.number().int()]),
  image_b64: z.string(),
  prediction_b64: z.string().nullable(),
  clicks: z.array(clickSchema),
  worst_patch: z
    .object({
      origin: z.tuple([z.number(), z.number()]),
      size: z.tuple([z.number(), z.number()]),
    })
    .nullable(),
});
export type SliceResponse = z.infer<typeof sliceSchema>;

/** A decoded slice: float32 planes in column-major (x-fastest) order. */
export interface SlicePlanes {
  planeDims: [number, number];
  image: Float32Array;
  prediction: Float32Array | null;
  clicks: Click[];
  worstPatch: { origin: [number, number]; size: [number, number] } | null;
}

export function decodeB64f32(b64: string): Float32Array {
  const bin = atob(b64);
  const bytes = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}

export function decodeSlice(raw: SliceResponse): SlicePlanes {
  return {
    planeDims: raw.plane_dims,
    image: decodeB64f32(raw.image_b64),
    prediction: raw.prediction_b64 ? decodeB64f32(raw.prediction_b64) : null,
    clicks: raw.clicks,
    worstPatch: raw.worst_patch,
  };
}
