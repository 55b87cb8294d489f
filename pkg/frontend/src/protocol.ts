// Wire types for the gateway's websocket protocol (docs/protocol.md).

export const PROTOCOL_VERSION = 1;

export type RequestKind =
  | "query"
  | "similar"
  | "summary"
  | "videoDetail"
  | "explore"
  | "submit"
  | "config";

export interface RequestFrame {
  v: typeof PROTOCOL_VERSION;
  requestId: string;
  kind: RequestKind;
  payload: unknown;
}

export interface ErrorBody {
  code: string;
  message: string;
  offset?: number;
  reason?: string;
  status?: number;
  [extra: string]: unknown;
}

export interface OkResponse {
  v: number;
  requestId: string;
  status: "ok";
  payload: unknown;
}

export interface ErrResponse {
  v: number;
  requestId: string;
  status: "error";
  error: ErrorBody;
}

export type ResponseFrame = OkResponse | ErrResponse;

export interface SegmentBrief {
  segmentId: string;
  videoId: string;
  startMs: number;
  endMs: number;
  keyframeRef: string;
}

export interface Hit extends SegmentBrief {
  score: number;
  rank: number;
  source: string;
  stageSegments?: SegmentBrief[];
}

export interface QueryPage {
  hits: Hit[];
  page: number;
  pageSize: number;
  totalHits: number;
  totalPages: number;
  temporal?: boolean;
  stages?: number;
  querySegmentId?: string;
}

export interface SummaryFrame {
  segmentId: string;
  keyframeRef: string;
  startMs: number;
}

export interface SummaryPayload {
  videoId: string;
  keyframes: SummaryFrame[];
}

export interface AnnotationJson {
  modality: string;
  label: string;
  score: number;
}

export interface VideoDetailPayload {
  videoId: string;
  title: string;
  durationMs: number;
  dataset: string;
  segments: (SegmentBrief & { annotations: AnnotationJson[] })[];
}

export interface ClusterMember {
  videoId: string;
  title: string;
  keyframeRef: string | null;
}

export interface ExplorePayload {
  k: number;
  seed: number;
  clusters: {
    clusterId: number;
    medoidVideoId: string;
    size: number;
    members: ClusterMember[];
  }[];
}

export interface ConfigPayload {
  version: string;
  protocolVersion: number;
  dim: number;
  indexes: string[];
  videos: number;
  segments: number;
  clustersBuilt: boolean;
  submissionsEnabled: boolean;
  defaults: {
    pageSize: number;
    policy: string;
    kConst: number;
    windowMs: number;
    perStageDepth: number;
    summarySize: number;
    similarK: number;
  };
}

export interface SubmitReceipt {
  upstreamStatus: number;
  body: string;
}

export type TaskType = "KIS" | "AVS" | "QA";

export interface SubmitPayload {
  taskType: TaskType;
  videoId?: string;
  timeMs?: number;
  text?: string;
}
