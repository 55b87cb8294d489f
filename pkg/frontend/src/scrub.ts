// Hover-scrub math: map a horizontal position on a result tile to one of
// the video's m preview frames. Total, monotone in x, clamped to [0, m-1].

export function scrubIndex(relativeX: number, frameCount: number): number {
  if (frameCount <= 0) return 0;
  const idx = Math.floor(relativeX * frameCount);
  return Math.min(frameCount - 1, Math.max(0, idx));
}

// Frame to display for a tile: its own keyframe until the pointer hovers,
// then the scrubbed preview frame; pointer-leave (relativeX = null) restores.
export function hoverFrame(
  baseRef: string,
  previewRefs: readonly string[],
  relativeX: number | null,
): string {
  if (relativeX === null || previewRefs.length === 0) {
    return baseRef;
  }
  return previewRefs[scrubIndex(relativeX, previewRefs.length)];
}
