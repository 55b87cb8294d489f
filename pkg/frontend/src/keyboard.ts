// Pure keyboard model for the result grid. (state, key) -> (state, effect),
// no DOM, no async: page loads and summary fetches surface as effects for
// the session controller to execute.
//
// Rules:
//   ArrowLeft / ArrowRight  move the selection +-1; crossing the page edge
//                           requests the previous/next page (selection lands
//                           on the far end of the new page); the very first
//                           and very last hits are hard boundaries.
//   ArrowUp / ArrowDown     move +-one grid column count, within the page.
//   Space                   toggles the summary overlay for the selected
//                           hit; an involution on overlay state (no-op when
//                           a non-summary overlay is open).
//   Escape                  closes any overlay.
// Any key at a boundary is a no-op; with an overlay open, arrows are inert.

export type Overlay = "none" | "summary" | "videoDetail" | "explore";

export interface GridState {
  page: number;
  totalPages: number;
  hitsOnPage: number;
  totalHits: number;
  columns: number;
  selected: number;
  overlay: Overlay;
}

export type NavEffect =
  | { type: "none" }
  | { type: "loadPage"; page: number; select: "first" | "last" }
  | { type: "openSummary" };

const NONE: NavEffect = { type: "none" };

export function navigate(state: GridState, key: string): [GridState, NavEffect] {
  if (state.overlay !== "none") {
    if (key === "Escape" || (key === " " && state.overlay === "summary")) {
      return [{ ...state, overlay: "none" }, NONE];
    }
    return [state, NONE];
  }
  if (state.hitsOnPage === 0) {
    return [state, NONE];
  }
  switch (key) {
    case " ":
      return [{ ...state, overlay: "summary" }, { type: "openSummary" }];
    case "ArrowRight":
      if (state.selected < state.hitsOnPage - 1) {
        return [{ ...state, selected: state.selected + 1 }, NONE];
      }
      if (state.page < state.totalPages - 1) {
        return [state, { type: "loadPage", page: state.page + 1, select: "first" }];
      }
      return [state, NONE];
    case "ArrowLeft":
      if (state.selected > 0) {
        return [{ ...state, selected: state.selected - 1 }, NONE];
      }
      if (state.page > 0) {
        return [state, { type: "loadPage", page: state.page - 1, select: "last" }];
      }
      return [state, NONE];
    case "ArrowDown": {
      const next = state.selected + state.columns;
      return next < state.hitsOnPage ? [{ ...state, selected: next }, NONE] : [state, NONE];
    }
    case "ArrowUp": {
      const next = state.selected - state.columns;
      return next >= 0 ? [{ ...state, selected: next }, NONE] : [state, NONE];
    }
    default:
      return [state, NONE];
  }
}

export const NAV_KEYS = ["ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown", " ", "Escape"];
