/** Fixed overlay palette, shared with the server-side frame renderer so the
 * target panel legend and the tinted thumbnails agree. Okabe–Ito colors. */
export const OVERLAY_PALETTE: Record<number, string> = {
  1: '#E69F00', // lv_cavity: orange
  2: '#56B4E9', // lv_myocardium: sky blue
  3: '#009E73', // rv_cavity: green
};

export const COUNTERFACTUAL_BADGE = '#D55E00'; // vermillion
export const UNIT_SELECTED = '#0072B2'; // dark blue, left-aligned selected units
export const UNIT_UNSELECTED = '#cbd5e1'; // slate-300
