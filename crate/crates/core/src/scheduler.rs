//! View ordering for autoregressive outpainting.
//!
//! Plans sweep the start latitude band first, alternating east and west of
//! the start view until the band closes, then repeat the sweep on bands
//! stepping alternately north and south, and end with one view per pole.

use serde::{Deserialize, Serialize};

use crate::canvas::{intersection_fraction, solid_angle_fraction, Panorama};
use crate::error::{Error, Result};
use crate::geom::{view_footprint, Mask, ViewSpec};

pub const DEFAULT_STRIDE_DEG: f64 = 45.0;
pub const DEFAULT_MIN_OVERLAP: f64 = 0.25;

const MAX_REFINEMENTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalPlan {
    pub views: Vec<ViewSpec>,
    pub stride_lon: f64,
    pub stride_lat: f64,
    pub min_overlap: f64,
    pub pano_width: usize,
}

impl TraversalPlan {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

/// Share of a footprint that is already known, solid-angle weighted.
pub fn overlap_fraction(footprint: &Mask, known: &Mask) -> f64 {
    let area = solid_angle_fraction(footprint);
    if area == 0.0 {
        return 0.0;
    }
    intersection_fraction(footprint, known) / area
}

fn has_unknown(footprint: &Mask, known: &Mask) -> bool {
    footprint
        .data
        .iter()
        .zip(&known.data)
        .any(|(&f, &k)| f && !k)
}

fn vertical_fov(view: &ViewSpec) -> f64 {
    2.0 * (view.height as f64 / 2.0).atan2(view.focal()).to_degrees()
}

/// Band latitudes on one side of the start, excluding the pole itself.
fn band_lats(start_lat: f64, toward: f64, steps: usize) -> Vec<f64> {
    let span = toward - start_lat;
    (1..steps)
        .map(|i| start_lat + span * i as f64 / steps as f64)
        .collect()
}

/// Longitudes of one band: start, then alternating east/west neighbours.
fn band_lons(start_lon: f64, count: usize) -> Vec<f64> {
    let spacing = 360.0 / count as f64;
    (0..count)
        .map(|t| {
            let j = t.div_ceil(2) as f64;
            let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
            start_lon + sign * j * spacing
        })
        .collect()
}

struct Layout {
    start: ViewSpec,
    up_steps: usize,
    down_steps: usize,
    /// Per-band view counts, in band order (start band first).
    counts: Vec<usize>,
    base_count: usize,
}

impl Layout {
    fn band_order(&self) -> Vec<f64> {
        let lat0 = self.start.center.lat;
        let up = if lat0 < 90.0 {
            band_lats(lat0, 90.0, self.up_steps)
        } else {
            Vec::new()
        };
        let down = if lat0 > -90.0 {
            band_lats(lat0, -90.0, self.down_steps)
        } else {
            Vec::new()
        };
        let mut order = vec![lat0];
        let mut ui = up.iter();
        let mut di = down.iter();
        loop {
            let a = ui.next();
            let b = di.next();
            if a.is_none() && b.is_none() {
                break;
            }
            order.extend(a);
            order.extend(b);
        }
        order
    }

    fn sync_counts(&mut self) {
        let n = self.band_order().len();
        self.counts.resize(n, self.base_count);
    }

    /// Views and, for each, the band index it belongs to (`None` for poles).
    fn views(&self) -> Result<Vec<(ViewSpec, Option<usize>)>> {
        let s = self.start;
        let lat0 = s.center.lat;
        let mut out = Vec::new();
        if lat0.abs() == 90.0 {
            out.push((s, None));
        } else {
            for (b, lat) in self.band_order().into_iter().enumerate() {
                for lon in band_lons(s.center.lon, self.counts[b]) {
                    out.push((
                        ViewSpec::new(lon, lat, s.fov_deg, s.width, s.height)?,
                        Some(b),
                    ));
                }
            }
        }
        if lat0 < 90.0 {
            out.push((s.with_center(s.center.lon, 90.0), None));
        }
        if lat0 > -90.0 {
            out.push((s.with_center(s.center.lon, -90.0), None));
        }
        Ok(out)
    }
}

enum Check {
    Ok(Vec<ViewSpec>),
    /// Overlap failed inside a band; densify that band.
    Band(usize),
    /// Overlap failed where a band or pole joins the previous one.
    Latitude,
    Uncovered,
}

fn check_layout(layout: &Layout, pano_width: usize, min_overlap: f64) -> Result<Check> {
    let views = layout.views()?;
    let mut union = Mask::new(pano_width, pano_width / 2, false);
    let mut prev_band: Option<usize> = None;
    for (i, (view, band)) in views.iter().enumerate() {
        let fp = view_footprint(view, pano_width)?;
        if i > 0 && overlap_fraction(&fp, &union) < min_overlap {
            return Ok(match band {
                Some(b) if prev_band == Some(*b) => Check::Band(*b),
                _ => Check::Latitude,
            });
        }
        union = union.union(&fp);
        prev_band = *band;
    }
    if !union.all_known() {
        return Ok(Check::Uncovered);
    }
    Ok(Check::Ok(views.into_iter().map(|(v, _)| v).collect()))
}

/// Builds a deterministic traversal covering the whole sphere.
///
/// Strides are upper bounds: bands are spaced evenly so they close around
/// the sphere, and any band whose neighbours overlap by less than
/// `min_overlap` of a footprint is made denser until the overlap holds.
pub fn plan_traversal(
    start: &ViewSpec,
    pano_width: usize,
    stride_lon: f64,
    stride_lat: f64,
    min_overlap: f64,
) -> Result<TraversalPlan> {
    start.validate()?;
    crate::geom::check_equirect_dims(pano_width, pano_width / 2)?;
    if !(min_overlap > 0.0 && min_overlap <= 0.9) {
        return Err(Error::Planning(format!(
            "min_overlap must lie in (0, 0.9], got {min_overlap}"
        )));
    }
    if !(stride_lon > 0.0 && stride_lon < start.fov_deg) {
        return Err(Error::Planning(format!(
            "longitude stride {stride_lon} must be positive and below the fov {}",
            start.fov_deg
        )));
    }
    let vfov = vertical_fov(start);
    if !(stride_lat > 0.0 && stride_lat < vfov) {
        return Err(Error::Planning(format!(
            "latitude stride {stride_lat} must be positive and below the vertical fov {vfov:.3}"
        )));
    }

    let lat0 = start.center.lat;
    let base_count = (360.0 / stride_lon).ceil() as usize;
    let mut layout = Layout {
        start: *start,
        up_steps: ((90.0 - lat0) / stride_lat).ceil().max(1.0) as usize,
        down_steps: ((lat0 + 90.0) / stride_lat).ceil().max(1.0) as usize,
        counts: Vec::new(),
        base_count,
    };
    layout.sync_counts();

    for _ in 0..MAX_REFINEMENTS {
        match check_layout(&layout, pano_width, min_overlap)? {
            Check::Ok(views) => {
                return Ok(TraversalPlan {
                    views,
                    stride_lon,
                    stride_lat,
                    min_overlap,
                    pano_width,
                })
            }
            Check::Band(b) => layout.counts[b] += 1,
            Check::Latitude => {
                layout.up_steps += 1;
                layout.down_steps += 1;
                layout.sync_counts();
            }
            Check::Uncovered => {
                for c in &mut layout.counts {
                    *c += 1;
                }
                layout.base_count += 1;
            }
        }
    }
    Err(Error::Planning(format!(
        "no plan satisfies overlap {min_overlap} and full coverage after {MAX_REFINEMENTS} refinements"
    )))
}

/// Next view to outpaint, with its index in the plan.
///
/// Scans from `cursor` to the end and then wraps around, returning the
/// first view that still has unknown pixels and whose known overlap is at
/// least `min_overlap`. Returns `None` once the panorama is complete.
pub fn next_view(
    plan: &TraversalPlan,
    state: &Panorama,
    cursor: usize,
) -> Result<Option<(usize, ViewSpec)>> {
    if state.is_complete() {
        return Ok(None);
    }
    if plan.is_empty() {
        return Err(Error::Scheduling("plan is empty".into()));
    }
    let n = plan.len();
    let start = cursor.min(n);
    for i in (start..n).chain(0..start) {
        let view = plan.views[i];
        let fp = view_footprint(&view, state.width())?;
        if has_unknown(&fp, state.mask()) && overlap_fraction(&fp, state.mask()) >= plan.min_overlap
        {
            return Ok(Some((i, view)));
        }
    }
    Err(Error::Scheduling(format!(
        "no planned view overlaps the known region by {} while {:.4} of the sphere is known",
        plan.min_overlap,
        state.known_fraction()
    )))
}

/// Restarts the plan at a user-chosen view.
///
/// The new plan is `user_view` followed by the old plan from `cursor`
/// onward and then its head, with the user view removed if it was planned.
pub fn replan_from(
    state: &Panorama,
    user_view: &ViewSpec,
    plan: &TraversalPlan,
    cursor: usize,
) -> Result<TraversalPlan> {
    user_view.validate()?;
    let fp = view_footprint(user_view, state.width())?;
    if !has_unknown(&fp, state.mask()) {
        return Err(Error::Steering(format!(
            "view at ({:.2}, {:.2}) is already fully generated; pick a view on the known frontier",
            user_view.center.lon, user_view.center.lat
        )));
    }
    let overlap = overlap_fraction(&fp, state.mask());
    if overlap < plan.min_overlap {
        return Err(Error::Steering(format!(
            "view at ({:.2}, {:.2}) overlaps known content by {:.3}, needs at least {}; move it closer to the known frontier",
            user_view.center.lon, user_view.center.lat, overlap, plan.min_overlap
        )));
    }
    let n = plan.len();
    let start = cursor.min(n);
    let mut views = vec![*user_view];
    views.extend(
        (start..n)
            .chain(0..start)
            .map(|i| plan.views[i])
            .filter(|v| v != user_view),
    );
    Ok(TraversalPlan {
        views,
        ..plan.clone()
    })
}
