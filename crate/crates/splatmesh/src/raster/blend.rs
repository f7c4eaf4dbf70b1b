//! Per-pixel front-to-back compositing of mixed Gaussian/triangle fragment
//! lists, with sub-pixel transmittance handling for triangle entities.

use nalgebra::Vector3;

use crate::scene::{BlendMode, RenderSettings};

/// One depth-sorted fragment of a pixel's list.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    /// View-space z used for sorting.
    pub depth: f64,
    pub payload: FragmentPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FragmentPayload {
    Gaussian {
        alpha: f64,
        color: Vector3<f64>,
    },
    Triangle {
        /// Coverage bits, one per MSAA sample; at least one bit set.
        mask: u32,
        alpha: f64,
        /// RGB interpolated at the pixel center.
        color: Vector3<f64>,
    },
}

impl Fragment {
    pub fn gaussian(depth: f64, alpha: f64, color: Vector3<f64>) -> Self {
        Self {
            depth,
            payload: FragmentPayload::Gaussian { alpha, color },
        }
    }

    pub fn triangle(depth: f64, mask: u32, alpha: f64, color: Vector3<f64>) -> Self {
        Self {
            depth,
            payload: FragmentPayload::Triangle { mask, alpha, color },
        }
    }

    pub fn is_triangle(&self) -> bool {
        matches!(self.payload, FragmentPayload::Triangle { .. })
    }

    fn kind_rank(&self) -> u8 {
        // Triangle before gaussian on depth ties.
        if self.is_triangle() {
            0
        } else {
            1
        }
    }
}

/// Stable sort by (depth, kind); submission order breaks remaining ties.
pub fn sort_fragments(fragments: &mut [Fragment]) {
    fragments.sort_by(|a, b| {
        a.depth
            .partial_cmp(&b.depth)
            .expect("fragment depths are finite")
            .then(a.kind_rank().cmp(&b.kind_rank()))
    });
}

/// MSAA sample offsets relative to the pixel center, in pixel units.
/// The 4-sample pattern is the standard rotated grid; 1 is the center.
pub fn sample_offsets(m: usize) -> Option<&'static [(f64, f64)]> {
    const S1: [(f64, f64); 1] = [(0.0, 0.0)];
    const S2: [(f64, f64); 2] = [(4.0 / 16.0, 4.0 / 16.0), (-4.0 / 16.0, -4.0 / 16.0)];
    const S4: [(f64, f64); 4] = [
        (-2.0 / 16.0, -6.0 / 16.0),
        (6.0 / 16.0, -2.0 / 16.0),
        (-6.0 / 16.0, 2.0 / 16.0),
        (2.0 / 16.0, 6.0 / 16.0),
    ];
    const S8: [(f64, f64); 8] = [
        (1.0 / 16.0, -3.0 / 16.0),
        (-1.0 / 16.0, 3.0 / 16.0),
        (5.0 / 16.0, 1.0 / 16.0),
        (-3.0 / 16.0, -5.0 / 16.0),
        (-5.0 / 16.0, 5.0 / 16.0),
        (-7.0 / 16.0, -1.0 / 16.0),
        (3.0 / 16.0, 7.0 / 16.0),
        (7.0 / 16.0, -7.0 / 16.0),
    ];
    match m {
        1 => Some(&S1),
        2 => Some(&S2),
        4 => Some(&S4),
        8 => Some(&S8),
        _ => None,
    }
}

struct EntityState {
    /// Per-sample transmittance t^j, all 1 on open.
    t: [f64; 32],
    /// Pixel transmittance recorded when the entity opened.
    t_enter: f64,
}

impl EntityState {
    fn open(m: usize, t_enter: f64) -> Self {
        let mut t = [0.0; 32];
        t[..m].fill(1.0);
        Self { t, t_enter }
    }

    fn mean_t(&self, m: usize) -> f64 {
        self.t[..m].iter().sum::<f64>() / m as f64
    }
}

/// Composite one pixel's depth-sorted fragment list over the background.
///
/// In the default `ExactEntity` mode, runs of consecutive triangle
/// fragments form an entity: color blends at the pixel level against the
/// entity-entry transmittance weighted by continuous coverage
/// `O = mean_j(o^j t^j)`, while transmittance decays per sample. On entity
/// exit the pixel transmittance becomes `T_enter * mean_j(t^j)`. Gaussians
/// blend plainly and close any open entity.
pub fn blend_pixel(
    fragments: &[Fragment],
    settings: &RenderSettings,
    background_color: Vector3<f64>,
    background_opacity: f64,
) -> Vector3<f64> {
    blend_pixel_traced(fragments, settings, background_color, background_opacity, None).0
}

/// Like [`blend_pixel`], also returning the pixel transmittance observed at
/// entity boundaries and after each gaussian fragment (used by invariant
/// tests).
pub fn blend_pixel_traced(
    fragments: &[Fragment],
    settings: &RenderSettings,
    background_color: Vector3<f64>,
    background_opacity: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vector3<f64>, f64) {
    let m = settings.msaa_samples.min(32);
    let mode = settings.blend_mode;
    let term = settings.termination_threshold;
    let inv_m = 1.0 / m as f64;

    let mut color = Vector3::zeros();
    let mut trans = 1.0f64;
    let mut entity: Option<EntityState> = None;
    let record = |tr: &mut Option<&mut Vec<f64>>, v: f64| {
        if let Some(t) = tr.as_deref_mut() {
            t.push(v);
        }
    };

    for frag in fragments {
        match &frag.payload {
            FragmentPayload::Gaussian { alpha, color: c } => {
                match mode {
                    BlendMode::ExactEntity => {
                        if let Some(e) = entity.take() {
                            trans = e.t_enter * e.mean_t(m);
                            record(&mut trace, trans);
                        }
                    }
                    BlendMode::PaperLiteral => {
                        // Pixel transmittance was already updated per
                        // triangle fragment; just end the entity run.
                        if entity.take().is_some() {
                            record(&mut trace, trans);
                        }
                    }
                    BlendMode::WholePixelEntity | BlendMode::Naive => {}
                }
                if trans < term {
                    break;
                }
                color += trans * *alpha * c;
                trans *= 1.0 - alpha;
                record(&mut trace, trans);
            }
            FragmentPayload::Triangle {
                mask,
                alpha,
                color: c,
            } => {
                if mode == BlendMode::Naive {
                    if trans < term {
                        break;
                    }
                    color += trans * *alpha * c;
                    trans *= 1.0 - alpha;
                    record(&mut trace, trans);
                    continue;
                }
                if entity.is_none() {
                    if trans < term {
                        break;
                    }
                    entity = Some(EntityState::open(m, trans));
                }
                let e = entity.as_mut().expect("entity open");
                let mut o_cont = 0.0;
                for j in 0..m {
                    if mask & (1 << j) != 0 {
                        o_cont += e.t[j];
                    }
                }
                o_cont *= inv_m;
                color += e.t_enter * o_cont * *alpha * c;
                for j in 0..m {
                    if mask & (1 << j) != 0 {
                        e.t[j] *= 1.0 - alpha;
                    }
                }
                if mode != BlendMode::ExactEntity {
                    let o_geo = (mask & ((1u32 << m) - 1)).count_ones() as f64 * inv_m;
                    trans *= 1.0 - o_geo * alpha;
                }
            }
        }
    }

    if mode == BlendMode::ExactEntity {
        if let Some(e) = entity.take() {
            trans = e.t_enter * e.mean_t(m);
            record(&mut trace, trans);
        }
    }

    color += trans * background_opacity * background_color;
    (color, trans)
}
