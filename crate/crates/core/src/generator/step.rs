use super::{Generator, OutpaintRequest};
use crate::canvas::{attach_view, intersection_fraction, Panorama};
use crate::conditioning::Conditioner;
use crate::error::{Error, Result};
use crate::geom::{project_view_masked, view_footprint, Mask, Raster, ViewSpec};

/// Identifier recorded when a view needs no generation at all.
pub const PASSTHROUGH_ID: &str = "passthrough";

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The completed view raster that was attached.
    pub nfov: Raster,
    pub generator_id: String,
    pub latency_ms: u64,
    pub known_before: f64,
    pub known_after: f64,
}

/// Copies the known pixels of `source` over `generated`.
pub fn enforce_known(generated: &mut Raster, source: &Raster, mask: &Mask) {
    let ch = source.channels;
    for (i, &k) in mask.data.iter().enumerate() {
        if k {
            generated.data[i * ch..(i + 1) * ch]
                .copy_from_slice(&source.data[i * ch..(i + 1) * ch]);
        }
    }
}

/// One autoregressive step: project, condition, outpaint, attach.
///
/// When every sample of the view is already known (the unknown panorama
/// pixels fall between samples) the projected view is attached as is and
/// the generator is not called.
pub fn step<G: Generator + ?Sized>(
    state: &Panorama,
    view: &ViewSpec,
    prompt: &str,
    seed: u64,
    generator: &G,
    conditioner: &Conditioner,
) -> Result<(Panorama, StepOutcome)> {
    let footprint = view_footprint(view, state.width())?;
    let unknown = Mask {
        width: state.width(),
        height: state.height(),
        data: state.mask().data.iter().map(|k| !k).collect(),
    };
    if intersection_fraction(&footprint, &unknown) == 0.0 {
        return Err(Error::Contract("view holds no unknown pixels".into()));
    }
    let (nfov, nfov_mask) = project_view_masked(state.image(), state.mask(), view)?;
    if !nfov_mask.any_known() {
        return Err(Error::Contract(
            "view has no known pixels to condition on".into(),
        ));
    }

    let (completed, generator_id, latency_ms) = if nfov_mask.all_known() {
        (nfov, PASSTHROUGH_ID.to_string(), 0)
    } else {
        let bundle = conditioner.build(prompt, state, &nfov, &nfov_mask, view)?;
        let req = OutpaintRequest {
            nfov,
            nfov_mask,
            bundle,
            prompt: prompt.to_string(),
            seed,
            view: *view,
        };
        let res = generator.outpaint(&req)?;
        if !res.nfov.same_shape(&req.nfov) {
            return Err(Error::Protocol(format!(
                "generator returned {}x{}x{}, expected {}x{}x{}",
                res.nfov.width,
                res.nfov.height,
                res.nfov.channels,
                req.nfov.width,
                req.nfov.height,
                req.nfov.channels
            )));
        }
        if res.nfov.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("generator output is not finite".into()));
        }
        let mut out = res.nfov;
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        enforce_known(&mut out, &req.nfov, &req.nfov_mask);
        (out, res.generator_id, res.latency_ms)
    };

    let next = attach_view(state, &completed, view)?;
    let outcome = StepOutcome {
        nfov: completed,
        generator_id,
        latency_ms,
        known_before: state.known_fraction(),
        known_after: next.known_fraction(),
    };
    Ok((next, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canvas::init_from_nfov;
    use crate::conditioning::ConditioningConfig;
    use crate::generator::{OutpaintResult, ReferenceGenerator};

    fn setup() -> (Panorama, Conditioner) {
        let seed_view = ViewSpec::square(0.0, 0.0, 32).unwrap();
        let x = Raster::from_fn(32, 32, 3, |x, y, c| ((x + 2 * y + c) % 17) as f32 / 17.0);
        (
            init_from_nfov(&x, &seed_view, 128).unwrap(),
            Conditioner::new(ConditioningConfig::default()).unwrap(),
        )
    }

    struct Wrong;
    impl Generator for Wrong {
        fn id(&self) -> String {
            "wrong".into()
        }
        fn outpaint(&self, _: &OutpaintRequest) -> Result<OutpaintResult> {
            Ok(OutpaintResult {
                nfov: Raster::new(3, 3, 3),
                generator_id: self.id(),
                latency_ms: 0,
            })
        }
    }

    struct Overwrite;
    impl Generator for Overwrite {
        fn id(&self) -> String {
            "overwrite".into()
        }
        fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
            Ok(OutpaintResult {
                nfov: Raster::filled(req.nfov.width, req.nfov.height, 3, 2.0),
                generator_id: self.id(),
                latency_ms: 0,
            })
        }
    }

    #[test]
    fn step_grows_coverage_and_keeps_known_pixels() {
        let (state, cond) = setup();
        let view = ViewSpec::square(45.0, 0.0, 32).unwrap();
        let (next, out) = step(&state, &view, "a lake", 1, &ReferenceGenerator, &cond).unwrap();
        assert!(out.known_after > out.known_before);
        assert_eq!(out.generator_id, "reference-v1");
        for (i, &k) in state.mask().data.iter().enumerate() {
            if k {
                assert!(next.mask().data[i]);
                assert_eq!(
                    next.image().data[i * 3..i * 3 + 3],
                    state.image().data[i * 3..i * 3 + 3]
                );
            }
        }
    }

    #[test]
    fn known_view_is_contract_error() {
        let (state, cond) = setup();
        let view = ViewSpec::new(0.0, 0.0, 20.0, 16, 16).unwrap();
        assert!(matches!(
            step(&state, &view, "", 0, &ReferenceGenerator, &cond),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn disjoint_view_is_contract_error() {
        let (state, cond) = setup();
        let view = ViewSpec::square(180.0, 0.0, 32).unwrap();
        assert!(matches!(
            step(&state, &view, "", 0, &ReferenceGenerator, &cond),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn wrong_size_output_is_protocol_error() {
        let (state, cond) = setup();
        let view = ViewSpec::square(45.0, 0.0, 32).unwrap();
        assert!(matches!(
            step(&state, &view, "", 0, &Wrong, &cond),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn generator_output_is_clamped_and_known_restored() {
        let (state, cond) = setup();
        let view = ViewSpec::square(45.0, 0.0, 32).unwrap();
        let (next, out) = step(&state, &view, "", 0, &Overwrite, &cond).unwrap();
        assert!(out.nfov.data.iter().all(|v| (0.0..=1.0).contains(v)));
        let (proj, mask) = project_view_masked(state.image(), state.mask(), &view).unwrap();
        for (i, &k) in mask.data.iter().enumerate() {
            if k {
                assert_eq!(out.nfov.data[i * 3..i * 3 + 3], proj.data[i * 3..i * 3 + 3]);
            }
        }
        assert!(next.known_fraction() > state.known_fraction());
    }
}
