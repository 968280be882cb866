//! Parameter grids of the eight classes and dataset generation.

use super::{solve, SolverConfig, SolverError};
use crate::features::{extract_all, FeatureError};
use crate::par::Exec;
use crate::types::{normalize_field, ClassId, Dataset, NormalizedField, PdeSpec, Sample};
use thiserror::Error;

const BC_WIDE: [f64; 4] = [-4.0, 1.0, 6.0, 11.0];
const BC_NARROW: [f64; 2] = [1.0, 6.0];
const C_SIX: [f64; 6] = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0];
const C_WAVE_SIX: [f64; 6] = [100.0, 150.0, 200.0, 250.0, 300.0, 350.0];
const C_WAVE_THREE: [f64; 3] = [100.0, 200.0, 300.0];

/// Which three walls vary; the remaining one sits at the initial value.
#[derive(Clone, Copy)]
enum FreeWalls {
    /// x-min, y-min, y-max vary; x-max fixed.
    FirstThree,
    /// y-min, y-max, x-max vary; x-min fixed.
    LastThree,
}

struct ClassGrid {
    e: f64,
    d: &'static [f64],
    c: &'static [f64],
    b: &'static [f64],
    walls: &'static [f64],
    free: FreeWalls,
}

fn class_grid(class: ClassId) -> ClassGrid {
    use FreeWalls::*;
    let g = |e, d, c, b, walls, free| ClassGrid {
        e,
        d,
        c,
        b,
        walls,
        free,
    };
    match class.get() {
        1 => g(0.0, &[1.0], &C_SIX, &[0.0], &BC_WIDE, FirstThree),
        2 => g(
            0.0,
            &[1.0],
            &[1.0, 6.0, 11.0],
            &[70.0, 90.0, 110.0, 130.0],
            &BC_NARROW,
            FirstThree,
        ),
        3 => g(0.0, &[0.0], &C_SIX, &[0.0], &BC_WIDE, FirstThree),
        4 => g(
            0.0,
            &[0.0],
            &[5.0, 8.0, 11.0],
            &[50.0, 70.0, 90.0, 110.0],
            &BC_NARROW,
            LastThree,
        ),
        5 => g(1.0, &[0.0], &C_WAVE_SIX, &[0.0], &BC_WIDE, FirstThree),
        6 => g(
            1.0,
            &[0.0],
            &C_WAVE_THREE,
            &[700.0, 900.0, 1100.0, 1300.0],
            &BC_NARROW,
            FirstThree,
        ),
        7 => g(
            1.0,
            &[200.0, 300.0],
            &C_WAVE_THREE,
            &[0.0],
            &BC_WIDE,
            FirstThree,
        ),
        _ => g(
            1.0,
            &[200.0, 300.0],
            &C_WAVE_SIX,
            &[900.0, 1100.0],
            &BC_NARROW,
            LastThree,
        ),
    }
}

/// One enumerated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub id: String,
    pub class: ClassId,
    pub spec: PdeSpec,
}

/// Full parameter grid for the requested classes, in class then
/// (d, c, bx, by, walls) lexicographic order.
pub fn enumerate_specs(classes: &[ClassId]) -> Vec<SampleSpec> {
    let mut out = Vec::new();
    let mut sorted = classes.to_vec();
    sorted.sort();
    sorted.dedup();
    for class in sorted {
        let g = class_grid(class);
        let mut k = 0usize;
        for &d in g.d {
            for &c in g.c {
                for &bx in g.b {
                    for &by in g.b {
                        for &w0 in g.walls {
                            for &w1 in g.walls {
                                for &w2 in g.walls {
                                    let ic = PdeSpec::STD_IC;
                                    let bc = match g.free {
                                        FreeWalls::FirstThree => [w0, w1, w2, ic],
                                        FreeWalls::LastThree => [ic, w0, w1, w2],
                                    };
                                    let spec = PdeSpec::standard(g.e, d, c, bx, by, bc);
                                    debug_assert_eq!(spec.labels().class_id(), class);
                                    out.push(SampleSpec {
                                        id: format!("c{}_{:04}", class, k),
                                        class,
                                        spec,
                                    });
                                    k += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("sample {id} ({spec:?}): {source}")]
    Solver {
        id: String,
        spec: Box<PdeSpec>,
        #[source]
        source: SolverError,
    },
    #[error("sample {id}: {source}")]
    Features {
        id: String,
        #[source]
        source: FeatureError,
    },
}

/// Solves and normalizes each grid point, handing the field to `f`.
/// Results come back in enumeration order.
pub fn generate_samples<T, F>(
    specs: &[SampleSpec],
    cfg: &SolverConfig,
    exec: Exec,
    f: F,
) -> Result<Vec<T>, GenerateError>
where
    T: Send,
    F: Fn(&SampleSpec, NormalizedField) -> Result<T, GenerateError> + Sync + Send,
{
    exec.try_map(specs, |s| {
        let field = solve(&s.spec, cfg).map_err(|source| GenerateError::Solver {
            id: s.id.clone(),
            spec: Box::new(s.spec),
            source,
        })?;
        f(s, normalize_field(&field))
    })
}

/// Generates the dataset and keeps only the extracted features per sample.
pub fn generate_dataset(
    seed: u64,
    classes: &[ClassId],
    cfg: &SolverConfig,
) -> Result<Dataset, GenerateError> {
    generate_dataset_with(seed, classes, cfg, Exec::default())
}

pub fn generate_dataset_with(
    seed: u64,
    classes: &[ClassId],
    cfg: &SolverConfig,
    exec: Exec,
) -> Result<Dataset, GenerateError> {
    let specs = enumerate_specs(classes);
    let samples = generate_samples(&specs, cfg, exec, |s, norm| {
        let features =
            extract_all(&norm.field, &s.spec).map_err(|source| GenerateError::Features {
                id: s.id.clone(),
                source,
            })?;
        Ok(Sample {
            id: s.id.clone(),
            labels: s.spec.labels(),
            spec: Some(s.spec),
            features,
        })
    })?;
    Ok(Dataset { seed, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_class_has_384_grid_points() {
        for class in ClassId::ALL {
            let specs = enumerate_specs(&[class]);
            assert_eq!(specs.len(), 384, "class {class}");
            assert!(specs.iter().all(|s| s.spec.labels().class_id() == class));
        }
        assert_eq!(enumerate_specs(&ClassId::ALL).len(), 3072);
    }

    #[test]
    fn grid_counts_match_combinatorics() {
        // diffusion: 6 c values x 4^3 walls
        assert_eq!(C_SIX.len() * BC_WIDE.len().pow(3), 384);
        // convection-diffusion: 3 c x 4^2 (bx, by) x 2^3 walls
        assert_eq!(3 * 4usize.pow(2) * BC_NARROW.len().pow(3), 384);
    }

    #[test]
    fn fixed_wall_placement() {
        let c1 = enumerate_specs(&[ClassId::new(1).unwrap()]);
        assert!(c1.iter().all(|s| s.spec.bc[3] == 0.1));
        let c4 = enumerate_specs(&[ClassId::new(4).unwrap()]);
        assert!(c4.iter().all(|s| s.spec.bc[0] == 0.1 && s.spec.is_steady()));
        let ids: std::collections::HashSet<_> = enumerate_specs(&ClassId::ALL)
            .into_iter()
            .map(|s| s.id)
            .collect();
        assert_eq!(ids.len(), 3072);
    }
}
