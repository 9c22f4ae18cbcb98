//! Comparing a fitted model against held-out data or a reference model.
//!
//! State bases are arbitrary after estimation, so model-to-model checks
//! either go through basis-invariant quantities (impulse-response
//! parameters, eigenvalues, output predictions) or first align bases with
//! a similarity transform fitted on observability ranges.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::archive::Record;
use crate::error::{Error, Result};
use crate::identifiability::RankConfig;
use crate::linalg;
use crate::model::StateSpaceModel;

/// Outcome of replaying a model against one record.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub record_id: String,
    /// Samples actually predicted and scored.
    pub horizon: usize,
    /// Samples used to estimate the record's initial state.
    pub x0_samples: usize,
    pub per_channel_rms: Vec<f64>,
    pub estimated_initial_state: DVector<f64>,
    /// Impulse-response distance to a reference model, when one was given.
    pub markov_distance: Option<f64>,
}

/// Least-squares similarity transform `t` minimizing the gap between the
/// truth model's depth-`ell` observability matrix times `t` and the
/// estimate's. Returns the transform and the Frobenius residual of that
/// fit. Estimate states map into the truth basis as `t * x`.
pub fn align_similarity(
    truth: &StateSpaceModel,
    estimate: &StateSpaceModel,
    ell: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let n = truth.state_dim();
    if estimate.state_dim() != n {
        return Err(Error::DimensionMismatch {
            context: "state dimensions of the two models",
            expected: n,
            actual: estimate.state_dim(),
        });
    }
    if estimate.output_dim() != truth.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "output dimensions of the two models",
            expected: truth.output_dim(),
            actual: estimate.output_dim(),
        });
    }
    if ell <= n {
        return Err(Error::BlockRowsTooSmall { ell, bound: n });
    }
    let g_truth = truth.observability_matrix(ell);
    let g_est = estimate.observability_matrix(ell);
    let sv = linalg::singular_values(&g_truth, "truth observability matrix")?;
    let cfg = RankConfig::default();
    if cfg.rank_of_spectrum(&sv) < n {
        return Err(Error::RankDeficient {
            context: "truth observability matrix",
            rank: cfg.rank_of_spectrum(&sv),
            required: n,
            singular_values: sv,
        });
    }
    let t = linalg::lstsq(&g_truth, &g_est, cfg.rel_tol, "observability alignment")?;
    let residual = (&g_truth * &t - &g_est).norm();
    Ok((t, residual))
}

/// Root-sum-square Frobenius distance between the first `count`
/// impulse-response parameters of two models with matching channel counts.
pub fn markov_distance(a: &StateSpaceModel, b: &StateSpaceModel, count: usize) -> Result<f64> {
    if a.input_dim() != b.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input dimensions of the two models",
            expected: a.input_dim(),
            actual: b.input_dim(),
        });
    }
    if a.output_dim() != b.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "output dimensions of the two models",
            expected: a.output_dim(),
            actual: b.output_dim(),
        });
    }
    let pa = a.markov_parameters(count);
    let pb = b.markov_parameters(count);
    let sum: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).norm_squared())
        .sum();
    Ok(linalg::sqrt(sum))
}

/// [`markov_distance`] divided by the root-sum-square size of the first
/// model's parameters, guarded against an all-zero reference.
pub fn markov_distance_relative(
    reference: &StateSpaceModel,
    other: &StateSpaceModel,
    count: usize,
) -> Result<f64> {
    let dist = markov_distance(reference, other, count)?;
    let scale: f64 = reference
        .markov_parameters(count)
        .iter()
        .map(|m| m.norm_squared())
        .sum();
    let scale = linalg::sqrt(scale);
    Ok(if scale > 0.0 { dist / scale } else { dist })
}

/// Least-squares initial state of `record` under `model`, fitted on the
/// first `samples` outputs after removing the known input response.
pub fn estimate_initial_state(
    model: &StateSpaceModel,
    record: &Record,
    samples: usize,
    cfg: &RankConfig,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    let n = model.state_dim();
    check_channels(model, record)?;
    if record.len() < n {
        return Err(Error::RecordTooShort {
            record_id: record.id().into(),
            required: n,
            actual: record.len(),
        });
    }
    let samples = samples.min(record.len()).max(n);
    let p = model.output_dim();
    // forced response from a zero state; what remains is C A^(t-1) x1
    let inputs = record.inputs().columns(0, samples).into_owned();
    let forced = model.simulate(&DVector::zeros(n), &inputs)?;
    let free = record.outputs().columns(0, samples) - forced.outputs;
    let mut phi = DMatrix::zeros(p * samples, n);
    let mut rhs = DMatrix::zeros(p * samples, 1);
    let mut ca_pow = model.c().clone();
    for t in 0..samples {
        phi.view_mut((t * p, 0), (p, n)).copy_from(&ca_pow);
        rhs.view_mut((t * p, 0), (p, 1)).copy_from(&free.column(t));
        ca_pow = &ca_pow * model.a();
    }
    if !linalg::is_finite_mat(&phi) {
        return Err(Error::NonFinite {
            context: "initial-state regressor (state powers overflowed)",
        });
    }
    let x0 = linalg::lstsq(&phi, &rhs, cfg.rel_tol, "initial-state regressor")?;
    Ok(x0.column(0).into_owned())
}

fn check_channels(model: &StateSpaceModel, record: &Record) -> Result<()> {
    if record.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "record input channels vs model",
            expected: model.input_dim(),
            actual: record.input_dim(),
        });
    }
    if record.output_dim() != model.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "record output channels vs model",
            expected: model.output_dim(),
            actual: record.output_dim(),
        });
    }
    Ok(())
}

fn validate_inner(
    model: &StateSpaceModel,
    record: &Record,
    x0_samples: usize,
    horizon: Option<usize>,
    cfg: &RankConfig,
) -> Result<ValidationReport> {
    check_channels(model, record)?;
    let horizon = match horizon {
        Some(h) => h.min(record.len()),
        None => record.len(),
    };
    let n = model.state_dim();
    if horizon < n {
        return Err(Error::RecordTooShort {
            record_id: record.id().into(),
            required: n,
            actual: horizon,
        });
    }
    let x0_samples = x0_samples.min(horizon).max(n);
    let sub = Record::new(
        record.id().into(),
        record.start_time(),
        record.inputs().columns(0, horizon).into_owned(),
        record.outputs().columns(0, horizon).into_owned(),
    )?;
    let x0 = estimate_initial_state(model, &sub, x0_samples, cfg)?;
    let predicted = model.simulate(&x0, sub.inputs())?;
    let p = model.output_dim();
    let mut per_channel_rms = Vec::with_capacity(p);
    for c in 0..p {
        let err = predicted.outputs.row(c) - sub.outputs().row(c);
        per_channel_rms.push(linalg::sqrt(err.norm_squared() / horizon as f64));
    }
    Ok(ValidationReport {
        record_id: record.id().into(),
        horizon,
        x0_samples,
        per_channel_rms,
        estimated_initial_state: x0,
        markov_distance: None,
    })
}

/// Replays `model` over the whole record from a least-squares initial
/// state fitted on the first `x0_samples` outputs, and scores per-channel
/// RMS prediction error. Refuses unstable models; use
/// [`predict_validate_bounded`] for those.
pub fn predict_validate(
    model: &StateSpaceModel,
    record: &Record,
    x0_samples: usize,
    cfg: &RankConfig,
) -> Result<ValidationReport> {
    let radius = model.spectral_radius();
    if radius >= 1.0 {
        return Err(Error::UnstableModel {
            spectral_radius: radius,
        });
    }
    validate_inner(model, record, x0_samples, None, cfg)
}

/// [`predict_validate`] limited to the record's first `horizon` samples,
/// with no stability requirement. The initial-state window is clamped to
/// the horizon.
pub fn predict_validate_bounded(
    model: &StateSpaceModel,
    record: &Record,
    x0_samples: usize,
    horizon: usize,
    cfg: &RankConfig,
) -> Result<ValidationReport> {
    validate_inner(model, record, x0_samples, Some(horizon), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn white_record(model: &StateSpaceModel, x1: &DVector<f64>, len: usize, seed: u64) -> Record {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = DMatrix::from_fn(model.input_dim(), len, |_, _| rng.random::<f64>() - 0.5);
        let traj = model.simulate(x1, &inputs).unwrap();
        Record::new("v".into(), 0, inputs, traj.outputs).unwrap()
    }

    #[test]
    fn exact_model_predicts_its_own_record_perfectly() {
        let model = crate::model::tests::example_model();
        let x1 = dvector![0.7, -0.4];
        let record = white_record(&model, &x1, 30, 17);
        let report =
            predict_validate(&model, &record, 6, &RankConfig::default()).unwrap();
        assert_eq!(report.horizon, 30);
        assert!(report.per_channel_rms[0] < 1e-10);
        assert_relative_eq!(report.estimated_initial_state, x1, epsilon = 1e-9);
    }

    #[test]
    fn longer_initial_state_window_never_hurts_noise_free_fit() {
        let model = crate::model::tests::example_model();
        let record = white_record(&model, &dvector![1.0, -2.0], 40, 23);
        let cfg = RankConfig::default();
        let mut prev = f64::INFINITY;
        for samples in [2usize, 4, 8, 16, 32] {
            let report = predict_validate(&model, &record, samples, &cfg).unwrap();
            assert!(report.per_channel_rms[0] <= prev + 1e-12);
            prev = report.per_channel_rms[0];
        }
    }

    #[test]
    fn unstable_model_is_refused_unbounded_but_allowed_bounded() {
        let model = StateSpaceModel::new(
            dmatrix![1.1, 0.0; 0.0, 0.5],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, 1.0],
            dmatrix![0.0],
        )
        .unwrap();
        let record = white_record(&model, &dvector![0.1, 0.1], 25, 31);
        let cfg = RankConfig::default();
        assert!(matches!(
            predict_validate(&model, &record, 5, &cfg),
            Err(Error::UnstableModel { .. })
        ));
        let report = predict_validate_bounded(&model, &record, 5, 10, &cfg).unwrap();
        assert_eq!(report.horizon, 10);
        assert!(report.per_channel_rms[0] < 1e-8);
    }

    #[test]
    fn alignment_recovers_the_inverse_of_an_applied_transform() {
        let truth = crate::model::tests::example_model();
        let t0 = dmatrix![1.2, -0.3; 0.4, 0.9];
        let estimate = truth.apply_similarity(&t0).unwrap();
        let (t, residual) = align_similarity(&truth, &estimate, 3).unwrap();
        assert!(residual < 1e-10);
        assert_relative_eq!(&t * &t0, DMatrix::identity(2, 2), epsilon = 1e-9);
        // mapping the estimate through t lands back on the truth basis
        let restored = estimate.apply_similarity(&t).unwrap();
        assert_relative_eq!(restored.a(), truth.a(), epsilon = 1e-9);
        assert_relative_eq!(restored.b(), truth.b(), epsilon = 1e-9);
        assert_relative_eq!(restored.c(), truth.c(), epsilon = 1e-9);
    }

    #[test]
    fn alignment_requires_depth_beyond_state_dimension() {
        let truth = crate::model::tests::example_model();
        assert!(matches!(
            align_similarity(&truth, &truth, 2),
            Err(Error::BlockRowsTooSmall { .. })
        ));
    }

    #[test]
    fn markov_distance_is_zero_for_identical_and_counts_feedthrough_shift() {
        let model = crate::model::tests::example_model();
        assert_eq!(markov_distance(&model, &model, 8).unwrap(), 0.0);
        let shifted = StateSpaceModel::new(
            model.a().clone(),
            model.b().clone(),
            model.c().clone(),
            model.d() + dmatrix![0.25],
        )
        .unwrap();
        // only the first parameter differs, by exactly 0.25
        assert_relative_eq!(
            markov_distance(&model, &shifted, 8).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn markov_distance_is_similarity_invariant() {
        let model = crate::model::tests::example_model();
        let t0 = dmatrix![0.6, 1.1; -0.8, 0.5];
        let transformed = model.apply_similarity(&t0).unwrap();
        assert!(markov_distance(&model, &transformed, 10).unwrap() < 1e-9);
        assert!(markov_distance_relative(&model, &transformed, 10).unwrap() < 1e-9);
    }

    #[test]
    fn rms_is_invariant_under_state_basis_changes() {
        let model = crate::model::tests::example_model();
        let record = white_record(&model, &dvector![0.3, 0.9], 30, 41);
        let cfg = RankConfig::default();
        let base = predict_validate(&model, &record, 6, &cfg).unwrap();
        let transformed = model
            .apply_similarity(&dmatrix![2.0, 0.1; -0.4, 1.5])
            .unwrap();
        let other = predict_validate(&transformed, &record, 6, &cfg).unwrap();
        assert_relative_eq!(
            base.per_channel_rms[0],
            other.per_channel_rms[0],
            epsilon = 1e-10,
            max_relative = 1e-8
        );
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let model = crate::model::tests::example_model();
        let record = Record::new(
            "w".into(),
            0,
            DMatrix::zeros(2, 10),
            DMatrix::zeros(1, 10),
        )
        .unwrap();
        assert!(matches!(
            predict_validate(&model, &record, 5, &RankConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
