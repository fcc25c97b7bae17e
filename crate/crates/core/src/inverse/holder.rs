//! Log-log fit of reconstruction error against observation norm.

use serde::Serialize;

use super::{reconstruct, GroundTruth, InverseContext, NoiseSpec, ObservationSet};
use crate::error::{Error, Result};

/// `log E = slope · log D + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(log D, log E)`.
pub fn fit_holder(pairs: &[(f64, f64)]) -> Result<HolderFit> {
    if pairs.len() < 3 {
        return Err(Error::validation(
            "at least 3 (D_obs, E_err) pairs",
            format!("got {}", pairs.len()),
        ));
    }
    if let Some((d, e)) = pairs.iter().find(|(d, e)| !(*d > 0.0 && *e > 0.0 && d.is_finite() && e.is_finite())) {
        return Err(Error::validation(
            "D_obs > 0 and E_err > 0",
            format!("got pair ({d:e}, {e:e})"),
        ));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::validation(
            "distinct D_obs values",
            "all pairs share the same observation norm",
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(HolderFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LadderPoint {
    pub level: f64,
    pub d_obs: f64,
    pub e_err: f64,
}

/// Reconstructs from `clean` with each noise level (same seed throughout) and
/// records `(D_obs, E_err)`. Every point averages the antithetic pair `±n` of
/// one noise draw: the reconstruction is linear and both quantities are
/// quadratic, so the clean/noise cross terms cancel and each point equals
/// `clean + level² · noise` exactly. Fails if the observation norm decreases
/// along the increasing ladder.
pub fn noise_ladder(
    ctx: &InverseContext,
    clean: &ObservationSet,
    truth: &GroundTruth,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<LadderPoint>> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let noisy: Vec<(f64, [ObservationSet; 2])> = sorted
        .iter()
        .map(|&level| {
            let spec = NoiseSpec { level, seed };
            (level, [clean.with_signed_noise(spec, 1.0), clean.with_signed_noise(spec, -1.0)])
        })
        .collect();
    let norms = noisy
        .iter()
        .map(|(_, pair)| Ok(0.5 * (pair[0].observation_norm(ctx.grid)? + pair[1].observation_norm(ctx.grid)?)))
        .collect::<Result<Vec<f64>>>()?;
    for (i, pair) in norms.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::Numerical(format!(
                "observation norm decreased from {:e} to {:e} between noise levels {:e} and {:e}",
                pair[0],
                pair[1],
                sorted[i],
                sorted[i + 1]
            )));
        }
    }
    noisy
        .iter()
        .zip(norms)
        .map(|((level, pair), d_obs)| {
            let mut e_err = 0.0;
            for obs in pair {
                let report = reconstruct(ctx, obs, Some(truth))?;
                e_err += 0.5 * report.stability_error().unwrap_or(f64::NAN);
            }
            Ok(LadderPoint {
                level: *level,
                d_obs,
                e_err,
            })
        })
        .collect()
}
