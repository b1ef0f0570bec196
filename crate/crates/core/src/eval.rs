//! Precision@θ: a selection counts as a true positive when its MSE to the
//! ground-truth thumbnail is at most θ.
//!
//! In pixel space both images are resized to a common square resolution
//! and compared as 8-bit RGB values (0–255). In feature space the
//! comparison is between feature rows and shapes must agree.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data_io::Image;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const EVAL_RESOLUTION: usize = 224;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Pixel,
    Feature,
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel" => Ok(Space::Pixel),
            "feature" => Ok(Space::Feature),
            other => Err(Error::Usage(format!("unknown comparison space {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRule {
    pub theta: f64,
    pub space: Space,
    /// Side length both images are resized to in pixel space.
    pub resolution: usize,
}

impl MatchRule {
    pub fn new(theta: f64, space: Space) -> Result<Self> {
        if !(theta >= 0.0) || theta.is_infinite() {
            return Err(Error::Usage(format!("θ must be a finite non-negative number, got {theta}")));
        }
        Ok(MatchRule {
            theta,
            space,
            resolution: EVAL_RESOLUTION,
        })
    }
}

/// Something a rule can compare: an image or a feature row.
#[derive(Clone, Copy, Debug)]
pub enum Candidate<'a> {
    Pixels(&'a Image),
    Features(&'a Tensor),
}

/// MSE over 8-bit RGB values after resizing both images to `resolution`².
pub fn pixel_mse(a: &Image, b: &Image, resolution: usize) -> f64 {
    let qa = a.resize(resolution, resolution).to_u8();
    let qb = b.resize(resolution, resolution).to_u8();
    let mut acc = 0.0;
    for (x, y) in qa.iter().zip(&qb) {
        let d = f64::from(*x) - f64::from(*y);
        acc += d * d;
    }
    acc / qa.len() as f64
}

pub fn feature_mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim("feature_mse", a.shape(), b.shape()));
    }
    Ok(crate::fusion::row_mse(a.data(), b.data()))
}

/// Distance under the rule's comparison space.
pub fn match_distance(candidate: Candidate<'_>, ground_truth: Candidate<'_>, rule: &MatchRule) -> Result<f64> {
    match (rule.space, candidate, ground_truth) {
        (Space::Pixel, Candidate::Pixels(a), Candidate::Pixels(b)) => Ok(pixel_mse(a, b, rule.resolution)),
        (Space::Feature, Candidate::Features(a), Candidate::Features(b)) => feature_mse(a, b),
        (space, _, _) => Err(Error::Usage(format!(
            "{space:?} rule applied to inputs of another space"
        ))),
    }
}

pub fn true_positive(candidate: Candidate<'_>, ground_truth: Candidate<'_>, rule: &MatchRule) -> Result<bool> {
    Ok(match_distance(candidate, ground_truth, rule)? <= rule.theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub theta: f64,
    pub precision: f64,
    pub true_positives: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent_difference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub space: Space,
    /// Pixel-space evaluation resolution; absent in feature space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    pub value_range: String,
    pub rows: Vec<EvalRow>,
}

fn normalise_thetas(thetas: &[f64]) -> Result<Vec<f64>> {
    if thetas.is_empty() {
        return Err(Error::Usage("no θ values given".into()));
    }
    let mut out = Vec::with_capacity(thetas.len());
    for &t in thetas {
        MatchRule::new(t, Space::Feature)?;
        out.push(t);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// One row per θ (ascending) counting distances `≤ θ`.
pub fn precision_from_distances(distances: &[f64], thetas: &[f64], space: Space) -> Result<EvalReport> {
    if distances.is_empty() {
        return Err(Error::Usage("precision over zero results".into()));
    }
    let total = distances.len();
    let rows = normalise_thetas(thetas)?
        .into_iter()
        .map(|theta| {
            let tp = distances.iter().filter(|&&d| d <= theta).count();
            EvalRow {
                theta,
                precision: tp as f64 / total as f64,
                true_positives: tp,
                total,
                comparator: None,
                percent_difference: None,
            }
        })
        .collect();
    Ok(EvalReport {
        space,
        resolution: (space == Space::Pixel).then_some(EVAL_RESOLUTION),
        value_range: match space {
            Space::Pixel => "8-bit RGB, 0-255".into(),
            Space::Feature => "raw feature values".into(),
        },
        rows,
    })
}

/// Precision@θ over (candidate, ground truth) pairs.
pub fn precision_at(
    results: &[(Candidate<'_>, Candidate<'_>)],
    thetas: &[f64],
    space: Space,
) -> Result<EvalReport> {
    let rule = MatchRule::new(0.0, space)?;
    let distances = results
        .iter()
        .map(|&(c, g)| match_distance(c, g, &rule))
        .collect::<Result<Vec<_>>>()?;
    precision_from_distances(&distances, thetas, space)
}

/// `(a − b) / b × 100`; `None` when `b` is zero or the result overflows.
pub fn percent_difference(a: f64, b: f64) -> Option<f64> {
    Some((a - b) / b * 100.0).filter(|p| b != 0.0 && p.is_finite())
}

/// `a`'s rows with `b`'s precision as comparator and the percent difference.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<EvalReport> {
    let same = a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| x.theta == y.theta);
    if !same {
        return Err(Error::Usage("compared reports use different θ values".into()));
    }
    let mut out = a.clone();
    for (row, other) in out.rows.iter_mut().zip(&b.rows) {
        row.comparator = Some(other.precision);
        row.percent_difference = percent_difference(row.precision, other.precision);
    }
    Ok(out)
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = match self.resolution {
            Some(r) => writeln!(out, "Precision @ θ  (space: {:?}, {r}x{r}, {})", self.space, self.value_range),
            None => writeln!(out, "Precision @ θ  (space: {:?}, {})", self.space, self.value_range),
        };
        let compared = self.rows.iter().any(|r| r.comparator.is_some());
        let _ = write!(out, "{:>10}  {:>9}  {:>9}", "theta", "precision", "TP/total");
        if compared {
            let _ = write!(out, "  {:>10}  {:>12}", "comparator", "% difference");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{:>10}  {:>9.3}  {:>9}",
                format_theta(r.theta),
                r.precision,
                format!("{}/{}", r.true_positives, r.total)
            );
            if compared {
                let cmp = r.comparator.map_or("-".into(), |c| format!("{c:.3}"));
                let pct = r.percent_difference.map_or("-".into(), |p| format!("{p:+.1}%"));
                let _ = write!(out, "  {cmp:>10}  {pct:>12}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("report JSON: {e}")))
    }
}

fn format_theta(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}
