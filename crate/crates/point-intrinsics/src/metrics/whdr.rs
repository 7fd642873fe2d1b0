//! Weighted human disagreement rate over pairwise darkness judgments.

use super::{MetricError, Result};
use crate::raster::Raster;
use serde::{Deserialize, Serialize};

/// Luminance floor used when forming reflectance ratios.
const LUMINANCE_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Darker {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
    #[serde(rename = "E")]
    Equal,
}

/// One human judgment: which of two image points has darker reflectance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Judgment {
    pub p1: (u32, u32),
    pub p2: (u32, u32),
    pub darker: Darker,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JudgmentSet {
    judgments: Vec<Judgment>,
}

impl JudgmentSet {
    pub fn new(judgments: Vec<Judgment>) -> Result<Self> {
        for (i, j) in judgments.iter().enumerate() {
            if !j.weight.is_finite() || j.weight < 0.0 {
                return Err(MetricError::BadJudgment(format!(
                    "judgment {i}: weight {} is not a finite non-negative number",
                    j.weight
                )));
            }
        }
        Ok(Self { judgments })
    }

    /// Parses the JSON array format:
    /// `[{"p1":[u,v],"p2":[u,v],"darker":"1"|"2"|"E","weight":w}, ...]`.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let judgments: Vec<Judgment> = serde_json::from_slice(bytes)
            .map_err(|e| MetricError::BadJudgment(e.to_string()))?;
        Self::new(judgments)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.judgments).expect("judgments serialize")
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

fn luminance(map: &Raster, u: u32, v: u32) -> f64 {
    let px = map.pixel(u as usize, v as usize);
    let mean = px.iter().sum::<f64>() / px.len() as f64;
    mean.max(LUMINANCE_EPSILON)
}

/// Weighted fraction of judgments the reflectance map contradicts.
///
/// With r = lum(p1)/lum(p2), the predicted relation is: p2 darker when
/// r > 1+δ, p1 darker when r < 1/(1+δ), equal otherwise.
pub fn whdr(reflectance: &Raster, judgments: &JudgmentSet, delta: f64) -> Result<f64> {
    let (w, h) = (reflectance.width(), reflectance.height());
    let mut disagree = 0.0;
    let mut total = 0.0;
    for j in judgments.judgments() {
        for &(u, v) in [&j.p1, &j.p2] {
            if u as usize >= w || v as usize >= h {
                return Err(MetricError::JudgmentOutOfBounds { u, v, width: w, height: h });
            }
        }
        let r = luminance(reflectance, j.p1.0, j.p1.1) / luminance(reflectance, j.p2.0, j.p2.1);
        let predicted = if r > 1.0 + delta {
            Darker::Second
        } else if r < 1.0 / (1.0 + delta) {
            Darker::First
        } else {
            Darker::Equal
        };
        total += j.weight;
        if predicted != j.darker {
            disagree += j.weight;
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(disagree / total)
}
