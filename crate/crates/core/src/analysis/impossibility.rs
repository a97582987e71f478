//! Profitable bribery against a fixed-bounty protocol.
//!
//! The baseline pays a fixed reward to the single included report and a
//! fixed reward to the validator. An honest validator includes the report
//! whose oracle value under the random string is smallest. Any publisher
//! left out on some string can then pay the validator to swap its report
//! in, and comes out ahead. All amounts are exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::AnalysisError;
use crate::oracle;
use crate::types::{Digest256, PublisherId};

/// Largest string space the demo enumerates.
pub const MAX_STRINGS: usize = 8;

/// Fixed-bounty protocol: `r_fix` to the included report, `v` to the
/// validator when it includes something, at most `capacity` reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub r_fix: f64,
    pub v: f64,
    pub capacity: usize,
}

/// What the validator does on one string.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StringOutcome {
    pub index: usize,
    pub honest_choice: PublisherId,
    /// Included publisher under the deviation, `None` for an empty block.
    pub best_response: Option<PublisherId>,
    pub unique: bool,
    pub p2_revenue_honest: String,
    pub p2_revenue_deviation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DemoOutcome {
    /// Nobody earns anything, so there is nothing to deviate from.
    ZeroRevenue { note: String },
    ProfitableDeviation {
        s_star: usize,
        p1: PublisherId,
        p2: PublisherId,
        r1_star: String,
        /// Paid on `s_star` for the vector holding P2's report instead.
        swap_bribe: String,
        /// Paid on every other string for the honest vector.
        spread_bribe: Option<String>,
        strings: Vec<StringOutcome>,
        unique_best_responses: bool,
        swap_taken: bool,
        expected_gain: String,
        expected_gain_value: f64,
        predicted_gain: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpossibilityReport {
    pub n_publishers: usize,
    pub string_space: usize,
    pub baseline: Baseline,
    pub outcome: DemoOutcome,
    /// Zero revenue, or a deviation that is the unique best response and
    /// gains exactly the predicted amount.
    pub matches_prediction: bool,
}

fn exact(x: f64, name: &str) -> Result<BigRational, AnalysisError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(AnalysisError::Invalid(format!("{name} must be finite and >= 0, got {x}")));
    }
    Ok(BigRational::from_float(x).expect("finite"))
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Predicted expected gain of the excluded publisher.
pub fn predicted_gain(r1_star: &BigRational, strings: usize) -> BigRational {
    let third = r1_star / int(3);
    if strings == 1 {
        third * int(2)
    } else {
        third / int(strings)
    }
}

struct Bribe {
    string: usize,
    /// Index of the included publisher, `None` for the empty block.
    vector: Option<usize>,
    amount: BigRational,
}

/// Runs the construction for `n` single-report publishers over `strings`
/// explicit random strings drawn from `seed`.
pub fn impossibility_demo(
    n: usize,
    baseline: Baseline,
    strings: usize,
    seed: u64,
) -> Result<ImpossibilityReport, AnalysisError> {
    let r = exact(baseline.r_fix, "r_fix")?;
    let v = exact(baseline.v, "v")?;
    if baseline.capacity == 0 {
        return Err(AnalysisError::ProgressViolated("a capacity of zero never includes a report".into()));
    }
    if baseline.capacity > 1 {
        return Err(AnalysisError::Invalid("the construction covers a capacity of one".into()));
    }
    if n <= baseline.capacity {
        return Err(AnalysisError::Invalid(format!(
            "need more publishers ({n}) than block capacity ({})",
            baseline.capacity
        )));
    }
    if strings == 0 || strings > MAX_STRINGS {
        return Err(AnalysisError::Invalid(format!("string space must be 1..={MAX_STRINGS}, got {strings}")));
    }

    let payloads: Vec<Digest256> =
        (0..n as u64).map(|i| oracle::digest(&[b"demo-report", &seed.to_be_bytes(), &i.to_be_bytes()])).collect();
    let space: Vec<Digest256> =
        (0..strings as u64).map(|k| oracle::digest(&[b"demo-string", &seed.to_be_bytes(), &k.to_be_bytes()])).collect();
    let honest: Vec<usize> =
        space.iter().map(|s| (0..n).min_by_key(|&i| oracle::digest(&[&payloads[i], s])).expect("n >= 2")).collect();

    let report = |outcome| ImpossibilityReport {
        n_publishers: n,
        string_space: strings,
        baseline,
        matches_prediction: match &outcome {
            DemoOutcome::ZeroRevenue { .. } => true,
            DemoOutcome::ProfitableDeviation {
                unique_best_responses,
                swap_taken,
                expected_gain,
                predicted_gain,
                ..
            } => *unique_best_responses && *swap_taken && expected_gain == predicted_gain,
        },
        outcome,
    };

    if r.is_zero() {
        return Ok(report(DemoOutcome::ZeroRevenue {
            note: "no publisher earns a positive reward, consistent with every publisher having zero expected revenue"
                .into(),
        }));
    }

    let s_star = 0;
    let p1 = honest[s_star];
    let p2 = (0..n).find(|&i| i != p1).expect("n >= 2");
    let swap = &r / int(3);
    let spread = (strings > 1).then(|| &r / (int(3) * int(strings - 1)));
    let mut bribes = vec![Bribe { string: s_star, vector: Some(p2), amount: swap.clone() }];
    if let Some(x) = &spread {
        for k in (0..strings).filter(|&k| k != s_star) {
            bribes.push(Bribe { string: k, vector: Some(honest[k]), amount: x.clone() });
        }
    }

    let mut outcomes = Vec::with_capacity(strings);
    let mut gain = BigRational::zero();
    let mut unique_all = true;
    let mut swap_taken = false;
    for (k, &h) in honest.iter().enumerate() {
        let utility = |vector: Option<usize>| {
            let mut u = if vector.is_some() { v.clone() } else { BigRational::zero() };
            for b in bribes.iter().filter(|b| b.string == k && b.vector == vector) {
                u += &b.amount;
            }
            u
        };
        let candidates: Vec<Option<usize>> = std::iter::once(None).chain((0..n).map(Some)).collect();
        let scores: Vec<BigRational> = candidates.iter().map(|&c| utility(c)).collect();
        let top = scores.iter().max().expect("non-empty").clone();
        let winners: Vec<Option<usize>> =
            candidates.iter().zip(&scores).filter(|(_, u)| **u == top).map(|(c, _)| *c).collect();
        // Ties go to the honest choice.
        let chosen = if winners.contains(&Some(h)) { Some(h) } else { winners[0] };
        let unique = winners.len() == 1;
        unique_all &= unique;
        if k == s_star {
            swap_taken = chosen == Some(p2);
        }
        let base = if h == p2 { r.clone() } else { BigRational::zero() };
        let mut dev = if chosen == Some(p2) { r.clone() } else { BigRational::zero() };
        for b in bribes.iter().filter(|b| b.string == k && b.vector == chosen) {
            dev -= &b.amount;
        }
        gain += &dev - &base;
        outcomes.push(StringOutcome {
            index: k,
            honest_choice: PublisherId(h as u32),
            best_response: chosen.map(|c| PublisherId(c as u32)),
            unique,
            p2_revenue_honest: base.to_string(),
            p2_revenue_deviation: dev.to_string(),
        });
    }
    let gain = gain / int(strings);
    let value = ratio_to_f64(&gain);
    Ok(report(DemoOutcome::ProfitableDeviation {
        s_star,
        p1: PublisherId(p1 as u32),
        p2: PublisherId(p2 as u32),
        r1_star: r.to_string(),
        swap_bribe: swap.to_string(),
        spread_bribe: spread.map(|x| x.to_string()),
        strings: outcomes,
        unique_best_responses: unique_all,
        swap_taken,
        expected_gain: gain.to_string(),
        expected_gain_value: value,
        predicted_gain: predicted_gain(&r, strings).to_string(),
    }))
}

fn ratio_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
