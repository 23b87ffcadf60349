//! Reversible projection between generator parameters and the normalized
//! vector in `[-1, 1]^N` that the diffusion model operates on.
//!
//! Continuous parameters map linearly from `[min, max]`. Discrete choices
//! split `[-1, 1]` into `K` equal pieces and embed at the piece center, so a
//! perturbation smaller than `1/K` never changes the decoded choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorSchema, ParamKind, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonVector {
    pub generator_id: String,
    pub x: Vec<f64>,
}

impl CanonVector {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Euclidean distance between two canonical vectors.
    pub fn l2(&self, other: &CanonVector) -> f64 {
        self.x.iter().zip(&other.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

pub fn piece_center(k: usize, choices: usize) -> f64 {
    -1.0 + (2 * k + 1) as f64 / choices as f64
}

pub fn canonicalize(schema: &GeneratorSchema, p: &ParamVector) -> Result<CanonVector> {
    schema.validate(p)?;
    let x = schema
        .params
        .iter()
        .zip(&p.values)
        .map(|(spec, &v)| match &spec.kind {
            ParamKind::Continuous { min, max } => 2.0 * (v - min) / (max - min) - 1.0,
            ParamKind::Discrete { choices } => piece_center(v as usize, choices.len()),
        })
        .collect();
    Ok(CanonVector { generator_id: schema.generator_id.clone(), x })
}

/// Clamps to `[-1, 1]` and maps back. Sampler overshoot is tolerated.
pub fn decanonicalize(schema: &GeneratorSchema, x: &CanonVector) -> Result<ParamVector> {
    if x.x.len() != schema.len() {
        return Err(Error::InvalidParam(format!(
            "expected {} canonical entries, got {}",
            schema.len(),
            x.x.len()
        )));
    }
    if x.x.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("canonical vector contains NaN".into()));
    }
    let values = schema
        .params
        .iter()
        .zip(&x.x)
        .map(|(spec, &raw)| {
            let v = raw.clamp(-1.0, 1.0);
            match &spec.kind {
                ParamKind::Continuous { min, max } => (min + (v + 1.0) * (max - min) / 2.0).clamp(*min, *max),
                ParamKind::Discrete { choices } => {
                    let k = choices.len();
                    (((v + 1.0) * k as f64 / 2.0).floor() as usize).min(k - 1) as f64
                }
            }
        })
        .collect();
    Ok(ParamVector { generator_id: schema.generator_id.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::ParamSpec;
    use proptest::prelude::*;

    fn one(spec: ParamSpec) -> GeneratorSchema {
        GeneratorSchema::new("t", vec![spec]).unwrap()
    }

    fn enc(s: &GeneratorSchema, v: f64) -> f64 {
        canonicalize(s, &ParamVector { generator_id: "t".into(), values: vec![v] }).unwrap().x[0]
    }

    fn dec(s: &GeneratorSchema, x: f64) -> f64 {
        decanonicalize(s, &CanonVector { generator_id: "t".into(), x: vec![x] }).unwrap().values[0]
    }

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    fn discrete(k: usize) -> GeneratorSchema {
        let l = labels(k);
        let refs: Vec<&str> = l.iter().map(|s| s.as_str()).collect();
        one(ParamSpec::discrete("d", &refs))
    }

    #[test]
    fn worked_examples() {
        let c = one(ParamSpec::continuous("c", 0.0, 10.0));
        assert_eq!(enc(&c, 5.0), 0.0);
        assert_eq!(dec(&c, 1.0), 10.0);
        let d2 = discrete(2);
        assert_eq!(enc(&d2, 0.0), -0.5);
        assert_eq!(enc(&d2, 1.0), 0.5);
        assert_eq!(dec(&d2, 1.07), 1.0);
        let d4 = discrete(4);
        assert_eq!(enc(&d4, 2.0), 0.25);
        assert_eq!(dec(&d4, 0.3), 2.0);
    }

    #[test]
    fn errors() {
        let c = one(ParamSpec::continuous("c", 0.0, 10.0));
        let nan = CanonVector { generator_id: "t".into(), x: vec![f64::NAN] };
        assert!(matches!(decanonicalize(&c, &nan), Err(Error::InvalidInput(_))));
        let short = CanonVector { generator_id: "t".into(), x: vec![] };
        assert!(matches!(decanonicalize(&c, &short), Err(Error::InvalidParam(_))));
        let bad = ParamVector { generator_id: "t".into(), values: vec![11.0] };
        assert!(matches!(canonicalize(&c, &bad), Err(Error::InvalidParam(_))));
    }

    proptest! {
        #[test]
        fn discrete_round_trip_and_margin(k in 2usize..=64, pick in 0usize..64, frac in -0.999f64..0.999) {
            let s = discrete(k);
            let choice = (pick % k) as f64;
            let x = enc(&s, choice);
            prop_assert_eq!(dec(&s, x), choice);
            prop_assert_eq!(dec(&s, x + frac / k as f64), choice);
        }

        #[test]
        fn continuous_round_trip(lo in -100.0f64..100.0, span in 1e-3f64..50.0, t in 0.0f64..=1.0) {
            let s = one(ParamSpec::continuous("c", lo, lo + span));
            let v = (lo + t * span).min(lo + span);
            prop_assert!((dec(&s, enc(&s, v)) - v).abs() <= 1e-9 * span);
        }

        #[test]
        fn monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let s = one(ParamSpec::continuous("c", 0.0, 10.0));
            prop_assume!(a < b);
            prop_assert!(enc(&s, a) < enc(&s, b));
        }
    }
}
