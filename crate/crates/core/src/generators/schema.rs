use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamKind {
    Continuous { min: f64, max: f64 },
    Discrete { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        Self { name: name.to_string(), kind: ParamKind::Continuous { min, max } }
    }

    pub fn discrete(name: &str, choices: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Discrete { choices: choices.iter().map(|c| c.to_string()).collect() },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ParamKind::Discrete { .. })
    }

    /// Number of choices for a discrete parameter, `None` when continuous.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            ParamKind::Discrete { choices } => Some(choices.len()),
            ParamKind::Continuous { .. } => None,
        }
    }

    pub fn check(&self, value: f64) -> Result<()> {
        let ok = match &self.kind {
            ParamKind::Continuous { min, max } => value.is_finite() && value >= *min && value <= *max,
            ParamKind::Discrete { choices } => {
                value.fract() == 0.0 && value >= 0.0 && (value as usize) < choices.len()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(self.name.clone()))
        }
    }

    fn is_well_formed(&self) -> bool {
        match &self.kind {
            ParamKind::Continuous { min, max } => min < max,
            ParamKind::Discrete { choices } => choices.len() >= 2,
        }
    }
}

/// Ordered parameter list of one generator. The order fixes the token order
/// of the canonical vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSchema {
    pub generator_id: String,
    pub params: Vec<ParamSpec>,
}

impl GeneratorSchema {
    pub fn new(generator_id: &str, params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidInput("schema needs at least one parameter".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if !p.is_well_formed() || params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidParam(p.name.clone()));
            }
        }
        Ok(Self { generator_id: generator_id.to_string(), params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn discrete_count(&self) -> usize {
        self.params.iter().filter(|p| p.is_discrete()).count()
    }

    pub fn validate(&self, p: &ParamVector) -> Result<()> {
        if p.generator_id != self.generator_id || p.values.len() != self.params.len() {
            return Err(Error::InvalidParam(format!(
                "expected {} values for `{}`",
                self.params.len(),
                self.generator_id
            )));
        }
        self.params.iter().zip(&p.values).try_for_each(|(s, &v)| s.check(v))
    }

    /// Continuous midpoints and the first choice of every discrete parameter.
    pub fn default_params(&self) -> ParamVector {
        let values = self
            .params
            .iter()
            .map(|p| match p.kind {
                ParamKind::Continuous { min, max } => 0.5 * (min + max),
                ParamKind::Discrete { .. } => 0.0,
            })
            .collect();
        ParamVector { generator_id: self.generator_id.clone(), values }
    }

    /// Uniform draw over continuous ranges and discrete choices.
    pub fn sample_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> ParamVector {
        let values = self
            .params
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Continuous { min, max } => rng.gen_range(*min..=*max),
                ParamKind::Discrete { choices } => rng.gen_range(0..choices.len()) as f64,
            })
            .collect();
        ParamVector { generator_id: self.generator_id.clone(), values }
    }

    /// Parses `{name: value}` where discrete values may be a label or an index.
    /// Missing names fall back to defaults.
    pub fn params_from_json(&self, value: &Value) -> Result<ParamVector> {
        let obj = match value {
            Value::Object(m) => m,
            _ => return Err(Error::InvalidInput("params must be a JSON object".into())),
        };
        if let Some(unknown) = obj.keys().find(|k| self.index_of(k).is_none()) {
            return Err(Error::InvalidParam(unknown.clone()));
        }
        let mut p = self.default_params();
        for (i, spec) in self.params.iter().enumerate() {
            let Some(v) = obj.get(&spec.name) else { continue };
            let bad = || Error::InvalidParam(spec.name.clone());
            p.values[i] = match (&spec.kind, v) {
                (ParamKind::Discrete { choices }, Value::String(s)) => {
                    choices.iter().position(|c| c == s).ok_or_else(bad)? as f64
                }
                (_, Value::Number(n)) => n.as_f64().ok_or_else(bad)?,
                _ => return Err(bad()),
            };
        }
        self.validate(&p)?;
        Ok(p)
    }

    /// Inverse of [`params_from_json`](Self::params_from_json): discrete values as labels.
    pub fn params_to_json(&self, p: &ParamVector) -> Value {
        let mut m = Map::new();
        for (spec, &v) in self.params.iter().zip(&p.values) {
            let entry = match &spec.kind {
                ParamKind::Discrete { choices } => Value::String(choices[v as usize].clone()),
                ParamKind::Continuous { .. } => Value::from(v),
            };
            m.insert(spec.name.clone(), entry);
        }
        Value::Object(m)
    }
}

/// One value per schema entry: a real for continuous parameters, a choice
/// index (stored as an integral `f64`) for discrete ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub generator_id: String,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn get(&self, schema: &GeneratorSchema, name: &str) -> f64 {
        self.values[schema.index_of(name).expect("parameter name from built-in schema")]
    }

    pub fn choice(&self, schema: &GeneratorSchema, name: &str) -> usize {
        self.get(schema, name) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> GeneratorSchema {
        GeneratorSchema::new(
            "toy",
            vec![ParamSpec::continuous("a", 0.0, 1.0), ParamSpec::discrete("b", &["p", "q", "r", "s"])],
        )
        .unwrap()
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(GeneratorSchema::new("x", vec![]).is_err());
        assert!(GeneratorSchema::new("x", vec![ParamSpec::continuous("a", 1.0, 1.0)]).is_err());
        assert!(GeneratorSchema::new("x", vec![ParamSpec::discrete("a", &["only"])]).is_err());
        let dup = vec![ParamSpec::continuous("a", 0.0, 1.0), ParamSpec::continuous("a", 0.0, 2.0)];
        assert!(GeneratorSchema::new("x", dup).is_err());
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(toy()).unwrap();
        assert_eq!(v["params"][0]["kind"], "continuous");
        assert_eq!(v["params"][0]["max"], 1.0);
        assert_eq!(v["params"][1]["choices"][3], "s");
        let back: GeneratorSchema = serde_json::from_value(v).unwrap();
        assert_eq!(back, toy());
    }

    #[test]
    fn params_json_labels_and_errors() {
        let s = toy();
        let p = s.params_from_json(&serde_json::json!({"a": 0.25, "b": "r"})).unwrap();
        assert_eq!(p.values, vec![0.25, 2.0]);
        assert_eq!(s.params_from_json(&s.params_to_json(&p)).unwrap(), p);
        let err = s.params_from_json(&serde_json::json!({"a": 2.0})).unwrap_err();
        assert!(matches!(err, Error::InvalidParam(n) if n == "a"));
        let err = s.params_from_json(&serde_json::json!({"zz": 1})).unwrap_err();
        assert!(matches!(err, Error::InvalidParam(n) if n == "zz"));
        assert!(s.params_from_json(&serde_json::json!({"b": 1.5})).is_err());
    }

    #[test]
    fn sampling_laws() {
        let s = toy();
        assert_eq!(s.sample_params(3), s.sample_params(3));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut mean = 0.0;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let p = s.sample_with(&mut rng);
            s.validate(&p).unwrap();
            mean += p.values[0] / n as f64;
            counts[p.values[1] as usize] += 1;
        }
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.03);
        }
    }
}
