//! Arm and result files.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use whittle::{IndexResult, RawArm, RestlessArm, validate_arm};

/// Reads and validates an arm file. Parse errors name the offending field.
pub fn read_arm(path: &Path) -> anyhow::Result<RestlessArm> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_arm(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_arm(text: &str) -> anyhow::Result<RestlessArm> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawArm = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        match path.as_str() {
            "." => anyhow::anyhow!("{}", e.into_inner()),
            _ => anyhow::anyhow!("field `{path}`: {}", e.into_inner()),
        }
    })?;
    Ok(validate_arm(&raw)?)
}

pub fn write_arm(path: &Path, arm: &RestlessArm) -> anyhow::Result<()> {
    let text = serde_json::to_string(&arm.to_raw())?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Serialized outcome of one index computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub status: String,
    #[serde(with = "extended_floats")]
    pub indices: Option<Vec<f64>>,
    pub sigma: Option<Vec<usize>>,
    pub iterations: usize,
    pub variant: String,
    pub elapsed_ms: f64,
}

impl ResultFile {
    pub fn new(result: &IndexResult, variant: String, elapsed_ms: f64) -> Self {
        let indices = result.indices().map(<[f64]>::to_vec);
        Self {
            status: result.status().to_string(),
            sigma: indices.as_ref().map(|_| result.sigma.clone()),
            indices,
            iterations: result.iterations,
            variant,
            elapsed_ms,
        }
    }

    /// Process exit code for this outcome.
    pub fn exit_code(&self) -> u8 {
        match self.status.as_str() {
            "indexable" => 0,
            "non_indexable" => 2,
            _ => 3,
        }
    }
}

// Floats where ±∞ travel as the strings "inf" and "-inf".
mod extended_floats {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|xs| {
                xs.iter()
                    .map(|&x| match x {
                        f64::INFINITY => Value::Text("inf".into()),
                        f64::NEG_INFINITY => Value::Text("-inf".into()),
                        x => Value::Num(x),
                    })
                    .collect::<Vec<_>>()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw: Option<Vec<Value>> = Option::deserialize(d)?;
        raw.map(|xs| {
            xs.into_iter()
                .map(|v| match v {
                    Value::Num(x) => Ok(x),
                    Value::Text(t) if t == "inf" => Ok(f64::INFINITY),
                    Value::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
                    Value::Text(t) => Err(serde::de::Error::custom(format!(
                        "expected a number, \"inf\" or \"-inf\", found {t:?}"
                    ))),
                })
                .collect()
        })
        .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities_round_trip() {
        let r = ResultFile {
            status: "indexable".into(),
            indices: Some(vec![f64::INFINITY, 0.1, f64::NEG_INFINITY]),
            sigma: Some(vec![1, 0, 2]),
            iterations: 1,
            variant: "cubic".into(),
            elapsed_ms: 0.5,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#"["inf",0.1,"-inf"]"#), "{text}");
        assert_eq!(serde_json::from_str::<ResultFile>(&text).unwrap(), r);
    }

    #[test]
    fn missing_indices_are_null() {
        let text = r#"{"status":"multichain","indices":null,"sigma":null,"iterations":0,"variant":"cubic","elapsed_ms":0}"#;
        let r: ResultFile = serde_json::from_str(text).unwrap();
        assert_eq!(r.indices, None);
        assert_eq!(r.exit_code(), 3);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let e = parse_arm(r#"{"n":1,"P0":[["x"]],"P1":[[1]],"r0":[0],"r1":[1]}"#).unwrap_err();
        assert!(e.to_string().contains("P0[0][0]"), "{e}");
        let e = parse_arm(r#"{"n":1,"P0":[[1]],"P1":[[1]],"r0":[0]}"#).unwrap_err();
        assert!(e.to_string().contains("r1"), "{e}");
        let e = parse_arm(r#"{"n":1,"P0":[[1]],"P1":[[0.5]],"r0":[0],"r1":[1]}"#).unwrap_err();
        assert!(e.to_string().contains("P1"), "{e}");
    }
}
