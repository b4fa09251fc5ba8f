//! Wire format: `{"vars": [...], "params": [...], "terms": [{"coef": "53/4",
//! "pows": [...], "dords"|"shifts": [...]}]}`. `pows` lists the variables
//! first, then the parameters. Coefficients must be exact rational strings.

use serde::{Deserialize, Serialize};

use super::{format_rational, parse_rational, DiffMonomial, DiffOp, ShiftMonomial, ShiftOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffOpJson {
    pub vars: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
    pub terms: Vec<DiffTermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffTermJson {
    pub coef: String,
    pub pows: Vec<u32>,
    pub dords: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftOpJson {
    pub vars: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
    pub terms: Vec<ShiftTermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftTermJson {
    pub coef: String,
    pub pows: Vec<u32>,
    pub shifts: Vec<i32>,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::usage(format!("term {what} has length {got}, expected {want}")));
    }
    Ok(())
}

impl From<DiffOp> for DiffOpJson {
    fn from(op: DiffOp) -> Self {
        DiffOpJson {
            vars: op.vars().to_vec(),
            params: op.params().to_vec(),
            terms: op
                .terms()
                .rev()
                .map(|(m, c)| DiffTermJson {
                    coef: format_rational(c),
                    pows: m.pows.clone(),
                    dords: m.dords.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DiffOpJson> for DiffOp {
    type Error = Error;
    fn try_from(j: DiffOpJson) -> Result<Self> {
        let mut op = DiffOp::zero_owned(j.vars, j.params);
        let (nv, np) = (op.vars().len(), op.params().len());
        for t in j.terms {
            check_len("pows", t.pows.len(), nv + np)?;
            check_len("dords", t.dords.len(), nv)?;
            op.add_term(
                DiffMonomial {
                    pows: t.pows,
                    dords: t.dords,
                },
                parse_rational(&t.coef)?,
            );
        }
        Ok(op)
    }
}

impl From<ShiftOp> for ShiftOpJson {
    fn from(op: ShiftOp) -> Self {
        ShiftOpJson {
            vars: op.indices().to_vec(),
            params: op.params().to_vec(),
            terms: op
                .terms()
                .rev()
                .map(|(m, c)| ShiftTermJson {
                    coef: format_rational(c),
                    pows: m.pows.clone(),
                    shifts: m.shifts.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ShiftOpJson> for ShiftOp {
    type Error = Error;
    fn try_from(j: ShiftOpJson) -> Result<Self> {
        let mut op = ShiftOp::zero_owned(j.vars, j.params);
        let (ni, np) = (op.indices().len(), op.params().len());
        for t in j.terms {
            check_len("pows", t.pows.len(), ni + np)?;
            check_len("shifts", t.shifts.len(), ni)?;
            op.add_term(
                ShiftMonomial {
                    pows: t.pows,
                    shifts: t.shifts,
                },
                parse_rational(&t.coef)?,
            );
        }
        Ok(op)
    }
}

impl Serialize for DiffOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DiffOpJson::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiffOp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        DiffOp::try_from(DiffOpJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Serialize for ShiftOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ShiftOpJson::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ShiftOp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ShiftOp::try_from(ShiftOpJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::OperatorAlgebra;

    #[test]
    fn exact_coefficients_survive() {
        let op = ShiftOp::parse("53/4*i*S_k - 2", &["i", "k"], &[]).unwrap();
        let text = serde_json::to_string(&op).unwrap();
        assert!(text.contains("\"53/4\""));
        let back: ShiftOp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn float_coefficients_are_rejected() {
        let text = r#"{"vars":["i"],"terms":[{"coef":0.5,"pows":[1],"shifts":[0]}]}"#;
        assert!(serde_json::from_str::<ShiftOp>(text).is_err());
        let text = r#"{"vars":["i"],"terms":[{"coef":"0.5","pows":[1],"shifts":[0]}]}"#;
        assert!(serde_json::from_str::<ShiftOp>(text).is_err());
    }

    #[test]
    fn diffop_with_parameters() {
        let op = DiffOp::parse("D_x^2 - 2*x*D_x + 2*i", &["x"], &["i"]).unwrap();
        let text = serde_json::to_string(&op).unwrap();
        let back: DiffOp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, op);
    }
}
