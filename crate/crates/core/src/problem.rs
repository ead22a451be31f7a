//! The vector problem `VVI(F, K)` and its JSON problem-file schema.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::expr::{FieldSpec, VectorField};
use crate::geometry::{ConvexSet, SetSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct VviProblem {
    pub name: String,
    fields: Vec<VectorField>,
    pub set: ConvexSet,
}

impl VviProblem {
    pub fn new(name: impl Into<String>, fields: Vec<VectorField>, set: ConvexSet) -> Result<VviProblem> {
        let Some(first) = fields.first() else {
            return Err(VviError::InvalidArgument(
                "a problem needs at least one criterion".into(),
            ));
        };
        let n = first.dim();
        for f in &fields {
            if f.dim() != n {
                return Err(VviError::Dimension {
                    expected: n,
                    got: f.dim(),
                });
            }
        }
        if set.dim() != n {
            return Err(VviError::Dimension {
                expected: n,
                got: set.dim(),
            });
        }
        Ok(VviProblem {
            name: name.into(),
            fields,
            set,
        })
    }

    pub fn n(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn to_file(&self) -> Result<ProblemFile> {
        Ok(ProblemFile {
            n: self.n(),
            m: self.m(),
            fields: self.fields.iter().map(FieldSpec::from).collect(),
            set: SetSpec::from_set(&self.set)?,
            name: self.name.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file()?)?)
    }

    pub fn from_json(text: &str) -> Result<VviProblem> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| VviError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.build()
    }
}

/// `{"n", "m", "fields": [...], "K": {...}, "name"}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub fields: Vec<FieldSpec>,
    #[serde(rename = "K")]
    pub set: SetSpec,
    pub name: String,
}

impl ProblemFile {
    pub fn build(&self) -> Result<VviProblem> {
        let schema = |path: String, message: String| VviError::Schema { path, message };
        if self.m == 0 || self.fields.len() != self.m {
            return Err(schema(
                "fields".into(),
                format!("expected m = {} fields, found {}", self.m, self.fields.len()),
            ));
        }
        let mut fields = Vec::with_capacity(self.m);
        for (l, spec) in self.fields.iter().enumerate() {
            let field = match spec {
                FieldSpec::Poly { exprs } => {
                    if exprs.len() != self.n {
                        return Err(schema(
                            format!("fields[{l}].exprs"),
                            format!("expected {} expressions, found {}", self.n, exprs.len()),
                        ));
                    }
                    let mut parsed = Vec::with_capacity(self.n);
                    for (i, text) in exprs.iter().enumerate() {
                        let e = crate::expr::Expr::parse(text, self.n)
                            .map_err(|e| schema(format!("fields[{l}].exprs[{i}]"), e.to_string()))?;
                        parsed.push(e);
                    }
                    VectorField::polynomial(self.n, parsed)?
                }
                FieldSpec::Affine { m, q } => {
                    if q.len() != self.n || m.len() != self.n || m.iter().any(|r| r.len() != self.n) {
                        return Err(schema(
                            format!("fields[{l}]"),
                            format!("affine field must have an {0}x{0} M and length-{0} q", self.n),
                        ));
                    }
                    let flat: Vec<f64> = m.iter().flatten().copied().collect();
                    VectorField::affine(nalgebra::DMatrix::from_row_slice(self.n, self.n, &flat), q.clone())?
                }
            };
            fields.push(field);
        }
        let set = self.set.build().map_err(|e| schema("K".into(), e.to_string()))?;
        if set.dim() != self.n {
            return Err(schema(
                "K".into(),
                format!("set has dimension {}, expected {}", set.dim(), self.n),
            ));
        }
        VviProblem::new(self.name.clone(), fields, set)
    }
}
