//! Human-readable model and compensator files.
//!
//! A model file is a TOML document of named real matrices (`A, B, C, D, P,
//! Q, S, L`) with optional `M_des`, `weights`, and `[tolerances]` overrides;
//! a compensator file carries a flat realization (`F, G, H`) and optionally
//! the structured canonical parameters under `[canonical]`. Loading
//! validates rectangularity here and every cross-dimension constraint
//! through the same constructors the library enforces everywhere else.

use crate::linalg::{RealMatrix, Tolerances};
use crate::moment::{Compensator, Plant, SignalGenerator};
use crate::synth::CanonicalCompensator;
use crate::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Raw model document: matrices as rows of numbers, exactly as written.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    /// Feedthrough; omitted means the zero block of the implied size.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    /// Output disturbance map; omitted means the zero block.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    /// Desired closed-loop moment (required by assign/synthesize).
    #[serde(rename = "M_des", default, skip_serializing_if = "Option::is_none")]
    pub m_des: Option<Vec<Vec<f64>>>,
    /// Diagonal least-squares weights over vec(ΔM), length p·ν.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Per-file tolerance overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
}

/// Optional per-field tolerance overrides carried by a model file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_rel: Option<f64>,
}

impl ToleranceOverrides {
    /// Applies the overrides on top of a base policy.
    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            spectral_gap: self.spectral_gap.unwrap_or(base.spectral_gap),
            rank_rel: self.rank_rel.unwrap_or(base.rank_rel),
            residual_rel: self.residual_rel.unwrap_or(base.residual_rel),
        }
    }
}

/// Validated contents of a model file.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub plant: Plant,
    pub gen: SignalGenerator,
    pub m_des: Option<RealMatrix>,
    pub weights: Option<DVector<f64>>,
}

impl ModelFile {
    /// Parses a TOML document.
    pub fn from_toml(text: &str) -> Result<ModelFile> {
        toml::from_str(text).map_err(|e| Error::ParseError(format!("model file: {e}")))
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ParseError(format!("model file: {e}")))
    }

    /// Builds the raw document from validated parts.
    pub fn from_parts(
        plant: &Plant,
        gen: &SignalGenerator,
        m_des: Option<&RealMatrix>,
        weights: Option<&DVector<f64>>,
    ) -> ModelFile {
        ModelFile {
            a: rows_of(plant.a()),
            b: rows_of(plant.b()),
            c: rows_of(plant.c()),
            d: Some(rows_of(plant.d())),
            p: rows_of(plant.p_mat()),
            q: Some(rows_of(plant.q_mat())),
            s: rows_of(gen.s()),
            l: rows_of(gen.l()),
            m_des: m_des.map(rows_of),
            weights: weights.map(|w| w.iter().copied().collect()),
            tolerances: None,
        }
    }

    /// Validates and converts into library types. Missing `D`/`Q` become
    /// zero blocks of the implied dimensions.
    pub fn parse_parts(&self) -> Result<ModelParts> {
        let a = dense("A", &self.a)?;
        let b = dense("B", &self.b)?;
        let c = dense("C", &self.c)?;
        let p_mat = dense("P", &self.p)?;
        let s = dense("S", &self.s)?;
        let l = dense("L", &self.l)?;
        let d = match &self.d {
            Some(rows) => dense("D", rows)?,
            None => RealMatrix::zeros(c.nrows(), b.ncols()),
        };
        let q_mat = match &self.q {
            Some(rows) => dense("Q", rows)?,
            None => RealMatrix::zeros(c.nrows(), p_mat.ncols()),
        };
        let plant = Plant::new(a, b, c, d, p_mat, q_mat)?;
        let gen = SignalGenerator::new(s, l)?;
        if plant.q_dim() != gen.q_dim() {
            return Err(Error::DimensionMismatch(format!(
                "`P`/`Q` expect {} exogenous signals but `L` emits {}",
                plant.q_dim(),
                gen.q_dim()
            )));
        }
        let m_des = match &self.m_des {
            Some(rows) => {
                let m = dense("M_des", rows)?;
                crate::linalg::ensure_shape("M_des", &m, plant.p_dim(), gen.nu())?;
                crate::linalg::ensure_finite("M_des", &m)?;
                Some(m)
            }
            None => None,
        };
        let weights = match &self.weights {
            Some(w) => {
                if w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("weights".into()));
                }
                Some(DVector::from_row_slice(w))
            }
            None => None,
        };
        Ok(ModelParts {
            plant,
            gen,
            m_des,
            weights,
        })
    }

    /// The file's tolerance policy on top of `base`.
    pub fn tolerances_over(&self, base: Tolerances) -> Tolerances {
        match &self.tolerances {
            Some(over) => over.apply(base),
            None => base,
        }
    }
}

/// Raw compensator document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CompensatorFile {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    /// Structured canonical parameters, when the compensator was produced
    /// by synthesis rather than written by hand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<CanonicalBlock>,
}

/// Canonical parameter set mirroring [`CanonicalCompensator`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CanonicalBlock {
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(rename = "M_des")]
    pub m_des: Vec<Vec<f64>>,
    #[serde(rename = "M_c")]
    pub m_c: Vec<Vec<f64>>,
    #[serde(rename = "F_a")]
    pub f_a: Vec<Vec<f64>>,
    #[serde(rename = "F_b")]
    pub f_b: Vec<Vec<f64>>,
    #[serde(rename = "G_a")]
    pub g_a: Vec<Vec<f64>>,
    #[serde(rename = "G_b")]
    pub g_b: Vec<Vec<f64>>,
    #[serde(rename = "H_b")]
    pub h_b: Vec<Vec<f64>>,
}

impl CompensatorFile {
    /// Parses a TOML document.
    pub fn from_toml(text: &str) -> Result<CompensatorFile> {
        toml::from_str(text).map_err(|e| Error::ParseError(format!("compensator file: {e}")))
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::ParseError(format!("compensator file: {e}")))
    }

    /// Builds the document from a flat realization.
    pub fn from_flat(comp: &Compensator) -> CompensatorFile {
        CompensatorFile {
            f: rows_of(comp.f()),
            g: rows_of(comp.g()),
            h: rows_of(comp.h()),
            canonical: None,
        }
    }

    /// Builds the document from the canonical form plus its flat realization.
    pub fn from_canonical(canonical: &CanonicalCompensator, flat: &Compensator) -> CompensatorFile {
        CompensatorFile {
            f: rows_of(flat.f()),
            g: rows_of(flat.g()),
            h: rows_of(flat.h()),
            canonical: Some(CanonicalBlock {
                s: rows_of(&canonical.s),
                m_des: rows_of(&canonical.m_des),
                m_c: rows_of(&canonical.m_c),
                f_a: rows_of(&canonical.f_a),
                f_b: rows_of(&canonical.f_b),
                g_a: rows_of(&canonical.g_a),
                g_b: rows_of(&canonical.g_b),
                h_b: rows_of(&canonical.h_b),
            }),
        }
    }

    /// Validates and converts the flat realization.
    pub fn to_compensator(&self) -> Result<Compensator> {
        Compensator::new(dense("F", &self.f)?, dense("G", &self.g)?, dense("H", &self.h)?)
    }

    /// Validates and converts the canonical block, when present.
    pub fn to_canonical(&self) -> Result<Option<CanonicalCompensator>> {
        let Some(block) = &self.canonical else {
            return Ok(None);
        };
        let canonical = CanonicalCompensator::new(
            dense("S", &block.s)?,
            dense("M_des", &block.m_des)?,
            dense("M_c", &block.m_c)?,
            dense("F_a", &block.f_a)?,
            dense("F_b", &block.f_b)?,
            dense("G_a", &block.g_a)?,
            dense("G_b", &block.g_b)?,
            dense("H_b", &block.h_b)?,
        )?;
        Ok(Some(canonical))
    }
}

/// Reads and parses a model file from disk.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {e}", path.display())))?;
    ModelFile::from_toml(&text)
}

/// Writes a model file to disk.
pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    std::fs::write(path, file.to_toml()?)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {e}", path.display())))
}

/// Reads and parses a compensator file from disk.
pub fn load_compensator(path: &Path) -> Result<CompensatorFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {e}", path.display())))?;
    CompensatorFile::from_toml(&text)
}

/// Writes a compensator file to disk.
pub fn save_compensator(path: &Path, file: &CompensatorFile) -> Result<()> {
    std::fs::write(path, file.to_toml()?)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {e}", path.display())))
}

/// Reads a bare matrix file: a TOML document with a single `M = [[...]]`
/// entry (used for `--ga` and `--m-des path` overrides).
pub fn load_matrix(path: &Path) -> Result<RealMatrix> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct MatrixFile {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {e}", path.display())))?;
    let file: MatrixFile =
        toml::from_str(&text).map_err(|e| Error::ParseError(format!("matrix file: {e}")))?;
    dense("M", &file.m)
}

/// Converts nested rows into a dense matrix, rejecting ragged input.
fn dense(name: &str, rows: &[Vec<f64>]) -> Result<RealMatrix> {
    if rows.is_empty() {
        return Err(Error::ParseError(format!("matrix `{name}` has no rows")));
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(Error::ParseError(format!(
            "matrix `{name}` has an empty first row"
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::ParseError(format!(
                "matrix `{name}` is ragged: row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(RealMatrix::from_row_slice(rows.len(), width, &flat))
}

/// Row-major nested copy of a matrix.
fn rows_of(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
