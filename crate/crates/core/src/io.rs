//! Versioned CSV files for snapshots, bases, operators and ensembles.
//!
//! Every file starts with one comment line `# exact-opinf <kind> v<version> {json}`
//! whose JSON object carries the metadata needed to rebuild the value exactly,
//! followed by a column-name row and the data rows. Floats are written with 17
//! significant digits, so a write/read cycle is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};
use crate::exact_opinf::{Provenance, RankEnsuringPair, SnapshotEnsemble};
use crate::fom::SnapshotMatrix;
use crate::galerkin::AggregatedOperator;
use crate::pod::PodBasis;
use crate::tensor_poly::{DegreeSet, MonomialBasis, MonomialTuple};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "exact-opinf";

/// Layout metadata stored in operator and ensemble headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutHeader {
    pub n: usize,
    #[serde(rename = "I")]
    pub degrees: Vec<usize>,
    #[serde(rename = "N_u")]
    pub n_inputs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl LayoutHeader {
    fn of(basis: &MonomialBasis) -> Self {
        Self {
            n: basis.n(),
            degrees: basis.degrees().as_slice().to_vec(),
            n_inputs: basis.n_inputs(),
            dt: None,
        }
    }

    fn basis(&self) -> Result<MonomialBasis> {
        MonomialBasis::new(self.n, DegreeSet::new(self.degrees.iter().copied()), self.n_inputs)
    }
}

struct Table {
    origin: String,
    meta: serde_json::Value,
    columns: Vec<String>,
    // (1-based line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line,
            message: message.into(),
        }
    }

    fn parse(text: &str, origin: &str, kind: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let rest = first
            .strip_prefix('#')
            .map(str::trim_start)
            .and_then(|s| s.strip_prefix(MAGIC))
            .map(str::trim_start)
            .ok_or_else(|| err(1, format!("missing '# {MAGIC}' header line")))?;
        let (found_kind, rest) = rest.split_once(' ').unwrap_or((rest, ""));
        if found_kind != kind {
            return Err(err(1, format!("expected a {kind} file, found '{found_kind}'")));
        }
        let rest = rest.trim_start();
        let (version, json) = rest.split_once(' ').unwrap_or((rest, "{}"));
        let version: u32 = version
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(1, format!("bad version tag '{version}'")))?;
        if version != FORMAT_VERSION {
            return Err(err(1, format!("unsupported format version {version}")));
        }
        let meta: serde_json::Value =
            serde_json::from_str(json.trim()).map_err(|e| err(1, format!("bad metadata: {e}")))?;
        let (_, header) = lines.next().ok_or_else(|| err(2, "missing column header".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != columns.len() {
                return Err(err(
                    no,
                    format!("expected {} fields, found {}", columns.len(), fields.len()),
                ));
            }
            rows.push((no, fields));
        }
        Ok(Self {
            origin: origin.to_string(),
            meta,
            columns,
            rows,
        })
    }

    fn meta<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.meta.clone()).map_err(|e| self.err(1, format!("bad metadata: {e}")))
    }

    fn float(&self, line: usize, s: &str) -> Result<f64> {
        s.parse::<f64>().map_err(|_| self.err(line, format!("'{s}' is not a number")))
    }

    fn expect_columns(&self, expected: usize) -> Result<()> {
        if self.columns.len() != expected {
            return Err(self.err(2, format!("expected {expected} columns, found {}", self.columns.len())));
        }
        Ok(())
    }
}

fn header_line(kind: &str, meta: &impl Serialize) -> String {
    let json = serde_json::to_string(meta).expect("metadata serializes");
    format!("# {MAGIC} {kind} v{FORMAT_VERSION} {json}\n")
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |k| format!("{prefix}{k}"))
}

// ---------------------------------------------------------------- snapshots

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    #[serde(rename = "N")]
    dim: usize,
    #[serde(rename = "N_u")]
    n_inputs: usize,
}

/// Columns `t, u1.., x1..`, one row per time.
pub fn snapshots_to_string(s: &SnapshotMatrix) -> String {
    let mut out = header_line(
        "snapshots",
        &SnapshotHeader {
            dim: s.state_dim(),
            n_inputs: s.input_dim(),
        },
    );
    push_row(
        &mut out,
        std::iter::once("t".to_string())
            .chain(numbered("u", s.input_dim()))
            .chain(numbered("x", s.state_dim())),
    );
    for k in 0..s.len() {
        push_row(
            &mut out,
            std::iter::once(fmt_f64(s.times[k]))
                .chain(s.inputs.column(k).iter().map(|&v| fmt_f64(v)))
                .chain(s.states.column(k).iter().map(|&v| fmt_f64(v))),
        );
    }
    out
}

pub fn snapshots_from_str(text: &str, origin: &str) -> Result<SnapshotMatrix> {
    let t = Table::parse(text, origin, "snapshots")?;
    let h: SnapshotHeader = t.meta()?;
    t.expect_columns(1 + h.n_inputs + h.dim)?;
    let k = t.rows.len();
    let mut states = DMatrix::zeros(h.dim, k);
    let mut inputs = DMatrix::zeros(h.n_inputs, k);
    let mut times = Vec::with_capacity(k);
    for (c, (line, fields)) in t.rows.iter().enumerate() {
        times.push(t.float(*line, &fields[0])?);
        for j in 0..h.n_inputs {
            inputs[(j, c)] = t.float(*line, &fields[1 + j])?;
        }
        for j in 0..h.dim {
            states[(j, c)] = t.float(*line, &fields[1 + h.n_inputs + j])?;
        }
    }
    SnapshotMatrix::new(states, inputs, times).map_err(|e| t.err(3, e.to_string()))
}

// ---------------------------------------------------------------- POD basis

#[derive(Serialize, Deserialize)]
struct BasisHeader {
    #[serde(rename = "N")]
    dim: usize,
    n: usize,
}

/// One column per mode, one row per full-order coordinate.
pub fn basis_to_string(b: &PodBasis) -> String {
    let v = b.modes();
    let mut out = header_line("pod-basis", &BasisHeader { dim: v.nrows(), n: v.ncols() });
    push_row(&mut out, numbered("v", v.ncols()));
    for r in 0..v.nrows() {
        push_row(&mut out, v.row(r).iter().map(|&x| fmt_f64(x)));
    }
    out
}

pub fn singular_values_to_string(b: &PodBasis) -> String {
    let mut out = header_line("singular-values", &serde_json::json!({ "count": b.singular_values().len() }));
    push_row(&mut out, ["k".to_string(), "sigma".to_string()]);
    for (k, s) in b.singular_values().iter().enumerate() {
        push_row(&mut out, [(k + 1).to_string(), fmt_f64(*s)]);
    }
    out
}

fn modes_from_str(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let t = Table::parse(text, origin, "pod-basis")?;
    let h: BasisHeader = t.meta()?;
    t.expect_columns(h.n)?;
    if t.rows.len() != h.dim {
        return Err(t.err(2, format!("expected {} rows, found {}", h.dim, t.rows.len())));
    }
    let mut v = DMatrix::zeros(h.dim, h.n);
    for (r, (line, fields)) in t.rows.iter().enumerate() {
        for c in 0..h.n {
            v[(r, c)] = t.float(*line, &fields[c])?;
        }
    }
    Ok(v)
}

fn singular_values_from_str(text: &str, origin: &str) -> Result<Vec<f64>> {
    let t = Table::parse(text, origin, "singular-values")?;
    t.expect_columns(2)?;
    t.rows.iter().map(|(line, f)| t.float(*line, &f[1])).collect()
}

/// Sidecar path for the singular values of a basis file.
pub fn singular_values_path(basis_path: &Path) -> PathBuf {
    let stem = basis_path.file_stem().and_then(|s| s.to_str()).unwrap_or("basis");
    basis_path.with_file_name(format!("{stem}.singular_values.csv"))
}

pub fn save_basis(path: &Path, b: &PodBasis) -> Result<()> {
    fs::write(path, basis_to_string(b))?;
    fs::write(singular_values_path(path), singular_values_to_string(b))?;
    Ok(())
}

/// Loads a basis; the singular-value sidecar is optional.
pub fn load_basis(path: &Path) -> Result<PodBasis> {
    let origin = path.display().to_string();
    let modes = modes_from_str(&fs::read_to_string(path)?, &origin)?;
    let sv_path = singular_values_path(path);
    let sv = if sv_path.exists() {
        singular_values_from_str(&fs::read_to_string(&sv_path)?, &sv_path.display().to_string())?
    } else {
        Vec::new()
    };
    PodBasis::from_modes(modes, sv).map_err(|e| Error::Parse {
        path: origin,
        line: 1,
        message: e.to_string(),
    })
}

pub fn basis_from_str(text: &str, origin: &str) -> Result<PodBasis> {
    let modes = modes_from_str(text, origin)?;
    PodBasis::from_modes(modes, Vec::new())
}

// ---------------------------------------------------------------- operators

fn feature_names(basis: &MonomialBasis) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(basis.n_features());
    for i in basis.degrees().iter() {
        for t in crate::tensor_poly::enumerate_monomials(basis.n(), i)? {
            names.push(format!("x{t}"));
        }
    }
    names.extend(numbered("u", basis.n_inputs()));
    Ok(names)
}

/// `n` rows, one column per feature, named after its monomial.
pub fn operator_to_string(op: &AggregatedOperator) -> Result<String> {
    let mut out = header_line("operator", &LayoutHeader::of(op.basis()));
    push_row(&mut out, feature_names(op.basis())?);
    for r in 0..op.n() {
        push_row(&mut out, op.matrix().row(r).iter().map(|&v| fmt_f64(v)));
    }
    Ok(out)
}

pub fn operator_from_str(text: &str, origin: &str) -> Result<AggregatedOperator> {
    let t = Table::parse(text, origin, "operator")?;
    let h: LayoutHeader = t.meta()?;
    let basis = h.basis().map_err(|e| t.err(1, e.to_string()))?;
    let names = feature_names(&basis)?;
    if t.columns != names {
        return Err(t.err(2, format!("column names do not match the layout {}", names.join(","))));
    }
    if t.rows.len() != basis.n() {
        return Err(t.err(2, format!("expected {} rows, found {}", basis.n(), t.rows.len())));
    }
    let mut m = DMatrix::zeros(basis.n(), basis.n_features());
    for (r, (line, fields)) in t.rows.iter().enumerate() {
        for (c, f) in fields.iter().enumerate() {
            m[(r, c)] = t.float(*line, f)?;
        }
    }
    AggregatedOperator::new(basis, m).map_err(|e| t.err(3, e.to_string()))
}

pub fn save_operator(path: &Path, op: &AggregatedOperator) -> Result<()> {
    fs::write(path, operator_to_string(op)?)?;
    Ok(())
}

pub fn load_operator(path: &Path) -> Result<AggregatedOperator> {
    operator_from_str(&fs::read_to_string(path)?, &path.display().to_string())
}

// ---------------------------------------------------------------- ensembles

fn parse_provenance(s: &str) -> Option<Provenance> {
    if let Some(j) = s.strip_prefix('u') {
        let j: usize = j.parse().ok()?;
        return j.checked_sub(1).map(Provenance::Input);
    }
    let inner = s.strip_prefix("x(")?.strip_suffix(')')?;
    let indices = inner
        .split_whitespace()
        .map(|t| t.parse::<usize>().ok().and_then(|j| j.checked_sub(1)))
        .collect::<Option<Vec<_>>>()?;
    Some(Provenance::Monomial(MonomialTuple::new(indices)))
}

/// One row per pair: provenance, `x̄`, `ū`, `ẋ̄`.
pub fn ensemble_to_string(e: &SnapshotEnsemble) -> String {
    let mut header = LayoutHeader::of(&e.basis);
    header.dt = Some(e.dt);
    let (n, m) = (e.basis.n(), e.basis.n_inputs());
    let mut out = header_line("ensemble", &header);
    push_row(
        &mut out,
        std::iter::once("pair".to_string())
            .chain(numbered("xbar", n))
            .chain(numbered("ubar", m))
            .chain(numbered("xdot", n)),
    );
    for (s, p) in e.pairs.iter().enumerate() {
        push_row(
            &mut out,
            std::iter::once(p.provenance.to_string())
                .chain(p.state.iter().map(|&v| fmt_f64(v)))
                .chain(p.input.iter().map(|&v| fmt_f64(v)))
                .chain(e.derivatives.column(s).iter().map(|&v| fmt_f64(v))),
        );
    }
    out
}

pub fn ensemble_from_str(text: &str, origin: &str) -> Result<SnapshotEnsemble> {
    let t = Table::parse(text, origin, "ensemble")?;
    let h: LayoutHeader = t.meta()?;
    let dt = h.dt.ok_or_else(|| t.err(1, "metadata lacks dt"))?;
    let basis = h.basis().map_err(|e| t.err(1, e.to_string()))?;
    let (n, m) = (basis.n(), basis.n_inputs());
    t.expect_columns(1 + 2 * n + m)?;
    let mut pairs = Vec::with_capacity(t.rows.len());
    let mut derivatives = DMatrix::zeros(n, t.rows.len());
    for (s, (line, f)) in t.rows.iter().enumerate() {
        let provenance = parse_provenance(&f[0]).ok_or_else(|| t.err(*line, format!("bad pair label '{}'", f[0])))?;
        let vals = f[1..].iter().map(|x| t.float(*line, x)).collect::<Result<Vec<f64>>>()?;
        pairs.push(RankEnsuringPair {
            state: DVector::from_column_slice(&vals[..n]),
            input: DVector::from_column_slice(&vals[n..n + m]),
            provenance,
        });
        derivatives.set_column(s, &DVector::from_column_slice(&vals[n + m..]));
    }
    SnapshotEnsemble::from_triples(basis, pairs, derivatives, dt).map_err(|e| t.err(3, e.to_string()))
}

/// A small result table under a versioned header.
pub fn table_to_string(kind: &str, meta: &serde_json::Value, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header_line(kind, meta);
    push_row(&mut out, columns.iter().map(|c| c.to_string()));
    for r in rows {
        push_row(&mut out, r.iter().cloned());
    }
    out
}
