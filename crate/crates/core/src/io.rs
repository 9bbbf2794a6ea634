//! CSV data files and the text model format.
//!
//! Model files start with `interprox-model,<version>,<p>`, optionally followed by
//! one `scale,<i>,<center>,<scale>` line per feature when the features were
//! standardized. Each path entry is an `entry,<lambda1>,<lambda2>,<objective>`
//! line followed by its nonzero coefficients as `intercept,<v>`, `main,<i>,<v>`
//! and `inter,<i>,<j>,<v>` lines. Indices are 0-based feature positions and
//! values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::coef::Coefficients;
use crate::data::{DesignData, FeatureTransform, Pair};
use crate::error::{Error, Result};
use crate::path::FitPath;

pub const MODEL_MAGIC: &str = "interprox-model";
pub const MODEL_VERSION: u32 = 1;

/// A numeric CSV file split into response and features.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub response_name: Option<String>,
    pub feature_names: Vec<String>,
    pub n: usize,
    /// Column-major, `n * p`.
    pub x: Vec<f64>,
    /// Zeros when the file has no response column.
    pub y: Vec<f64>,
}

impl Table {
    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    /// Data exactly as read, without intercept or scaling.
    pub fn raw(&self) -> Result<DesignData> {
        DesignData::new(self.n, self.p(), self.x.clone(), self.y.clone())
    }

    /// Data prepared for fitting (centered response, optional standardization).
    pub fn prepared(&self, standardize: bool) -> Result<DesignData> {
        DesignData::prepared(self.n, self.p(), self.x.clone(), self.y.clone(), standardize)
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a CSV with a header row. The column named `response` (or, if no name
/// matches, the column at that 0-based index) becomes the response; every other
/// column is a feature in file order. With `require_response` unset a missing
/// response column leaves `y` at zero. Blank lines are skipped.
pub fn read_table<R: Read>(reader: R, response: &str, require_response: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let resp = headers
        .iter()
        .position(|h| h == response)
        .or_else(|| response.parse::<usize>().ok().filter(|&k| k < headers.len()));
    if resp.is_none() && require_response {
        return Err(parse_error(1, format!("no response column '{response}' in header")));
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != resp)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(line, format!("column '{}': '{cell}' is not a number", headers[k])))?;
            if !v.is_finite() {
                return Err(parse_error(line, format!("column '{}': non-finite value '{cell}'", headers[k])));
            }
            if Some(k) == resp {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if resp.is_none() {
        y = vec![0.0; n];
    }
    let p = feature_names.len();
    let mut x = vec![0.0; n * p];
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            x[c * n + r] = *v;
        }
    }
    Ok(Table {
        response_name: resp.map(|k| headers[k].clone()),
        feature_names,
        n,
        x,
        y,
    })
}

pub fn load_csv(path: &Path, response: &str, require_response: bool) -> Result<Table> {
    read_table(File::open(path)?, response, require_response)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv output failed: {other:?}")),
    }
}

/// Writes `response` then the features of `data` (as stored) with a header row.
pub fn write_table<W: Write>(writer: W, response_name: &str, feature_names: &[String], data: &DesignData) -> Result<()> {
    if feature_names.len() != data.p() {
        return Err(Error::Dimension {
            what: "feature names",
            expected: data.p(),
            got: feature_names.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![response_name.to_string()];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    let y = data.raw_response();
    for r in 0..data.n() {
        let mut rec = Vec::with_capacity(data.p() + 1);
        rec.push(format!("{:?}", y[r]));
        for c in 0..data.p() {
            rec.push(format!("{:?}", data.column(c)[r]));
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, response_name: &str, feature_names: &[String], data: &DesignData) -> Result<()> {
    write_table(BufWriter::new(File::create(path)?), response_name, feature_names, data)
}

/// Default feature names `x0, x1, ...`.
pub fn feature_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

/// One stored path entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelEntry {
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective: f64,
    pub coef: Coefficients,
}

/// Contents of a model file.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub p: usize,
    /// Feature transform the coefficients refer to.
    pub transform: FeatureTransform,
    pub entries: Vec<ModelEntry>,
}

impl Model {
    pub fn from_path(path: &FitPath, transform: &FeatureTransform) -> Self {
        Model {
            p: transform.center.len(),
            transform: transform.clone(),
            entries: path
                .entries
                .iter()
                .map(|e| ModelEntry {
                    lambda1: e.lambda1,
                    lambda2: e.lambda2,
                    objective: e.diagnostics.objective,
                    coef: e.coef.clone(),
                })
                .collect(),
        }
    }

    /// A single-entry model holding known coefficients (used for truth files).
    pub fn single(coef: Coefficients) -> Self {
        let p = coef.p();
        Model {
            p,
            transform: FeatureTransform::identity(p),
            entries: vec![ModelEntry {
                lambda1: 0.0,
                lambda2: 0.0,
                objective: 0.0,
                coef,
            }],
        }
    }

    /// Maps raw features through the stored transform.
    pub fn prepare(&self, table: &Table) -> Result<DesignData> {
        if table.p() != self.p {
            return Err(Error::Dimension {
                what: "feature columns",
                expected: self.p,
                got: table.p(),
            });
        }
        self.transform.apply(table.n, table.x.clone(), table.y.clone())
    }
}

pub fn write_model<W: Write>(mut w: W, model: &Model) -> Result<()> {
    writeln!(w, "{MODEL_MAGIC},{MODEL_VERSION},{}", model.p)?;
    if !model.transform.is_identity() {
        for (i, (c, s)) in model.transform.center.iter().zip(&model.transform.scale).enumerate() {
            writeln!(w, "scale,{i},{c:?},{s:?}")?;
        }
    }
    for e in &model.entries {
        writeln!(w, "entry,{:?},{:?},{:?}", e.lambda1, e.lambda2, e.objective)?;
        if e.coef.intercept != 0.0 {
            writeln!(w, "intercept,{:?}", e.coef.intercept)?;
        }
        for (i, b) in e.coef.beta.iter().enumerate() {
            if *b != 0.0 {
                writeln!(w, "main,{i},{b:?}")?;
            }
        }
        for (pr, v) in &e.coef.theta {
            if *v != 0.0 {
                writeln!(w, "inter,{},{},{v:?}", pr.i, pr.j)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn read_model<R: BufRead>(reader: R) -> Result<Model> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(model_error(0, 0, "empty model file")),
        }
    };
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.len() != 3 || fields[0] != MODEL_MAGIC {
        return Err(model_error(0, 1, "not a model file"));
    }
    if fields[1] != MODEL_VERSION.to_string() {
        return Err(model_error(0, 1, format!("unsupported model version {}", fields[1])));
    }
    let p: usize = fields[2].parse().map_err(|_| model_error(0, 1, "bad feature count"))?;
    let mut model = Model {
        p,
        transform: FeatureTransform::identity(p),
        entries: Vec::new(),
    };
    let mut scaled = 0;

    for (k, line) in lines {
        let line = line?;
        let lineno = k + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        let record = match f[0] {
            "intercept" | "main" | "inter" => model.entries.len().saturating_sub(1),
            _ => model.entries.len(),
        };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| model_error(record, lineno, format!("bad number '{s}'")))
        };
        let idx = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if i < p => Ok(i),
                _ => Err(model_error(record, lineno, format!("bad feature index '{s}'"))),
            }
        };
        let arity = |want: usize| -> Result<()> {
            if f.len() == want {
                Ok(())
            } else {
                Err(model_error(record, lineno, format!("'{}' line needs {want} fields", f[0])))
            }
        };
        match f[0] {
            "scale" => {
                arity(4)?;
                if !model.entries.is_empty() {
                    return Err(model_error(record, lineno, "scale line after the first entry"));
                }
                let i = idx(f[1])?;
                model.transform.center[i] = num(f[2])?;
                model.transform.scale[i] = num(f[3])?;
                scaled += 1;
            }
            "entry" => {
                arity(4)?;
                model.entries.push(ModelEntry {
                    lambda1: num(f[1])?,
                    lambda2: num(f[2])?,
                    objective: num(f[3])?,
                    coef: Coefficients::zeros(p),
                });
            }
            kind @ ("intercept" | "main" | "inter") => {
                let Some(entry) = model.entries.last_mut() else {
                    return Err(model_error(record, lineno, format!("'{kind}' line before any entry")));
                };
                match kind {
                    "intercept" => {
                        arity(2)?;
                        entry.coef.intercept = num(f[1])?;
                    }
                    "main" => {
                        arity(3)?;
                        entry.coef.beta[idx(f[1])?] = num(f[2])?;
                    }
                    _ => {
                        arity(4)?;
                        let pair = Pair::checked(idx(f[1])?, idx(f[2])?, p)
                            .map_err(|e| model_error(record, lineno, e.to_string()))?;
                        entry.coef.set_theta(pair, num(f[3])?);
                    }
                }
            }
            other => return Err(model_error(record, lineno, format!("unknown record kind '{other}'"))),
        }
    }
    if scaled != 0 && scaled != p {
        return Err(model_error(0, 0, format!("{scaled} scale lines for {p} features")));
    }
    Ok(model)
}

fn model_error(record: usize, line: usize, message: impl Into<String>) -> Error {
    Error::Model {
        record,
        message: format!("line {line}: {}", message.into()),
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    read_model(BufReader::new(File::open(path)?))
}

/// Per-entry path diagnostics as CSV. Wall times are left out so that repeated
/// runs produce identical files.
pub fn write_diagnostics<W: Write>(writer: W, path: &FitPath) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "entry",
        "lambda1",
        "lambda2",
        "objective",
        "main_support",
        "pair_support",
        "rounds",
        "converged",
        "active_mains",
        "active_pairs",
        "pgd_iterations",
        "max_component_vertices",
        "max_component_edges",
        "max_prox_gap",
        "snapshot_refreshes",
        "error",
    ])
    .map_err(csv_error)?;
    for (k, e) in path.entries.iter().enumerate() {
        let d = &e.diagnostics;
        w.write_record([
            k.to_string(),
            format!("{:?}", e.lambda1),
            format!("{:?}", e.lambda2),
            format!("{:?}", d.objective),
            e.main_support.to_string(),
            e.pair_support.to_string(),
            d.rounds.to_string(),
            d.converged.to_string(),
            d.active_mains.to_string(),
            d.active_pairs.to_string(),
            d.pgd_iterations.to_string(),
            d.max_component_vertices.to_string(),
            d.max_component_edges.to_string(),
            format!("{:e}", d.max_prox_gap),
            d.snapshot_refreshes.to_string(),
            e.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
