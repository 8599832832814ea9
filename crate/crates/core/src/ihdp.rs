//! IHDP100 realizations stored as one pair of CSV files per realization.
//!
//! Layout for realization `r` under a root directory:
//!
//! ```text
//! ihdp_train_r.csv
//! ihdp_test_r.csv
//! ```
//!
//! Both files share the header `x0,..,x24,t,y_factual,y_cfactual,mu0,mu1`.
//! Values are decimal text; writing uses 17 significant digits so that a
//! write/read cycle reproduces every `f64` exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::data::{holdout_indices, ObservationalDataset, Splits};
use crate::error::{Error, Result};

pub const IHDP_COVARIATES: usize = 25;
pub const IHDP_ROWS: usize = 747;
pub const IHDP_TREATED: usize = 139;
pub const IHDP_DIR_ENV: &str = "DECONFOUND_IHDP_DIR";

/// Root directory from an explicit path, else from `DECONFOUND_IHDP_DIR`.
pub fn resolve_root(flag: Option<&Path>) -> Result<PathBuf> {
    match flag {
        Some(p) => Ok(p.to_path_buf()),
        None => std::env::var_os(IHDP_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::InvalidConfig(format!("no IHDP directory: pass --ihdp-dir or set {IHDP_DIR_ENV}"))),
    }
}

pub fn header() -> Vec<String> {
    (0..IHDP_COVARIATES)
        .map(|i| format!("x{i}"))
        .chain(["t", "y_factual", "y_cfactual", "mu0", "mu1"].map(String::from))
        .collect()
}

pub fn part_path(root: &Path, part: &str, id: usize) -> PathBuf {
    root.join(format!("ihdp_{part}_{id}.csv"))
}

/// One of the two predefined portions of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct IhdpPart {
    /// Factual outcomes as `y`; noiseless surfaces as the oracle columns.
    pub data: ObservationalDataset,
    pub y_cfactual: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IhdpRealization {
    pub id: usize,
    pub train: IhdpPart,
    pub test: IhdpPart,
    /// Non-fatal validation findings.
    pub warnings: Vec<String>,
}

impl IhdpRealization {
    pub fn n_rows(&self) -> usize {
        self.train.data.len() + self.test.data.len()
    }

    pub fn n_treated(&self) -> usize {
        self.train.data.n_treated() + self.test.data.n_treated()
    }

    /// Train then test rows.
    pub fn combined(&self) -> ObservationalDataset {
        self.train.data.concat(&self.test.data).expect("parts share a column count")
    }
}

fn parse_part(path: &Path) -> Result<IhdpPart> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let err = |line: usize, msg: String| Error::Data {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let expected = header();
    let got = reader.headers()?.clone();
    if got.len() != expected.len() {
        return Err(err(
            1,
            format!("header has {} columns, expected {} (x0..x24,t,y_factual,y_cfactual,mu0,mu1)", got.len(), expected.len()),
        ));
    }
    if let Some((g, e)) = got.iter().zip(&expected).find(|(g, e)| g.trim() != e.as_str()) {
        return Err(err(1, format!("header column `{g}` where `{e}` was expected")));
    }

    let width = expected.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(err(line, format!("row has {} fields, expected {width}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(line, format!("column `{}` is not a number: `{field}`", expected[j])))?;
            if !v.is_finite() {
                return Err(err(line, format!("column `{}` is not finite", expected[j])));
            }
            if j == IHDP_COVARIATES && v != 0.0 && v != 1.0 {
                return Err(err(line, format!("treatment must be 0 or 1, got {v}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(err(1, "no data rows".into()));
    }

    let table = Array2::from_shape_vec((rows, width), values).expect("row widths checked");
    let col = |j: usize| table.column(j).to_owned();
    let x = table.slice(ndarray::s![.., ..IHDP_COVARIATES]).to_owned();
    let data = ObservationalDataset::new(x, col(IHDP_COVARIATES), col(IHDP_COVARIATES + 1))?
        .with_oracle(col(IHDP_COVARIATES + 3), col(IHDP_COVARIATES + 4))?;
    Ok(IhdpPart {
        data,
        y_cfactual: col(IHDP_COVARIATES + 2),
    })
}

/// Loads and validates realization `id` from `root`.
pub fn load_realization(root: &Path, id: usize) -> Result<IhdpRealization> {
    let train = parse_part(&part_path(root, "train", id))?;
    let test = parse_part(&part_path(root, "test", id))?;
    let total = train.data.len() + test.data.len();
    if total != IHDP_ROWS {
        return Err(Error::Data {
            path: part_path(root, "test", id),
            line: test.data.len() + 1,
            msg: format!(
                "realization {id} has {total} rows ({} train + {} test), expected {IHDP_ROWS}",
                train.data.len(),
                test.data.len()
            ),
        });
    }
    let mut real = IhdpRealization {
        id,
        train,
        test,
        warnings: Vec::new(),
    };
    let treated = real.n_treated();
    if treated != IHDP_TREATED {
        let msg = format!("realization {id} has {treated} treated units, expected {IHDP_TREATED}");
        log::warn!("{msg}");
        real.warnings.push(msg);
    }
    Ok(real)
}

fn write_part<W: Write>(part: &IhdpPart, w: W) -> Result<()> {
    let (mu0, mu1) = match (&part.data.mu0, &part.data.mu1) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidConfig("IHDP parts need both oracle surfaces".into())),
    };
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    let fmt = |v: f64| format!("{v:.16e}");
    for i in 0..part.data.len() {
        let row: Vec<String> = part
            .data
            .x
            .row(i)
            .iter()
            .copied()
            .chain([part.data.t[i], part.data.y[i], part.y_cfactual[i], mu0[i], mu1[i]])
            .map(fmt)
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes both parts of a realization in the layout read by [`load_realization`].
pub fn write_realization(root: &Path, real: &IhdpRealization) -> Result<()> {
    std::fs::create_dir_all(root)?;
    for (name, part) in [("train", &real.train), ("test", &real.test)] {
        let file = std::fs::File::create(part_path(root, name, real.id))?;
        write_part(part, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

/// Validation is a seeded `floor(val_frac * n_train)` subset of the training
/// portion; the predefined test portion is kept whole.
pub fn make_splits(real: &IhdpRealization, val_frac: f64, seed: u64) -> Result<Splits> {
    if !(val_frac > 0.0 && val_frac < 1.0) {
        return Err(Error::InvalidConfig(format!("validation fraction {val_frac} outside (0, 1)")));
    }
    let (train_idx, val_idx) = holdout_indices(real.train.data.len(), val_frac, seed);
    Ok(Splits {
        train: real.train.data.subset(&train_idx),
        val: real.train.data.subset(&val_idx),
        test: real.test.data.clone(),
    })
}
