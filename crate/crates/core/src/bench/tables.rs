use serde::{Deserialize, Serialize};

use crate::zoo::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Synthetic,
    Ihdp,
}

impl Benchmark {
    pub fn key(self) -> &'static str {
        match self {
            Benchmark::Synthetic => "synthetic",
            Benchmark::Ihdp => "ihdp",
        }
    }
}

pub const IHDP_LABEL: &str = "ihdp";
pub const IHDP_COEFF_LABEL: &str = "ihdp-coeff";

/// Gradient-reversal schedule defaults `(lambda0, gamma)` per adversarial
/// family and dataset label.
pub struct DefaultLambdaTable;

const LAMBDA_ROWS: [(&str, [(f64, u32); 4]); 9] = [
    (IHDP_LABEL, [(18.0, 1), (1.2, 1), (0.2, 600), (0.001, 1)]),
    (IHDP_COEFF_LABEL, [(1.0, 1), (1.0, 1), (0.001, 1), (0.001, 1)]),
    ("w5-c10-o5-2K", [(1.4, 1), (1.8, 10), (1.5, 1), (0.2, 600)]),
    ("w5-c10-o5-3K", [(1.7, 1), (1.8, 1), (4.0, 1), (1.0, 600)]),
    ("w5-c10-o5-5K", [(1.7, 1), (8.0, 1), (4.0, 1), (1.0, 600)]),
    ("w5-c10-o5-7K", [(1.7, 1), (15.0, 1), (4.0, 1), (1.5, 600)]),
    ("w5-c11-o5-3K", [(1.7, 1), (4.0, 1), (3.0, 1), (1.5, 1)]),
    ("w5-c12-o5-3K", [(5.0, 400), (1.0, 300), (3.0, 1), (2.0, 300)]),
    ("w5-c13-o5-3K", [(0.6, 600), (5.0, 1), (3.0, 1), (0.8, 600)]),
];

fn column(family: Family) -> Option<usize> {
    match family {
        Family::Snet => Some(0),
        Family::Drcfr => Some(1),
        Family::Dragonnet => Some(2),
        Family::DragonnetTr => Some(3),
        _ => None,
    }
}

impl DefaultLambdaTable {
    pub fn get(family: Family, label: &str) -> Option<(f64, u32)> {
        let col = column(family)?;
        LAMBDA_ROWS.iter().find(|(l, _)| *l == label).map(|(_, row)| row[col])
    }

    pub fn labels() -> impl Iterator<Item = &'static str> {
        LAMBDA_ROWS.iter().map(|(l, _)| *l)
    }
}

/// Outcome/propensity trade-off defaults per family and benchmark.
pub struct DefaultAlphaTable;

impl DefaultAlphaTable {
    pub fn get(family: Family, bench: Benchmark) -> Option<f64> {
        let col = column(family)?;
        let row = match bench {
            Benchmark::Ihdp => [0.6, 0.6, 0.99, 0.99],
            Benchmark::Synthetic => [0.2, 0.5, 0.1, 0.7],
        };
        Some(row[col])
    }
}
