use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How node prefix labels are attached (axis A).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodePrefix {
    /// No prefixes.
    None = 0,
    /// Every internal node is prefixed with its grammar rule name.
    AllInternal = 1,
    /// Only parenthesis nodes, prefixed with their syntactic context.
    Parentheses = 2,
}

/// Treatment of compound statements (axis B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompoundStmt {
    Keep = 0,
    Drop = 1,
    /// Label every block `{#}` regardless of length.
    Uniform = 2,
}

/// Treatment of global variable identifiers (axis C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalVars {
    Keep = 0,
    Drop = 1,
    Gvar = 2,
    Var = 3,
}

/// Treatment of global function identifiers (axis D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalFuncs {
    Keep = 0,
    Drop = 1,
    ExFunc = 2,
}

/// One of the 216 CASS variants, written `A-B-C-D-E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CassConfig {
    pub node_prefix: NodePrefix,
    pub compound_stmt: CompoundStmt,
    pub global_vars: GlobalVars,
    pub global_funcs: GlobalFuncs,
    /// Record per-function input/output cardinality in the global attributes table.
    pub fn_io_cardinality: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("configuration id must have 5 dash-separated digits, got {0}")]
    Arity(usize),
    #[error("{axis}: {value:?} is not a digit")]
    NotDigit { axis: &'static str, value: String },
    #[error("{axis} out of range {{{range}}}")]
    OutOfRange { axis: &'static str, range: &'static str },
}

pub const AXES: [(&str, &str, u8); 5] = [
    ("node_prefix", "0,1,2", 3),
    ("compound_stmt", "0,1,2", 3),
    ("global_vars", "0,1,2,3", 4),
    ("global_funcs", "0,1,2", 3),
    ("fn_io_cardinality", "0,1", 2),
];

impl CassConfig {
    /// The simplified parse tree, `0-0-0-0-0`.
    pub const SPT: CassConfig = CassConfig {
        node_prefix: NodePrefix::None,
        compound_stmt: CompoundStmt::Keep,
        global_vars: GlobalVars::Keep,
        global_funcs: GlobalFuncs::Keep,
        fn_io_cardinality: false,
    };

    /// Builds a config from raw option digits in axis order.
    pub fn from_digits(d: [u8; 5]) -> Result<Self, ConfigError> {
        for (i, (axis, range, size)) in AXES.iter().enumerate() {
            if d[i] >= *size {
                return Err(ConfigError::OutOfRange { axis, range });
            }
        }
        Ok(CassConfig {
            node_prefix: [NodePrefix::None, NodePrefix::AllInternal, NodePrefix::Parentheses][d[0] as usize],
            compound_stmt: [CompoundStmt::Keep, CompoundStmt::Drop, CompoundStmt::Uniform][d[1] as usize],
            global_vars: [GlobalVars::Keep, GlobalVars::Drop, GlobalVars::Gvar, GlobalVars::Var][d[2] as usize],
            global_funcs: [GlobalFuncs::Keep, GlobalFuncs::Drop, GlobalFuncs::ExFunc][d[3] as usize],
            fn_io_cardinality: d[4] == 1,
        })
    }

    pub fn digits(&self) -> [u8; 5] {
        [
            self.node_prefix as u8,
            self.compound_stmt as u8,
            self.global_vars as u8,
            self.global_funcs as u8,
            self.fn_io_cardinality as u8,
        ]
    }

    /// The `A-B-C-D-E` identifier.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl Default for CassConfig {
    fn default() -> Self {
        CassConfig::SPT
    }
}

impl fmt::Display for CassConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.digits();
        write!(f, "{a}-{b}-{c}-{d}-{e}")
    }
}

impl FromStr for CassConfig {
    type Err = ConfigError;

    fn from_str(id: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = id.split('-').collect();
        if parts.len() != 5 {
            return Err(ConfigError::Arity(parts.len()));
        }
        let mut digits = [0u8; 5];
        for (i, part) in parts.iter().enumerate() {
            let axis = AXES[i].0;
            if part.len() != 1 || !part.as_bytes()[0].is_ascii_digit() {
                return Err(ConfigError::NotDigit { axis, value: part.to_string() });
            }
            digits[i] = part.as_bytes()[0] - b'0';
        }
        CassConfig::from_digits(digits)
    }
}

impl Serialize for CassConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for CassConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_config_id(id: &str) -> Result<CassConfig, ConfigError> {
    id.parse()
}

pub fn config_id(cfg: &CassConfig) -> String {
    cfg.id()
}

/// All 216 configurations in lexicographic order of their ids.
pub fn enumerate_configs() -> Vec<CassConfig> {
    let mut out = Vec::with_capacity(216);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..4 {
                for d in 0..3 {
                    for e in 0..2 {
                        out.push(CassConfig::from_digits([a, b, c, d, e]).expect("in range"));
                    }
                }
            }
        }
    }
    out
}
