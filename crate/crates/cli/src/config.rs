//! Run options shared by flags and the TOML config file. Every field is
//! optional; flags override file values, which override built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

macro_rules! options {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident: $ty:ty,)* }) => {
        $(#[$m])*
        #[derive(Debug, Default, Clone, PartialEq, clap::Args, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$fm])* #[arg(long)] pub $field: Option<$ty>,)*
        }

        impl $name {
            /// Fills unset fields from `base`.
            pub fn or(self, base: $name) -> $name {
                $name { $($field: self.$field.or(base.$field),)* }
            }
        }
    };
}

options!(ConvergeOptions {
    /// Polynomial degree.
    k: usize,
    /// Number of refinement levels.
    levels: usize,
    /// Cells per side on the coarsest level.
    n0: usize,
    /// Storage scaling.
    gamma1: f64,
    /// Lamé scaling.
    gamma2: f64,
    dt: f64,
    /// Number of time steps.
    steps: usize,
    /// Splitting strategy (off, tuned, 1d); monolithic when unset.
    beta: String,
    /// Splitting tolerance on the relative updates.
    tol: f64,
    /// Write each level's monolithic matrix in MatrixMarket format.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    dump_matrix: bool,
});

options!(SweepOptions {
    /// Polynomial degree.
    k: usize,
    /// Comma-separated scalings.
    #[arg(value_delimiter = ',')]
    values: Vec<f64>,
    /// Comma-separated splitting strategies (off, tuned, 1d).
    #[arg(value_delimiter = ',')]
    strategies: Vec<String>,
    /// Cells per side.
    n: usize,
    dt: f64,
    /// Number of time steps.
    steps: usize,
    tol: f64,
    max_iter: usize,
});

options!(MandelOptions {
    /// Stiffness and load scaling.
    gamma3: f64,
    /// Polynomial degree.
    k: usize,
    nx: usize,
    ny: usize,
    /// Time step in seconds.
    dt: f64,
    /// Final time in seconds.
    t_end: f64,
    /// Splitting strategy (off, tuned, 1d); monolithic when unset.
    beta: String,
    tol: f64,
    max_iter: usize,
    /// Comma-separated sampling times in seconds.
    #[arg(value_delimiter = ',')]
    times: Vec<f64>,
    /// Sample abscissae as fractions of the half-width.
    #[arg(value_delimiter = ',')]
    x: Vec<f64>,
});

options!(InfSupOptions {
    /// Polynomial degree.
    k: usize,
    /// Comma-separated cells per side.
    #[arg(value_delimiter = ',')]
    levels: Vec<usize>,
});

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub out_dir: Option<PathBuf>,
    pub converge: ConvergeOptions,
    pub sweep_gamma1: SweepOptions,
    pub sweep_gamma2: SweepOptions,
    pub sweep_gamma3: SweepOptions,
    pub mandel: MandelOptions,
    pub infsup: InfSupOptions,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ConfigFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
