pub mod diagnose;
pub mod experiment;
pub mod gen_data;
pub mod solve;
pub mod stop_run;

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::io::{read_design_csv, read_vector_csv};
use crate::{config_error, core_error, AppResult};
use iss_core::Problem;

/// Loads a problem from the design/response CSV pair.
pub fn load_problem(x_path: &Path, y_path: &Path) -> AppResult<Problem> {
    let x = read_design_csv(x_path).map_err(config_error)?;
    let y = read_vector_csv(y_path).map_err(config_error)?;
    Problem::new(x, y).map_err(core_error)
}

pub fn ensure_out_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| config_error(anyhow::anyhow!("creating {}: {e}", dir.display())))
}

/// Support of a vector as sorted indices of exact nonzeros.
pub fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    (0..beta.len()).filter(|&i| beta[i] != 0.0).collect()
}
