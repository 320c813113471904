//! Train from CSV, save the model, reload it and predict identically.

use zit_tweedie::em::{fit, EmConfig};
use zit_tweedie::io::{load_csv, load_features, load_model, save_model, write_dataset_csv, CsvOptions};
use zit_tweedie::simulation::{make_dataset, ExposureLaw, SimulationDesign};
use zit_tweedie::tweedie::PowerParam;

pub fn run_example() -> Result<bool, Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let csv_path = dir.path().join("data.csv");
    let model_path = dir.path().join("model.json");

    let zeta = PowerParam::new(1.5)?;
    let truth = SimulationDesign { p: 4, ..SimulationDesign::default() }.truth_functions()?;
    let (data, _) = make_dataset(1_000, &truth, zeta, ExposureLaw::uniform_default(), 2)?;
    write_dataset_csv(&csv_path, &data)?;

    let options = CsvOptions { exposure: Some("w".into()), ..CsvOptions::default() };
    let loaded = load_csv(&csv_path, &options)?;
    let config = EmConfig { max_em_iterations: 3, trees_per_m_step: 5, ..EmConfig::default() };
    let model = fit(&loaded, zeta, &config)?;
    save_model(&model, &model_path)?;

    let back = load_model(&model_path)?;
    let (features, _) = load_features(&csv_path, &back.schema)?;
    let same = model.score_matrix(&loaded.features)? == back.score_matrix(&features)?;
    println!("artifact {} bytes, predictions identical: {same}", std::fs::metadata(&model_path)?.len());
    Ok(same)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
