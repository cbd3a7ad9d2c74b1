// Load behavioral records, pool repeated cells, and write model tables.

use std::fs;

use belief_dynamics::data::{aggregate, emit_heatmap, load_records, RecordFormat};
use belief_dynamics::{BeliefParams, GridAxes};

const RECORDS: &str = "\
dataset_id,model_id,layer,magnitude,shots,trials,concept_consistent
persona,toy,12,0,0,50,1
persona,toy,12,0,0,50,2
persona,toy,12,0,8,100,31
persona,toy,12,1.5,0,100,20
persona,toy,12,1.5,8,100,88
other,toy,12,0,8,100,40
";

fn main() -> belief_dynamics::Result<()> {
    let dir = std::env::temp_dir().join("belief-dynamics-ingest-example");
    fs::create_dir_all(&dir).map_err(|e| belief_dynamics::Error::io(&dir, e))?;
    let path = dir.join("records.csv");
    fs::write(&path, RECORDS).map_err(|e| belief_dynamics::Error::io(&path, e))?;

    let ingest = load_records(&path, RecordFormat::Csv)?;
    println!("{} records", ingest.records.len());
    for (id, grid) in aggregate(&ingest.records) {
        println!("{}/{}: {} cells", id.dataset_id, id.model_id, grid.len());
        for cell in grid.cells() {
            println!(
                "  m={:>4} N={:>3} trials={:>3} mean_p={:.4}",
                cell.magnitude, cell.shots, cell.trials, cell.mean_p
            );
        }
    }

    let params = BeliefParams::new(1.0, -4.0, 0.8, 0.3)?;
    let axes = GridAxes::new(vec![0.0, 1.5], vec![0, 8])?;
    let heatmap = emit_heatmap(&params, &axes, &dir.join("heatmap.csv"))?;
    println!("model heatmap rows: {:?}", heatmap.values);
    Ok(())
}
