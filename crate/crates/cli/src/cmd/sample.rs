use std::path::PathBuf;

use irbm::inference::gibbs_sweeps;
use irbm::rng::{kind_rng, StreamKind};
use irbm::Label;
use rand::Rng;
use serde::Serialize;

use crate::checkpoint;
use crate::error::{io_error, CliError};
use crate::pgm;

pub struct SampleArgs {
    pub checkpoint: PathBuf,
    pub n_samples: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub image_width: Option<usize>,
}

#[derive(Serialize)]
struct SampleSummary {
    samples: usize,
    steps: usize,
    files: Vec<String>,
    /// Final cutoff of each chain.
    z: Vec<usize>,
}

pub fn run(args: SampleArgs) -> Result<(), CliError> {
    let state = checkpoint::load(&args.checkpoint)?;
    let params = state.params();
    let d = params.visible();
    let (w, h) = match args.image_width {
        Some(w) if w > 0 && d % w == 0 => (w, d / w),
        Some(w) => {
            return Err(CliError::Validation(format!(
                "image width {w} does not divide {d} visible units"
            )))
        }
        None => pgm::tile_shape(d),
    };
    let mut summary = SampleSummary {
        samples: args.n_samples,
        steps: args.n_steps,
        files: Vec::new(),
        z: Vec::new(),
    };
    if args.n_samples > 0 {
        let mut tiles = Vec::with_capacity(args.n_samples);
        for i in 0..args.n_samples {
            let mut rng = kind_rng(args.seed, 0, StreamKind::Evaluation, i as u64);
            let v: Vec<u8> = (0..d).map(|_| rng.random_range(0..2u8)).collect();
            let y = params
                .is_discriminative()
                .then(|| Label::new(rng.random_range(0..params.classes()), params.classes()))
                .transpose()?;
            let z = params.z_posterior(&v, y)?.sample(&mut rng);
            let s = gibbs_sweeps(params, &v, y, z, args.n_steps, &mut rng);
            tiles.push(s.v.iter().map(|&b| f64::from(b)).collect());
            summary.z.push(s.z);
        }
        std::fs::create_dir_all(&args.out_dir).map_err(|e| io_error(&args.out_dir, e))?;
        let path = args.out_dir.join("samples.pgm");
        pgm::write(&pgm::grid(&tiles, w, h), &path)?;
        summary.files.push(path.display().to_string());

        let filters: Vec<Vec<f64>> = (0..params.units())
            .map(|i| pgm::normalize(params.unit_weights(i)))
            .collect();
        let path = args.out_dir.join("filters.pgm");
        pgm::write(&pgm::grid(&filters, w, h), &path)?;
        summary.files.push(path.display().to_string());
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}
