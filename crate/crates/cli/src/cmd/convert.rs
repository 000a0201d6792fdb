use std::path::PathBuf;

use irbm::data::{write_bitmap, BitmapBundle, Dataset, Split};

use crate::config::{DataFormat, RunConfig};
use crate::data::load_splits;
use crate::error::{io_error, CliError};

pub struct ConvertArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Vec<String>,
}

fn empty_like(d: &Dataset, split: Split) -> Result<Dataset, CliError> {
    let labels = (d.labels().is_some()).then(Vec::new);
    Ok(Dataset::new(Vec::new(), labels, d.visible(), d.classes(), split)?)
}

/// Loads any supported dataset (binarizing intensity data once) and writes
/// the three splits as a packed bitmap file.
pub fn run(args: ConvertArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &args.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_flags(&args.overrides)?;
    cfg.validate()?;
    if matches!(cfg.data_format, DataFormat::Bitmap | DataFormat::Silhouettes)
        && cfg.data_path.as_ref() == Some(&args.out)
    {
        return Err(CliError::Validation("refusing to overwrite the input file".into()));
    }
    let s = load_splits(&cfg)?;
    let bundle = BitmapBundle {
        valid: match s.valid {
            Some(v) => v,
            None => empty_like(&s.train, Split::Valid)?,
        },
        test: match s.test {
            Some(t) => t,
            None => empty_like(&s.train, Split::Test)?,
        },
        train: s.train,
    };
    let bytes = write_bitmap(&bundle)?;
    std::fs::write(&args.out, bytes).map_err(|e| io_error(&args.out, e))?;
    eprintln!(
        "wrote {} ({} train, {} valid, {} test)",
        args.out.display(),
        bundle.train.len(),
        bundle.valid.len(),
        bundle.test.len()
    );
    Ok(())
}
