//! Adapters that turn external data archives into the ingest schema.
//!
//! The native input is a wide CSV `timestamp,site_1,…,site_P`. Archives with
//! another layout plug in through [`Importer`]; once converted with
//! [`crate::data::write_raw`] they go through the normal ingest path.

use std::path::Path;

use crate::data::RawSeries;
use crate::error::{GgpError, Result};

pub trait Importer {
    /// Short identifier used in messages.
    fn name(&self) -> &str;

    /// Reads `source` into aligned per-site series. Timestamps must be
    /// strictly increasing and rows with missing values omitted.
    fn import(&self, source: &Path) -> Result<RawSeries>;
}

/// Placeholder for the public rooftop-PV archive. Its file layout is not
/// documented well enough to parse without guessing, so it always fails.
#[derive(Clone, Copy, Debug, Default)]
pub struct PublicPvArchive;

impl Importer for PublicPvArchive {
    fn name(&self) -> &str {
        "public-pv-archive"
    }

    fn import(&self, source: &Path) -> Result<RawSeries> {
        Err(GgpError::UnsupportedCombination(format!(
            "{}: no importer for {}; convert it to `timestamp,site_1,…` CSV first",
            self.name(),
            source.display()
        )))
    }
}
