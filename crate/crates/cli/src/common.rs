use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use sogtok_core::checkpoint::load_checkpoint;
use sogtok_core::ingest::{join_labels, read_graph_file, read_label_csv};
use sogtok_core::manifest::RunManifest;
use sogtok_core::train::TokenizerModel;
use sogtok_core::Graph;

use crate::args::DataArgs;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads every `--data` file, applies `--labels`, and rejects duplicate ids.
pub fn load_graphs(data: &DataArgs, manifest: &mut RunManifest) -> Result<Vec<Graph>> {
    let mut graphs = Vec::new();
    for path in &data.data {
        manifest
            .add_input(path)
            .map_err(|e| CliError::from(e).context(path.display()))?;
        let mut part =
            read_graph_file(path).map_err(|e| CliError::from(e).context(path.display()))?;
        graphs.append(&mut part);
    }
    if let Some(path) = &data.labels {
        manifest
            .add_input(path)
            .map_err(|e| CliError::from(e).context(path.display()))?;
        let file = fs::File::open(path).map_err(|e| CliError::from(e).context(path.display()))?;
        let labels = read_label_csv(BufReader::new(file))
            .map_err(|e| CliError::from(e).context(path.display()))?;
        graphs = join_labels(graphs, &labels);
    }
    let mut seen = BTreeSet::new();
    for g in &graphs {
        if !seen.insert(g.id()) {
            return Err(CliError::config(format!("duplicate graph id {:?}", g.id())));
        }
    }
    Ok(graphs)
}

pub fn load_model(path: &Path, manifest: &mut RunManifest) -> Result<TokenizerModel> {
    manifest
        .add_input(path)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    let (model, _) =
        load_checkpoint(path).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(model)
}

pub fn read_input(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| CliError::from(e).context(path.display()))?;
    manifest.add_input(path).map_err(CliError::from)?;
    Ok(bytes)
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config(e.to_string()))
}

/// Named output files collected in memory, then written with the manifest.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes every file under `dir`, records its checksum, then writes the manifest.
    pub fn finish(self, dir: &Path, mut manifest: RunManifest) -> Result<RunManifest> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::from(e).context(path.display()))?;
            manifest.add_output(name.clone(), bytes);
        }
        fs::write(dir.join(MANIFEST_FILE), manifest.to_json())?;
        Ok(manifest)
    }
}
