use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::error::CliError;
use crate::{Job, JobArgs, JobReport, RunConfig, EXIT_COMPUTE, EXIT_OK};

pub const MANIFEST: &str = "manifest.json";

/// A CSV file: job metadata for the `#` header plus the data block.
pub struct OutputFile {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub rows: Vec<u8>,
}

/// Everything a job needs to stamp and place its outputs.
pub struct Context {
    job: Job,
    out: PathBuf,
    config_path: PathBuf,
    config: Value,
    no_timestamp: bool,
    threads: usize,
    started: Instant,
}

impl Context {
    pub fn new(job: Job, cfg: &RunConfig, args: &JobArgs, threads: usize) -> Self {
        Self {
            job,
            out: args.out.clone(),
            config_path: args.config.clone(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            no_timestamp: args.no_timestamp,
            threads,
            started: Instant::now(),
        }
    }

    fn stamp(&self) -> Vec<(String, String)> {
        if self.no_timestamp {
            return Vec::new();
        }
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        vec![
            ("wall_time_s".into(), format!("{:.3}", self.started.elapsed().as_secs_f64())),
            ("timestamp_unix".into(), unix.to_string()),
        ]
    }

    fn header(&self, meta: &[(String, String)]) -> String {
        let mut lines = vec![
            ("tool".to_string(), format!("bhecho {}", bhecho::VERSION)),
            ("job".to_string(), self.job.to_string()),
            ("config".to_string(), self.config.to_string()),
        ];
        lines.extend(meta.iter().cloned());
        lines.extend(self.stamp());
        lines.iter().map(|(k, v)| format!("# {k}={}\n", v.replace('\n', " "))).collect()
    }

    /// Write the data files and the manifest; `partial` marks a run with
    /// failed points.
    pub fn finish(
        &self,
        files: Vec<OutputFile>,
        results: Value,
        tolerances: Value,
        warnings: Vec<String>,
        partial: bool,
    ) -> Result<JobReport, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let mut outputs = Vec::new();
        let mut names = Vec::new();
        for f in &files {
            let mut body = self.header(&f.meta).into_bytes();
            body.extend_from_slice(&f.rows);
            let path = self.out.join(&f.name);
            write_atomic(&path, &body)?;
            outputs.push(path);
            names.push(f.name.clone());
        }
        let mut manifest = json!({
            "tool": "bhecho",
            "version": bhecho::VERSION,
            "job": self.job.as_str(),
            "config_path": self.config_path.display().to_string(),
            "config": self.config,
            "threads": self.threads,
            "outputs": names,
            "tolerances": tolerances,
            "results": results,
            "warnings": warnings,
            "status": if partial { "partial" } else { "ok" },
        });
        for (k, v) in self.stamp() {
            manifest[k] = json!(v);
        }
        let path = self.out.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        outputs.push(path);
        Ok(JobReport { outputs, exit_code: if partial { EXIT_COMPUTE } else { EXIT_OK }, warnings })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Refuse to clobber existing outputs unless `overwrite` is set.
pub fn check_targets(out: &Path, names: &[String], overwrite: bool) -> Result<(), CliError> {
    if out.exists() && !out.is_dir() {
        return Err(CliError::config("--out", format!("{} is not a directory", out.display())));
    }
    if overwrite {
        return Ok(());
    }
    let taken: Vec<&str> =
        names.iter().map(String::as_str).chain(std::iter::once(MANIFEST)).filter(|n| out.join(n).exists()).collect();
    if taken.is_empty() {
        Ok(())
    } else {
        Err(CliError::config(
            "--out",
            format!("refusing to overwrite {} in {} (pass --overwrite)", taken.join(", "), out.display()),
        ))
    }
}

/// The data block of an output file: every line that is not a `#` header.
pub fn data_rows(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}
