use std::path::PathBuf;

use clap::Args;
use offpath_md::bench::{parse_kv, ConfigError, RunConfig};

/// Settings shared by every subcommand. Precedence: flags, then the
/// environment, then `--config`, then built-in defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct Settings {
    /// key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key, e.g. `--set sort=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// fcc unit cells per side: N, AxBxC, or a sweep list such as 6,8,10.
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    /// Reneighbor interval, or a sweep such as 1..20 or 1,5,20.
    #[arg(long)]
    pub reneigh: Option<String>,
    /// Skin distance, or a sweep list such as 0.1,0.3.
    #[arg(long)]
    pub skin: Option<String>,
    /// baseline, offpath, offpath-sync-debug or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// Node pairs.
    #[arg(long)]
    pub nodes: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub host_threads: Option<String>,
    #[arg(long)]
    pub offload_threads: Option<String>,
    /// Offload slowdown factor (>= 1).
    #[arg(long)]
    pub throttle: Option<String>,
    /// local or socket.
    #[arg(long)]
    pub transport: Option<String>,
    /// Comma-separated host:port per worker rank, for the socket transport.
    #[arg(long)]
    pub peers: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub sort: Option<String>,
    #[arg(long)]
    pub thermo: Option<String>,
    /// Seconds to wait for any single message; 0 waits forever.
    #[arg(long)]
    pub timeout: Option<String>,
    /// TDR pass threshold.
    #[arg(long)]
    pub delta: Option<String>,
}

fn is_list(v: &str) -> bool {
    v.contains(',') || v.contains("..")
}

impl Settings {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v.clone()));
            }
        };
        put("iters", &self.iters);
        put("mode", &self.mode);
        put("nodes", &self.nodes);
        put("grid", &self.grid);
        put("host_threads", &self.host_threads);
        put("offload_threads", &self.offload_threads);
        put("throttle", &self.throttle);
        put("transport", &self.transport);
        put("peers", &self.peers);
        put("out_dir", &self.out_dir);
        put("seed", &self.seed);
        put("dt", &self.dt);
        put("sort", &self.sort);
        put("thermo", &self.thermo);
        put("timeout", &self.timeout);
        put("delta", &self.delta);
        for (key, sweep_key, v) in [
            ("cells", "sweep_cells", &self.cells),
            ("reneigh", "sweep_reneigh", &self.reneigh),
            ("skin", "sweep_skin", &self.skin),
        ] {
            if let Some(v) = v {
                let k = if is_list(v) { sweep_key } else { key };
                kv.push((k.to_string(), v.clone()));
            }
        }
        kv
    }

    pub fn resolve(&self, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::BadValue {
                key: "config".into(),
                value: path.display().to_string(),
                reason: e.to_string(),
            })?;
            cfg.apply(&parse_kv(&text)?)?;
        }
        cfg.apply_env(env);
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: s.clone(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.apply(&self.flag_pairs())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.conf");
        std::fs::write(&file, "iters=50\nout_dir=from-file\nskin=0.2\n").unwrap();
        let s = Settings {
            config: Some(file),
            iters: Some("70".into()),
            ..Default::default()
        };
        let cfg = s.resolve(|k| (k == "MDBENCH_OUT_DIR").then(|| "from-env".into())).unwrap();
        assert_eq!(cfg.params.n_iterations, 70);
        assert_eq!(cfg.params.skin, 0.2);
        assert_eq!(cfg.out_dir, PathBuf::from("from-env"));
    }

    #[test]
    fn list_values_become_sweeps() {
        let s = Settings {
            reneigh: Some("1..3".into()),
            ..Default::default()
        };
        assert_eq!(s.resolve(|_| None).unwrap().sweep_reneigh, vec![1, 2, 3]);
    }
}
