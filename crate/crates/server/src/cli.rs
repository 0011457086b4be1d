//! Command-line interface.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use crowdlabel::analysis::{analyze, write_figure_files, AnalysisInputs, AnalysisReport};
use crowdlabel::consensus::{build_leave_one_out_references, build_reference_standard, write_consensus_csv};
use crowdlabel::contest::{read_log, write_leaderboard_csv, ContestStatus, JsonLinesLog, LogSink, Platform};
use crowdlabel::ingest::{
    assemble_clips, load_expert_opinions, load_manifest, partition_by_patient, select_and_exclude, write_expert_opinions,
};
use crowdlabel::quality::write_quality_csv;
use crowdlabel::simulator::{run_experiment, ExperimentConfig};
use crowdlabel::ClipRole;
use serde::Serialize;

use crate::api::{router, AppState};
use crate::config::ServerConfig;
use crate::store::{write_json, DataDir, LOG_FILE};

#[derive(Debug, Parser)]
#[command(name = "crowdlabel", version, about = "Gamified crowd labeling platform")]
pub struct Cli {
    /// TOML configuration file; CROWDLABEL_<SECTION>__<KEY> variables override it.
    #[arg(long, global = true, env = "CROWDLABEL_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API, restoring state from the data directory.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Partition a manifest by patient, select and exclude clips, attach the
    /// expert reference, and write the clip setup into the data directory.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        experts: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Rebuild state from the setup and log, verifying every logged verdict.
    Replay {
        #[arg(long)]
        data: PathBuf,
    },
    /// Write consensus, leaderboard and quality CSVs for each contest.
    Export {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        contest: Option<String>,
    },
    /// Print the prize ledger of a contest as JSON.
    Settle {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        contest: String,
        /// Close the contest first and record the closure in setup.json.
        #[arg(long)]
        close: bool,
    },
    /// Compare crowd and experts on the test clips and write figure tables.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Expert opinion CSV; defaults to experts.csv in the data directory.
        #[arg(long)]
        experts: Option<PathBuf>,
        /// Only opinions of this contest.
        #[arg(long)]
        contest: Option<String>,
        /// Monte Carlo samples per point of the opinions-needed curve.
        #[arg(long)]
        samples: Option<usize>,
        /// Seed of reference tie-breaks and crowd sampling; defaults to seeds.reference.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a synthetic contest and write its data directory and report.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment TOML; defaults to the full-scale profile.
        #[arg(long)]
        experiment: Option<PathBuf>,
        /// Use the scaled-down profile.
        #[arg(long)]
        small: bool,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = ServerConfig::from_env(cli.config.as_deref())?;
    let stdout = std::io::stdout().lock();
    match cli.command {
        Command::Serve { bind, data } => serve(config, bind, data),
        Command::Ingest { manifest, experts, data } => {
            write_json(stdout, &ingest(&config, &manifest, experts.as_deref(), &DataDir::new(data))?)
        }
        Command::Replay { data } => write_json(stdout, &replay(&config, &DataDir::new(data))?),
        Command::Export { data, out, contest } => {
            let written = export(&config, &DataDir::new(data), &out, contest.as_deref())?;
            write_json(stdout, &written)
        }
        Command::Settle { data, contest, close } => {
            write_json(stdout, &settle(&config, &DataDir::new(data), &contest, close)?)
        }
        Command::Analyze { data, out, experts, contest, samples, seed } => {
            let data = DataDir::new(data);
            let seed = seed.unwrap_or(config.seeds.reference);
            let report = analyze_dir(&data, experts.as_deref(), contest.as_deref(), samples, seed)?;
            write_figure_files(&report, &out)?;
            write_json(stdout, &headline(&report))
        }
        Command::Simulate { out, seed, experiment, small } => {
            let mut exp = match experiment {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None if small => ExperimentConfig::small(),
                None => ExperimentConfig::paper_profile(),
            };
            if small {
                let base = ExperimentConfig::small();
                exp.dataset = base.dataset;
                exp.crowd = base.crowd;
                exp.target_eligible_per_test_clip = base.target_eligible_per_test_clip;
            }
            write_json(stdout, &simulate(&exp, seed, &out)?)
        }
    }
}

fn serve(mut config: ServerConfig, bind: Option<String>, data: Option<PathBuf>) -> anyhow::Result<()> {
    if let Some(b) = bind {
        config.server.bind = b;
    }
    if let Some(d) = data {
        config.server.data_dir = Some(d);
    }
    let data = config.server.data_dir.clone().map(DataDir::new);
    let platform = match &data {
        Some(d) => d.restore(config.platform(), d.log_sink()?)?,
        None => Platform::new(config.platform(), Box::new(crowdlabel::contest::NullLog)),
    };
    let bind = config.server.bind.clone();
    let state = Arc::new(AppState::new(platform, config, data)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
pub struct IngestReport {
    pub clips: usize,
    pub patients: usize,
    pub set_a_patients: usize,
    pub set_b_patients: usize,
    pub training_clips: usize,
    pub test_clips: usize,
    pub excluded_clips: usize,
    pub labeled_clips: usize,
}

pub fn ingest(
    config: &ServerConfig,
    manifest: &Path,
    experts: Option<&Path>,
    data: &DataDir,
) -> anyhow::Result<IngestReport> {
    let manifest = load_manifest(manifest)?;
    let seed = config.seeds.partition;
    let plan = select_and_exclude(&partition_by_patient(&manifest, seed)?, &manifest, config.ingest.n_per_set, seed)?;
    let reference = match experts {
        Some(p) => {
            let panel = load_expert_opinions(p)?;
            data.write_experts(&panel)?;
            Some(build_reference_standard(&panel, config.seeds.reference)?)
        }
        None => None,
    };
    let clips = assemble_clips(&manifest, &plan, reference.as_ref());
    let labeled = clips
        .iter()
        .filter(|c| c.role != ClipRole::Unlabeled && c.reference_label.is_some())
        .count();
    let platform = data.restore_offline(config.platform())?;
    platform.register_clips(clips);
    data.write_setup(&platform.setup())?;
    data.write_ingest(&manifest, &plan)?;
    Ok(IngestReport {
        clips: manifest.len(),
        patients: manifest.patients().len(),
        set_a_patients: plan.set_a_patients.len(),
        set_b_patients: plan.set_b_patients.len(),
        training_clips: plan.training_clips.len(),
        test_clips: plan.test_clips.len(),
        excluded_clips: plan.excluded_clips.len(),
        labeled_clips: labeled,
    })
}

#[derive(Debug, Serialize)]
pub struct ContestSummary {
    pub contest_id: String,
    pub status: ContestStatus,
    pub pool: usize,
    pub opinions: u64,
    pub users: usize,
    pub clips_with_consensus: usize,
    pub leaderboard: usize,
}

#[derive(Debug, Serialize)]
pub struct ReplaySummary {
    pub clips: usize,
    pub next_opinion_id: u64,
    pub contests: Vec<ContestSummary>,
}

pub fn replay(config: &ServerConfig, data: &DataDir) -> anyhow::Result<ReplaySummary> {
    let platform = data.restore_offline(config.platform())?;
    let mut contests = Vec::new();
    for id in platform.contest_ids() {
        let info = platform.contest_info(&id)?;
        let states = platform.consensus_snapshot(&id)?;
        contests.push(ContestSummary {
            status: info.status,
            pool: info.pool.len(),
            opinions: states.iter().map(|s| u64::from(s.raw_counts.total())).sum(),
            users: platform.quality_snapshot(&id)?.len(),
            clips_with_consensus: states.iter().filter(|s| s.consensus_label.is_some()).count(),
            leaderboard: platform.leaderboard(&id)?.len(),
            contest_id: id,
        });
    }
    Ok(ReplaySummary {
        clips: platform.clip_count(),
        next_opinion_id: platform.next_opinion_id(),
        contests,
    })
}

pub fn export(config: &ServerConfig, data: &DataDir, out: &Path, only: Option<&str>) -> anyhow::Result<Vec<String>> {
    let platform = data.restore_offline(config.platform())?;
    std::fs::create_dir_all(out)?;
    let ids = match only {
        Some(id) => vec![platform.contest_info(id)?.contest_id],
        None => platform.contest_ids(),
    };
    let mut written = Vec::new();
    let mut create = |name: String| -> anyhow::Result<BufWriter<File>> {
        let file = File::create(out.join(&name))?;
        written.push(name);
        Ok(BufWriter::new(file))
    };
    for id in ids {
        let info = platform.contest_info(&id)?;
        write_consensus_csv(&platform.consensus_snapshot(&id)?, create(format!("consensus_{id}.csv"))?)?;
        write_leaderboard_csv(&platform.leaderboard(&id)?, create(format!("leaderboard_{id}.csv"))?)?;
        write_quality_csv(
            &platform.quality_snapshot(&id)?,
            info.policy.skill_threshold,
            create(format!("quality_{id}.csv"))?,
        )?;
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct SettleReport {
    pub contest_id: String,
    pub prize_pool_cents: u64,
    pub paid_cents: u64,
    pub ledger: Vec<crowdlabel::contest::LedgerEntry>,
}

pub fn settle(config: &ServerConfig, data: &DataDir, contest: &str, close: bool) -> anyhow::Result<SettleReport> {
    let platform = data.restore_offline(config.platform())?;
    if close {
        platform.close_contest(contest)?;
        data.write_setup(&platform.setup())?;
    }
    let ledger = platform.settle_prizes(contest)?;
    Ok(SettleReport {
        contest_id: contest.to_string(),
        prize_pool_cents: platform.contest_info(contest)?.prize_pool_cents,
        paid_cents: ledger.iter().map(|e| e.amount_cents).sum(),
        ledger,
    })
}

pub fn analyze_dir(
    data: &DataDir,
    experts: Option<&Path>,
    contest: Option<&str>,
    samples: Option<usize>,
    seed: u64,
) -> anyhow::Result<AnalysisReport> {
    let setup = data.read_setup()?.context("data directory has no setup.json")?;
    let panel = match experts {
        Some(p) => load_expert_opinions(p)?,
        None => data.read_experts()?.context("no expert opinions; pass --experts")?,
    };
    let log_path = data.path(LOG_FILE);
    let mut entries = read_log(BufReader::new(
        File::open(&log_path).with_context(|| format!("opening {}", log_path.display()))?,
    ))?;
    if let Some(id) = contest {
        entries.retain(|e| e.contest_id == id);
    }
    let test_clips: BTreeSet<String> = setup
        .clips
        .iter()
        .filter(|c| c.role == ClipRole::Test && !c.excluded)
        .map(|c| c.clip_id.clone())
        .collect();
    if test_clips.is_empty() {
        bail!("setup has no test clips");
    }
    // references over the test clips only
    let mut test_panel = panel.clone();
    test_panel.opinions.retain(|clip, _| test_clips.contains(clip));
    let reference = build_reference_standard(&test_panel, seed)?;
    let leave_one_out = build_leave_one_out_references(&test_panel, seed)?;
    let mut analysis = crowdlabel::analysis::AnalysisConfig::default();
    if let Some(n) = samples {
        analysis.n_samples = n;
    }
    Ok(analyze(&AnalysisInputs {
        entries: &entries,
        test_clips: &test_clips,
        panel: &test_panel,
        reference: &reference,
        leave_one_out: &leave_one_out,
        config: analysis,
        seed,
    })?)
}

#[derive(Debug, Serialize)]
pub struct Headline {
    pub n_opinions: usize,
    pub n_users: usize,
    pub n_test_clips: usize,
    pub crowd_vs_full: f64,
    pub crowd_vs_leave_one_out: f64,
    pub expert_mean_vs_full: f64,
    pub expert_mean_vs_leave_one_out: f64,
    pub t_test_vs_full_p: Option<f64>,
    pub t_test_vs_leave_one_out_p: Option<f64>,
    pub auc: Vec<(String, f64)>,
}

pub fn headline(r: &AnalysisReport) -> Headline {
    Headline {
        n_opinions: r.descriptives.n_opinions,
        n_users: r.descriptives.n_users,
        n_test_clips: r.descriptives.n_test_clips,
        crowd_vs_full: r.crowd_vs_full.overall,
        crowd_vs_leave_one_out: r.crowd_vs_leave_one_out.overall,
        expert_mean_vs_full: r.expert_mean_vs_full.overall,
        expert_mean_vs_leave_one_out: r.expert_mean_vs_leave_one_out.overall,
        t_test_vs_full_p: r.t_test_vs_full.map(|t| t.p),
        t_test_vs_leave_one_out_p: r.t_test_vs_leave_one_out.map(|t| t.p),
        auc: r.roc.iter().map(|c| (c.class.as_str().to_string(), c.auc)).collect(),
    }
}

/// Writes setup.json, opinions.jsonl, experts.csv, ledger.json and the
/// report tables under `out/report`.
pub fn simulate(exp: &ExperimentConfig, seed: u64, out: &Path) -> anyhow::Result<Headline> {
    let run = run_experiment(exp, seed)?;
    let data = DataDir::new(out);
    data.write_setup(&run.setup)?;
    let mut log = JsonLinesLog::new(BufWriter::new(File::create(data.path(LOG_FILE))?));
    for e in &run.log {
        log.append(e)?;
    }
    let mut experts = Vec::new();
    write_expert_opinions(&run.panel, &mut experts)?;
    data.write_atomic(crate::store::EXPERTS_FILE, &experts)?;
    write_json(BufWriter::new(File::create(data.path("ledger.json"))?), &run.ledger)?;
    write_figure_files(&run.report, &out.join("report"))?;
    let mut summary = BufWriter::new(File::create(data.path("experiment.json"))?);
    write_json(&mut summary, &(&run.config, run.seed))?;
    summary.flush()?;
    Ok(headline(&run.report))
}
