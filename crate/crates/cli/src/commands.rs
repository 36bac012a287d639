use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use sploc::analysis::{msip_grid, packet_rmsf, plain_rmsf, replicate_summary, Subspace};
use sploc::packets::{load_manifest, split_stream, write_dataset};
use sploc::rng::seed_stream;
use sploc::synthgen::{enumerate_codes, molecule_seed, parse_code, simulate, GeneratorConfig, MoleculeCode};
use sploc::{run_sploc, BiasMode, DataPacket, ModeClass, OptimizerConfig, SplocError};

use crate::args::{GenDataArgs, MsipArgs, ReplicateArgs, RmsfArgs, ScenarioArgs, SpectrumArgs, SubspaceArg, TrainArgs};
use crate::bundle::{read_train_config, write_bundle, Bundle, RunSummary, TrainConfig};
use crate::scenario::{Scenario, ScenarioName};
use crate::svg;

/// Settings shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Global {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Global {
    fn pool(&self) -> Result<rayon::ThreadPool, SplocError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(SplocError::Invalid("--jobs must be at least 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| SplocError::Invalid(format!("thread pool: {e}")))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), SplocError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> SplocError {
    SplocError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_code_list(text: &str) -> Result<Vec<MoleculeCode>, SplocError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(enumerate_codes());
    }
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let pattern_like = item.chars().any(|c| c == '*' || c.is_ascii_lowercase());
        if pattern_like {
            let hits: Vec<_> = enumerate_codes().into_iter().filter(|c| c.matches(item)).collect();
            if hits.is_empty() || item.chars().count() != 3 {
                return Err(SplocError::Parse {
                    what: "molecule code",
                    text: item.to_string(),
                    reason: "pattern matches no molecule; letters are E,F / F,L,S,T / F,L,T".into(),
                });
            }
            out.extend(hits);
        } else {
            out.push(parse_code(item)?);
        }
    }
    if out.is_empty() {
        return Err(SplocError::Invalid("--codes selects no molecules".into()));
    }
    out.dedup();
    Ok(out)
}

pub fn gen_data(args: &GenDataArgs, global: &Global) -> Result<(), SplocError> {
    let codes = parse_code_list(&args.codes)?;
    let config = GeneratorConfig {
        atoms: args.atoms,
        frames: args.frames,
        seed: global.seed.unwrap_or(0),
        ..GeneratorConfig::default()
    };
    config.validate()?;
    if args.streams == 0 || args.streams > args.frames {
        return Err(SplocError::Invalid(format!(
            "--streams must be between 1 and --frames, got {}",
            args.streams
        )));
    }
    info!("simulating {} molecules, {} frames each", codes.len(), args.frames);
    let pool = global.pool()?;
    let per_code: Vec<Result<Vec<DataPacket>, SplocError>> = pool.install(|| {
        codes
            .par_iter()
            .map(|&code| {
                let cfg = GeneratorConfig {
                    seed: molecule_seed(config.seed, code),
                    ..config.clone()
                };
                split_stream(&simulate(code, &cfg)?, args.streams)
            })
            .collect()
    });
    let mut packets = Vec::new();
    for r in per_code {
        packets.extend(r?);
    }
    let provenance = format!(
        "gen-data codes={} frames={} atoms={} streams={} noise={} k_ref={} k_sig={}",
        args.codes, config.frames, config.atoms, args.streams, config.noise, config.k_ref, config.k_sig
    );
    let path = write_dataset(
        &global.out,
        &packets,
        Some(args.atoms),
        args.format.into(),
        Some(config.seed),
        Some(provenance),
    )?;
    println!("{}", path.display());
    Ok(())
}

fn build_config(
    sa: &ScenarioArgs,
    bias: Option<BiasMode>,
    base: Option<TrainConfig>,
    global: &Global,
) -> Result<TrainConfig, SplocError> {
    let manifest = match (&sa.manifest, &base) {
        (Some(m), _) => m.clone(),
        (None, Some(b)) => b.manifest.clone(),
        (None, None) => return Err(SplocError::Invalid("--manifest is required".into())),
    };
    let scenario_given = sa.scenario.is_some() || sa.functional.is_some() || sa.nonfunctional.is_some();
    let scenario = match (&base, scenario_given) {
        (Some(b), false) => b.scenario.clone(),
        _ => {
            let name = sa.scenario.unwrap_or(if sa.functional.is_some() {
                ScenarioName::All
            } else {
                ScenarioName::Custom
            });
            Scenario::new(name, sa.functional.clone(), sa.nonfunctional.clone())?
        }
    };
    let mut optimizer = base.map(|b| b.optimizer).unwrap_or_default();
    if let Some(s) = global.seed {
        optimizer.seed = s;
    }
    if let Some(b) = bias {
        optimizer.bias = b;
    }
    if let Some(m) = sa.max_sweeps {
        optimizer.max_sweeps = m;
    }
    if let Some(a) = sa.angle_steps {
        optimizer.angle_steps = a;
    }
    optimizer.validate()?;
    Ok(TrainConfig {
        manifest,
        scenario,
        optimizer,
    })
}

fn load_training_packets(config: &TrainConfig) -> Result<Vec<DataPacket>, SplocError> {
    let manifest = load_manifest(&config.manifest)?;
    let packets = config.scenario.select(manifest.load_packets()?)?;
    info!(
        "scenario {}: {} packets of dimension {}",
        config.scenario.name,
        packets.len(),
        manifest.dimension
    );
    Ok(packets)
}

fn report_warning(summary: &RunSummary) {
    if let Some(w) = &summary.warning {
        warn!("{w}");
    }
}

pub fn train(args: &TrainArgs, global: &Global) -> Result<(), SplocError> {
    let base = args.config.as_deref().map(read_train_config).transpose()?;
    let config = build_config(&args.scenario, args.bias, base, global)?;
    let packets = load_training_packets(&config)?;
    let result = run_sploc(&packets, &config.optimizer, None)?;
    let summary = write_bundle(&global.out, &result, &config)?;
    report_warning(&summary);
    println!("{}", summary.line());
    Ok(())
}

struct ReplicateOutcome {
    bias: BiasMode,
    replicate: usize,
    seed: u64,
    result: Result<RunSummary, SplocError>,
}

fn bias_dir_name(b: BiasMode) -> String {
    format!("bias_{}", b.label())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn replicate(args: &ReplicateArgs, global: &Global) -> Result<(), SplocError> {
    if args.replicates == 0 {
        return Err(SplocError::Invalid("--replicates must be at least 1".into()));
    }
    let mut biases = args.biases.clone();
    biases.dedup();
    let template = build_config(&args.scenario, None, None, global)?;
    let packets = load_training_packets(&template)?;
    let p = packets[0].dim();
    let seeds = seed_stream(global.seed.unwrap_or(0), args.replicates);
    let tasks: Vec<(BiasMode, usize, u64)> = biases
        .iter()
        .flat_map(|&b| seeds.iter().enumerate().map(move |(k, &s)| (b, k, s)))
        .collect();
    info!("{} runs over {} biases", tasks.len(), biases.len());

    let pool = global.pool()?;
    let outcomes: Vec<ReplicateOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(bias, k, seed)| {
                let config = TrainConfig {
                    optimizer: OptimizerConfig {
                        seed,
                        bias,
                        ..template.optimizer.clone()
                    },
                    ..template.clone()
                };
                let dir = global.out.join(bias_dir_name(bias)).join(format!("rep_{k}"));
                let result = run_sploc(&packets, &config.optimizer, None)
                    .and_then(|r| write_bundle(&dir, &r, &config));
                match &result {
                    Ok(s) => {
                        report_warning(s);
                        info!("bias {bias} rep {k}: {}", s.line());
                    }
                    Err(e) => warn!("bias {bias} rep {k} failed: {e}"),
                }
                ReplicateOutcome {
                    bias,
                    replicate: k,
                    seed,
                    result,
                }
            })
            .collect()
    });

    let mut runs = String::from("bias,replicate,seed,status,nD,nU,nI,net_E,sweeps,converged,error\n");
    for o in &outcomes {
        match &o.result {
            Ok(s) => runs.push_str(&format!(
                "{},{},{},ok,{},{},{},{},{},{},\n",
                o.bias, o.replicate, o.seed, s.n_d, s.n_u, s.n_i, s.net_efficacy, s.sweeps, s.converged
            )),
            Err(e) => runs.push_str(&format!(
                "{},{},{},failed,,,,,,,\"{}\"\n",
                o.bias,
                o.replicate,
                o.seed,
                e.to_string().replace('"', "'")
            )),
        }
    }
    write_file(&global.out.join("runs.csv"), &runs)?;

    let mut summary = String::from("bias,replicates,failed,mean_nD,se_nD,mean_nU,se_nU,mean_nI,se_nI,mean_net_E\n");
    let mut fig = String::from("bias,class,mean,stderr\n");
    let mut successes = 0;
    for &bias in &biases {
        let ok: Vec<&RunSummary> = outcomes
            .iter()
            .filter(|o| o.bias == bias)
            .filter_map(|o| o.result.as_ref().ok())
            .collect();
        let failed = args.replicates - ok.len();
        successes += ok.len();
        if ok.is_empty() {
            summary.push_str(&format!("{bias},0,{failed},,,,,,,\n"));
            continue;
        }
        let counts: Vec<_> = ok
            .iter()
            .map(|s| sploc::scoring::ModeCounts {
                d: s.n_d,
                u: s.n_u,
                i: s.n_i,
            })
            .collect();
        let n = ok.len() as f64;
        let mean_e = ok.iter().map(|s| s.net_efficacy).sum::<f64>() / n;
        let (mean, se): ([f64; 3], [Option<f64>; 3]) = if ok.len() >= 2 {
            let r = replicate_summary(&counts, p)?;
            (r.mean, r.stderr.map(Some))
        } else {
            let c = counts[0];
            ([c.d as f64, c.u as f64, c.i as f64], [None; 3])
        };
        summary.push_str(&format!(
            "{bias},{},{failed},{},{},{},{},{},{},{mean_e}\n",
            ok.len(),
            mean[0],
            fmt_opt(se[0]),
            mean[1],
            fmt_opt(se[1]),
            mean[2],
            fmt_opt(se[2]),
        ));
        for (k, class) in ["D", "U", "I"].iter().enumerate() {
            fig.push_str(&format!("{bias},{class},{},{}\n", mean[k], fmt_opt(se[k])));
        }
    }
    write_file(&global.out.join("summary.csv"), &summary)?;
    write_file(&global.out.join("class_counts.csv"), &fig)?;
    print!("{summary}");
    if successes == 0 {
        return Err(SplocError::Degenerate("every replicate run failed".into()));
    }
    Ok(())
}

pub fn msip(args: &MsipArgs, global: &Global) -> Result<(), SplocError> {
    let bundles = args
        .bundles
        .iter()
        .map(|d| Bundle::load(d))
        .collect::<Result<Vec<_>, _>>()?;
    let sets: Vec<(String, [Subspace; 3])> = bundles.iter().map(|b| (b.name(), b.subspaces())).collect();
    let grid = msip_grid(&sets)?;
    let path = global.out.join("msip.csv");
    write_file(&path, &grid.to_csv())?;
    if args.svg {
        let labels: Vec<(String, ModeClass)> = sets
            .iter()
            .flat_map(|(n, _)| [ModeClass::D, ModeClass::U, ModeClass::I].iter().map(move |&c| (n.clone(), c)))
            .collect();
        let names: Vec<String> = labels.iter().map(|(n, c)| format!("{n}:{c}")).collect();
        let doc = svg::heatmap("Mean square inner product", &names, &names, |r, c| {
            let (a, ca) = &labels[r];
            let (b, cb) = &labels[c];
            grid.get(a, b, *ca, *cb).unwrap_or(f64::NAN)
        });
        write_file(&global.out.join("msip.svg"), &doc)?;
    }
    println!("{}", path.display());
    Ok(())
}

fn subspace_name(s: SubspaceArg) -> &'static str {
    match s {
        SubspaceArg::D => "D",
        SubspaceArg::U => "U",
        SubspaceArg::I => "I",
        SubspaceArg::Full => "full",
    }
}

pub fn rmsf(args: &RmsfArgs, global: &Global) -> Result<(), SplocError> {
    let bundle = Bundle::load(&args.bundle)?;
    let manifest_path = match (&args.manifest, &bundle.config) {
        (Some(m), _) => m.clone(),
        (None, Some(c)) => c.manifest.clone(),
        (None, None) => {
            return Err(SplocError::Invalid(
                "bundle has no config.json; pass --manifest".into(),
            ))
        }
    };
    let mut packets = load_manifest(&manifest_path)?.load_packets()?;
    if let Some(c) = &bundle.config {
        if args.manifest.is_none() {
            packets = c.scenario.select(packets)?;
        }
    }
    let p = bundle.basis.nrows();
    if let Some(bad) = packets.iter().find(|pk| pk.dim() != p) {
        return Err(SplocError::DimensionMismatch {
            context: format!("packet {} against bundle basis", bad.id()),
            expected: p,
            found: bad.dim(),
        });
    }
    let subspace = match args.subspace {
        SubspaceArg::Full => None,
        s => {
            let class = match s {
                SubspaceArg::D => ModeClass::D,
                SubspaceArg::U => ModeClass::U,
                _ => ModeClass::I,
            };
            let sub = bundle
                .subspaces()
                .into_iter()
                .find(|x| x.label == class)
                .expect("three class subspaces");
            if sub.dim() == 0 {
                warn!("the {class} subspace of {} is empty", bundle.name());
            }
            Some(sub)
        }
    };
    let name = subspace_name(args.subspace);
    let mut csv = String::from("packet,subspace,atom,value\n");
    let mut series = Vec::with_capacity(packets.len());
    for pk in &packets {
        let values = match &subspace {
            None => plain_rmsf(pk)?,
            Some(s) if s.dim() == 0 => vec![0.0; p / 2],
            Some(s) => packet_rmsf(pk, s)?.values,
        };
        for (a, v) in values.iter().enumerate() {
            csv.push_str(&format!("{},{name},{},{v}\n", pk.id(), a + 1));
        }
        series.push((pk.id().to_string(), values));
    }
    let path = global.out.join("rmsf.csv");
    write_file(&path, &csv)?;
    if args.svg {
        let doc = svg::line_plot(&format!("RMSF in the {name} subspace"), "atom", &series);
        write_file(&global.out.join("rmsf.svg"), &doc)?;
    }
    println!("{}", path.display());
    Ok(())
}

pub fn spectrum(args: &SpectrumArgs) -> Result<(), SplocError> {
    let bundle = Bundle::load(&args.bundle)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let c = bundle.spectrum.counts();
    let text = render_spectrum(&bundle);
    let _ = write!(out, "{text}");
    let _ = writeln!(
        out,
        "nD={} nU={} nI={} net_E={:.6}",
        c.d,
        c.u,
        c.i,
        bundle.spectrum.net_efficacy()
    );
    Ok(())
}

fn render_spectrum(bundle: &Bundle) -> String {
    let mut s = format!(
        "{:>5} {:>5} {:>10} {:>8} {:>9} {:>9} {:>10}\n",
        "mode", "class", "S", "C", "Qd", "Qi", "E"
    );
    for m in bundle.spectrum.report_order() {
        s.push_str(&format!(
            "{:>5} {:>5} {:>10.4} {:>8.4} {:>9.4} {:>9.4} {:>10.4}\n",
            m.mode + 1, m.class, m.s, m.c, m.q_d, m.q_i, m.e
        ));
    }
    s
}
