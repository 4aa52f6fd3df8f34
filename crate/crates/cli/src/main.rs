mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use audiodiv::degrade::{self, MidiPerturbSpec, NoiseLadderSpec, PerturbRanges};
use audiodiv::mauve::{mauve, DivergenceCurve};
use audiodiv::metaeval::{evaluate_ladder, kendall_tau_b, normalize, subsample_run, tau_p_exact, LadderFile, MetricRun, MetricSpec};
use audiodiv::prdc::prdc;
use audiodiv::prefstats::{self, BtScores};
use audiodiv::report::{canonical_json, cell, format_real, Table};
use audiodiv::tensor::{assemble_set, load_set, npy, Manifest};
use audiodiv::{moments, mmd, DivergenceScore, EmbeddingSet, Error, Metric, Orientation, Role};
use clap::Parser;
use serde_json::{json, Value};

use args::*;

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult = Result<Output, Failure>;

/// What a subcommand produces: the JSON result plus its tabular view.
struct Output {
    result: Value,
    table: Table,
    /// Extra lines printed above the table in human format.
    notes: Vec<String>,
}

struct Ctx {
    timestamps: bool,
}

impl Ctx {
    fn stamp(&self, mut s: DivergenceScore, start: Instant) -> DivergenceScore {
        if self.timestamps {
            s.wall_time_s = Some(start.elapsed().as_secs_f64());
        }
        s
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_pair(pair: &PairArgs) -> Result<(EmbeddingSet, EmbeddingSet), Error> {
    let r = load_set(&pair.reference, pair.method, Role::Reference, "reference")?;
    let g = load_set(&pair.gen, pair.method, Role::Candidate, "candidate")?;
    Ok((r, g))
}

fn score_table(scores: &[&DivergenceScore]) -> Table {
    let mut t = Table::new(["metric", "value", "orientation", "n_ref", "n_gen"]);
    for s in scores {
        t.push(vec![
            s.metric.to_string(),
            format_real(s.value),
            s.orientation.as_str().into(),
            s.n_ref.to_string(),
            s.n_gen.to_string(),
        ]);
    }
    t
}

fn score_output(s: DivergenceScore) -> Output {
    let notes = s.flags.iter().map(|f| format!("flag: {f}")).collect();
    Output {
        table: score_table(&[&s]),
        result: serde_json::to_value(&s).expect("score serializes"),
        notes,
    }
}

fn curve_table(curve: &DivergenceCurve) -> Table {
    let mut t = Table::new(["lambda", "x", "y"]);
    for p in &curve.points {
        t.push(vec![cell(p.lambda), format_real(p.x), format_real(p.y)]);
    }
    t
}

fn cmd_pool(a: &PoolArgs) -> CmdResult {
    let manifest = Manifest::load(&a.manifest)?;
    let set = assemble_set(&manifest, a.method, Role::Candidate, "pooled")?;
    npy::write(set.data(), &a.out)?;
    let mut t = Table::new(["clip_id", "row"]);
    for (i, e) in manifest.entries.iter().enumerate() {
        t.push(vec![e.clip_id.clone(), i.to_string()]);
    }
    Ok(Output {
        result: json!({
            "rows": set.len(),
            "dim": set.dim(),
            "pool": a.method.as_str(),
            "out": a.out,
            "clip_ids": manifest.entries.iter().map(|e| e.clip_id.as_str()).collect::<Vec<_>>(),
        }),
        table: t,
        notes: vec![format!("wrote {}×{} matrix to {}", set.len(), set.dim(), a.out.display())],
    })
}

fn cmd_fad(a: &PairArgs, ctx: &Ctx) -> CmdResult {
    let start = Instant::now();
    let (r, g) = load_pair(a)?;
    Ok(score_output(ctx.stamp(moments::fad(&r, &g)?, start)))
}

fn cmd_mmd(a: &MmdArgs, ctx: &Ctx) -> CmdResult {
    let cfg = a.mmd.config().map_err(usage)?;
    let start = Instant::now();
    let (r, g) = load_pair(&a.pair)?;
    Ok(score_output(ctx.stamp(mmd::mmd2_unbiased(&r, &g, &cfg)?, start)))
}

fn cmd_prdc(a: &PrdcArgs, ctx: &Ctx) -> CmdResult {
    let start = Instant::now();
    let (r, g) = load_pair(&a.pair)?;
    let res = prdc(&r, &g, a.k)?;
    let mut result = serde_json::to_value(res).expect("prdc serializes");
    result["n_ref"] = r.len().into();
    result["n_gen"] = g.len().into();
    result["boundary"] = "inclusive".into();
    if ctx.timestamps {
        result["wall_time_s"] = start.elapsed().as_secs_f64().into();
    }
    let mut t = Table::new(["metric", "value", "orientation", "k"]);
    for m in [Metric::Precision, Metric::Recall, Metric::Density, Metric::Coverage] {
        t.push(vec![
            m.to_string(),
            format_real(res.get(m).expect("prdc component")),
            m.orientation().as_str().into(),
            a.k.to_string(),
        ]);
    }
    Ok(Output {
        result,
        table: t,
        notes: Vec::new(),
    })
}

fn cmd_mad(a: &MadArgs, ctx: &Ctx) -> CmdResult {
    let cfg = a.mauve.config(a.seed).map_err(usage)?;
    let start = Instant::now();
    let (r, g) = load_pair(&a.pair)?;
    let out = mauve(&r, &g, &cfg)?;
    if let Some(path) = &a.curve_csv {
        fs::write(path, curve_table(&out.curve).to_csv()).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    let score = ctx.stamp(out.mad_score(&cfg, r.len(), g.len()), start);
    let mut o = score_output(score);
    o.result["mauve"] = json!(out.mauve);
    o.result["curve"] = serde_json::to_value(&out.curve).expect("curve serializes");
    o.notes.push(format!("MAUVE = {}", format_real(out.mauve)));
    Ok(o)
}

fn metric_spec(metric: Metric, seed: u64, l: &LadderOpts) -> Result<MetricSpec, Failure> {
    let mut spec = MetricSpec::new(metric, seed);
    spec.mmd = l.mmd.config().map_err(usage)?;
    spec.mauve = l.mauve.config(seed).map_err(usage)?;
    spec.prdc_k = l.k;
    Ok(spec)
}

fn load_ladder(l: &LadderOpts) -> Result<audiodiv::metaeval::DistortionLadder, Error> {
    let ladder = LadderFile::read(&l.ladder)?.load(l.method)?;
    Ok(if l.oracle_reference {
        ladder.with_oracle_reference()
    } else {
        ladder
    })
}

fn run_json(run: &MetricRun) -> Value {
    let mut v = serde_json::to_value(run).expect("run serializes");
    let norm = normalize(&run.scores);
    v["normalized_scores"] = json!(norm.values);
    v["normalization_degenerate"] = json!(norm.degenerate);
    v
}

fn run_rows(t: &mut Table, run: &MetricRun, size: Option<usize>) {
    let norm = normalize(&run.scores);
    for (i, (s, n)) in run.scores.iter().zip(&norm.values).enumerate() {
        let mut row = vec![run.metric.to_string(), (i + 1).to_string(), format_real(*s), format_real(*n)];
        if let Some(size) = size {
            row.insert(0, size.to_string());
        }
        t.push(row);
    }
}

fn tau_note(run: &MetricRun, prefix: &str) -> String {
    format!(
        "{prefix}{}: tau = {}  p = {}",
        run.metric,
        format_real(run.tau),
        cell(run.p_value)
    )
}

fn cmd_metaeval(a: &MetaevalArgs) -> CmdResult {
    let stochastic: Vec<String> = a.metrics.iter().filter(|m| m.is_stochastic()).map(|m| m.to_string()).collect();
    let seed = match (a.seed, stochastic.is_empty()) {
        (Some(s), _) => s,
        (None, true) => 0,
        (None, false) => return Err(usage(format!("--seed is required for {}", stochastic.join(", ")))),
    };
    let ladder = load_ladder(&a.ladder)?;
    let mut runs = Vec::new();
    for &m in &a.metrics {
        runs.push(evaluate_ladder(&ladder, &metric_spec(m, seed, &a.ladder)?)?);
    }
    let mut t = Table::new(["metric", "level", "raw_score", "normalized_score"]);
    for r in &runs {
        run_rows(&mut t, r, None);
    }
    Ok(Output {
        result: json!({
            "desideratum": ladder.desideratum,
            "levels": ladder.num_levels(),
            "reference": ladder.reference.label(),
            "runs": runs.iter().map(run_json).collect::<Vec<_>>(),
        }),
        table: t,
        notes: runs.iter().map(|r| tau_note(r, "")).collect(),
    })
}

fn cmd_subsample(a: &SubsampleArgs) -> CmdResult {
    let ladder = load_ladder(&a.ladder)?;
    let spec = metric_spec(a.metric, a.seed, &a.ladder)?;
    let runs = subsample_run(&ladder, &spec, &a.sizes, a.seed)?;
    let mut t = Table::new(["size", "metric", "level", "raw_score", "normalized_score"]);
    for (run, &size) in runs.iter().zip(&a.sizes) {
        run_rows(&mut t, run, Some(size));
    }
    Ok(Output {
        result: json!({
            "desideratum": ladder.desideratum,
            "sizes": a.sizes,
            "runs": runs.iter().map(run_json).collect::<Vec<_>>(),
        }),
        table: t,
        notes: runs
            .iter()
            .zip(&a.sizes)
            .map(|(r, s)| tau_note(r, &format!("size {s}, ")))
            .collect(),
    })
}

fn ladder_output(m: degrade::LadderManifest) -> Output {
    let mut t = Table::new(["index", "param", "dir"]);
    for l in &m.levels {
        t.push(vec![l.index.to_string(), format_real(l.param), l.dir.clone()]);
    }
    Output {
        result: serde_json::to_value(&m).expect("manifest serializes"),
        table: t,
        notes: Vec::new(),
    }
}

fn cmd_degrade_noise(a: &DegradeNoiseArgs) -> CmdResult {
    let mut spec = NoiseLadderSpec::standard(a.seed);
    if let Some(s) = &a.sigmas {
        spec.sigmas = s.clone();
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(ladder_output(degrade::build_noise_ladder(&a.input, &spec, &a.output)?))
}

fn cmd_degrade_midi(a: &DegradeMidiArgs) -> CmdResult {
    let mut spec = MidiPerturbSpec::standard(a.seed);
    if let Some(p) = &a.probs {
        spec.probs = p.clone();
    }
    spec.ranges = PerturbRanges {
        pitch_semitones: a.pitch_range,
        time_seconds: a.time_range,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(ladder_output(degrade::build_midi_ladder(&a.input, &spec, &a.output)?))
}

/// Metric columns from the `--metric-scores` CSV: (name, orientation, value per system).
fn read_metric_scores(path: &Path, bt: &BtScores) -> Result<Vec<(String, Orientation, Vec<f64>)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let fmt_err = |msg: String| Failure::Run(Error::Format(format!("{}: {msg}", path.display())));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| fmt_err("empty file".into()))?.split(',').map(str::trim).collect();
    if header.first() != Some(&"system") {
        return Err(fmt_err("first column must be `system`".into()));
    }
    let mut columns = Vec::new();
    for h in &header[1..] {
        let (name, orientation) = match h.rsplit_once(':') {
            Some((n, "lower")) => (n, Orientation::LowerBetter),
            Some((n, "higher")) => (n, Orientation::HigherBetter),
            _ => match h.parse::<Metric>() {
                Ok(m) => (*h, m.orientation()),
                Err(_) => return Err(fmt_err(format!("column `{h}` needs a `:lower` or `:higher` suffix"))),
            },
        };
        columns.push((name.to_string(), orientation, vec![f64::NAN; bt.systems.len()]));
    }
    let mut seen = vec![false; bt.systems.len()];
    for line in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(fmt_err(format!("row `{line}` has {} cells, expected {}", cells.len(), header.len())));
        }
        let i = bt
            .systems
            .iter()
            .position(|s| s == cells[0])
            .ok_or_else(|| Failure::Run(Error::Data(format!("metric scores name unknown system `{}`", cells[0]))))?;
        seen[i] = true;
        for (c, col) in columns.iter_mut().enumerate() {
            col.2[i] = cells[c + 1]
                .parse()
                .map_err(|_| fmt_err(format!("`{}` is not a number", cells[c + 1])))?;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Failure::Run(Error::Data(format!("no metric scores for system `{}`", bt.systems[i]))));
    }
    Ok(columns)
}

fn cmd_bt_rank(a: &BtRankArgs) -> CmdResult {
    let records = prefstats::read_preferences(&a.prefs)?;
    let systems = prefstats::systems_in(&records);
    let matrix = prefstats::pool_preferences(&records, &systems, &a.axes)?;
    let bt = prefstats::bt_fit(&matrix, a.tol, a.max_iters)?;
    let selected: Vec<_> = records.iter().filter(|r| a.axes.contains(&r.axis)).cloned().collect();
    let bias = prefstats::position_bias_test(&selected).ok();
    let agreement = prefstats::agreement(&selected);
    let pairwise = prefstats::pairwise_significance(&matrix);

    let mut correlations = Vec::new();
    if let Some(path) = &a.metric_scores {
        for (name, orientation, values) in read_metric_scores(path, &bt)? {
            let rc = prefstats::rank_correlation(&bt.systems, &values, orientation, &bt)?;
            correlations.push(json!({
                "metric": name,
                "orientation": orientation,
                "values": values,
                "tau": rc.tau,
                "p_value": rc.p_value,
                "p_method": rc.p_method,
                "degenerate": rc.degenerate,
            }));
        }
    }

    let mut order: Vec<usize> = (0..systems.len()).collect();
    order.sort_by(|&i, &j| bt.scores[j].total_cmp(&bt.scores[i]).then(i.cmp(&j)));
    let mut t = Table::new(["rank", "system", "score", "wins", "losses", "ties"]);
    for (rank, &i) in order.iter().enumerate() {
        let wins: u64 = matrix.wins[i].iter().sum();
        let losses: u64 = matrix.wins.iter().map(|r| r[i]).sum();
        let ties: u64 = matrix.ties[i].iter().sum();
        t.push(vec![
            (rank + 1).to_string(),
            systems[i].clone(),
            format_real(bt.scores[i]),
            wins.to_string(),
            losses.to_string(),
            ties.to_string(),
        ]);
    }
    let mut notes = vec![format!("axes: {}", a.axes.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(", "))];
    if let Some(b) = bias.as_ref().and_then(|b| b.last()) {
        notes.push(format!(
            "position bias: second clip won {} of {} ({}), p = {}",
            b.second_wins,
            b.non_ties,
            format_real(b.proportion_second),
            format_real(b.p_value)
        ));
    }
    notes.push(format!(
        "agreement: {} of {} multi-vote items have a majority",
        agreement.agreeing, agreement.eligible
    ));
    for c in &correlations {
        notes.push(format!("{}: tau = {}  p = {}", c["metric"].as_str().unwrap_or(""), c["tau"], c["p_value"]));
    }
    Ok(Output {
        result: json!({
            "systems": systems,
            "bradley_terry": bt,
            "win_matrix": matrix.wins,
            "tie_matrix": matrix.ties,
            "win_rates": (0..systems.len()).map(|i| (0..systems.len()).map(|j| matrix.win_rate(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "pairwise_p": pairwise,
            "pairwise_test": "two-sided exact sign test (the Wilcoxon signed-rank test on ±1 outcomes)",
            "position_bias": bias,
            "agreement": agreement,
            "rank_correlations": correlations,
            "records": records.len(),
        }),
        table: t,
        notes,
    })
}

fn cmd_tau(a: &TauArgs) -> CmdResult {
    let tb = kendall_tau_b(&a.xs, &a.ys).map_err(|e| usage(e.to_string()))?;
    let p = tau_p_exact(&a.xs, &a.ys)?;
    let mut t = Table::new(["tau", "p_value", "p_method", "degenerate"]);
    let method = serde_json::to_value(p.method).expect("method serializes");
    t.push(vec![
        format_real(tb.tau),
        format_real(p.p),
        method.as_str().unwrap_or_default().to_string(),
        tb.degenerate.to_string(),
    ]);
    Ok(Output {
        result: json!({ "tau": tb.tau, "p_value": p.p, "p_method": method, "degenerate": tb.degenerate, "n": a.xs.len() }),
        table: t,
        notes: Vec::new(),
    })
}

fn config_of(cli: &Cli) -> Value {
    let v = match &cli.command {
        Command::Pool(a) => serde_json::to_value(a),
        Command::Fad(a) => serde_json::to_value(a),
        Command::Mmd(a) => serde_json::to_value(a),
        Command::Prdc(a) => serde_json::to_value(a),
        Command::Mad(a) => serde_json::to_value(a),
        Command::Metaeval(a) => serde_json::to_value(a),
        Command::Subsample(a) => serde_json::to_value(a),
        Command::DegradeNoise(a) => serde_json::to_value(a),
        Command::DegradeMidi(a) => serde_json::to_value(a),
        Command::BtRank(a) => serde_json::to_value(a),
        Command::Tau(a) => serde_json::to_value(a),
    };
    v.expect("arguments serialize")
}

fn run(cli: &Cli) -> CmdResult {
    let ctx = Ctx {
        timestamps: !cli.global.no_timestamp,
    };
    match &cli.command {
        Command::Pool(a) => cmd_pool(a),
        Command::Fad(a) => cmd_fad(a, &ctx),
        Command::Mmd(a) => cmd_mmd(a, &ctx),
        Command::Prdc(a) => cmd_prdc(a, &ctx),
        Command::Mad(a) => cmd_mad(a, &ctx),
        Command::Metaeval(a) => cmd_metaeval(a),
        Command::Subsample(a) => cmd_subsample(a),
        Command::DegradeNoise(a) => cmd_degrade_noise(a),
        Command::DegradeMidi(a) => cmd_degrade_midi(a),
        Command::BtRank(a) => cmd_bt_rank(a),
        Command::Tau(a) => cmd_tau(a),
    }
}

fn render(cli: &Cli, out: Output) -> String {
    match cli.global.format {
        Format::Json => {
            let mut report = json!({
                "command": cli.command.name(),
                "config": config_of(cli),
                "global": &cli.global,
                "result": out.result,
                "version": env!("CARGO_PKG_VERSION"),
            });
            if !cli.global.no_timestamp {
                let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                report["timestamp_unix"] = now.into();
            }
            canonical_json(&report)
        }
        Format::Csv => out.table.to_csv(),
        Format::Human => {
            let mut s = String::new();
            for n in &out.notes {
                s.push_str(n);
                s.push('\n');
            }
            if !out.notes.is_empty() {
                s.push('\n');
            }
            s.push_str(&out.table.to_human());
            s
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(out) => {
            print!("{}", render(&cli, out));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
