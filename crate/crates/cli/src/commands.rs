use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hybridlv::analytic::{bshw_call, CallValue};
use hybridlv::calibration::{calibrate, corrective_terms, price_calls_from_pz, CallSurface, Provider};
use hybridlv::export::{corrective_terms_csv, estimates_csv, field_csv, fmt17, prices_csv, surface_csv};
use hybridlv::monte_carlo::price_calls;
use hybridlv::pde::{evolve, Evolution, Field2D};
use hybridlv::HybridModel;

use crate::config::{lattice, read_table, Config, Resolved};
use crate::{CliError, Common};

struct Run {
    cfg: Resolved,
    command: &'static str,
    out: PathBuf,
    written: Vec<PathBuf>,
}

impl Run {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn header(&self) -> Vec<String> {
        self.cfg.header(self.command)
    }

    /// `stem.csv` for a single maturity, `stem_T<T>.csv` otherwise.
    fn per_maturity(&self, stem: &str, t: f64) -> String {
        if self.cfg.config.run.maturities.len() == 1 {
            format!("{stem}.csv")
        } else {
            format!("{stem}_T{t}.csv")
        }
    }
}

pub fn run(command: &'static str, common: &Common) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", common.config.display())))?;
    let mut config = Config::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = config.resolve(&base)?;

    println!("# resolved configuration, sha256 {}", cfg.hash);
    print!("{}", cfg.text);
    println!();

    fs::create_dir_all(&common.out).map_err(|e| CliError::Io(format!("{}: {e}", common.out.display())))?;
    let mut run = Run {
        cfg,
        command,
        out: common.out.clone(),
        written: Vec::new(),
    };
    let echo = format!("# sha256 {}\n{}", run.cfg.hash, run.cfg.text);
    run.write("resolved_config.toml", &echo)?;

    match command {
        "solve-pde" => solve_pde(&mut run)?,
        "price-pde" => price_pde(&mut run)?,
        "price-analytic" => price_analytic(&mut run)?,
        "price-mc" => price_mc(&mut run)?,
        "corrective-terms" => corrective(&mut run)?,
        "calibrate" => calibrate_surface(&mut run)?,
        "compare" => compare(&mut run)?,
        other => unreachable!("unknown command {other}"),
    }
    for p in &run.written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn solve_to(run: &Run, m: &HybridModel, horizon: f64, snapshots: &[f64]) -> Result<Evolution, CliError> {
    let grid = run.cfg.grid_spec().build(m, horizon)?;
    let ev = evolve(m, &grid, &run.cfg.evolve_options(), snapshots)?;
    for w in &ev.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ev)
}

fn solve_pde(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let snaps = run.cfg.config.run.snapshots.clone();
    let horizon = *snaps.last().expect("resolved snapshots are non-empty");
    let ev = solve_to(run, &m, horizon, &snaps)?;
    let fields: Vec<(f64, &Field2D)> = ev.snapshots.iter().map(|(t, f)| (*t, f)).collect();
    let g = ev.snapshots[0].1.grid();
    let mut head = run.header();
    head.push(format!(
        "grid n_s={} n_r={} n_t={} s=[{}, {}] r=[{}, {}] start_step={}",
        g.n_s, g.n_r, g.n_t, g.s_min, g.s_max, g.r_min, g.r_max, ev.start_step
    ));
    let body = field_csv(&head, &fields);
    run.write("field.csv", &body)?;

    let mut mass = String::new();
    for c in run.header() {
        let _ = writeln!(mass, "# {c}");
    }
    mass.push_str("step,t,raw_mass,zc,ratio,mass,negative_fraction,negative_mass\n");
    for d in &ev.diagnostics {
        let _ = writeln!(
            mass,
            "{},{},{},{},{},{},{},{}",
            d.step,
            fmt17(d.t),
            fmt17(d.raw_mass),
            fmt17(d.zc),
            fmt17(d.ratio),
            fmt17(d.mass),
            fmt17(d.negative.fraction),
            fmt17(d.negative.mass)
        );
    }
    run.write("mass.csv", &mass)?;
    println!(
        "steps={} max_drift={:.3e} max_negative_mass={:.3e}",
        ev.diagnostics.len(),
        ev.max_drift(),
        ev.max_negative_mass()
    );
    Ok(())
}

fn price_pde(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let ks = run.cfg.config.run.strikes.clone();
    for t in run.cfg.config.run.maturities.clone() {
        let ev = solve_to(run, &m, t, &[t])?;
        let prices = price_calls_from_pz(ev.last().expect("one snapshot"), &ks)?;
        let body = prices_csv(&run.header(), &ks, &prices, None);
        let name = run.per_maturity("prices_pde", t);
        run.write(&name, &body)?;
        println!("T={t}: max_drift={:.3e}", ev.max_drift());
    }
    Ok(())
}

fn price_analytic(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let ks = run.cfg.config.run.strikes.clone();
    let mut greeks = String::new();
    for c in run.header() {
        let _ = writeln!(greeks, "# {c}");
    }
    greeks.push_str("T,K,price,c_t,c_k,c_kk,d1,d2\n");
    for t in run.cfg.config.run.maturities.clone() {
        let mut prices = Vec::with_capacity(ks.len());
        for &k in &ks {
            let v = bshw_call(&m, t, k)?;
            prices.push(v.price());
            let row = match v {
                CallValue::Regular(g) => [g.price, g.c_t, g.c_k, g.c_kk, g.d1, g.d2].map(fmt17).join(","),
                CallValue::Intrinsic { price } => format!("{},nan,nan,nan,nan,nan", fmt17(price)),
            };
            let _ = writeln!(greeks, "{},{},{row}", fmt17(t), fmt17(k));
        }
        let body = prices_csv(&run.header(), &ks, &prices, None);
        let name = run.per_maturity("prices_analytic", t);
        run.write(&name, &body)?;
    }
    run.write("greeks_analytic.csv", &greeks)
}

fn price_mc(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let ks = run.cfg.config.run.strikes.clone();
    let mc = run.cfg.mc();
    for t in run.cfg.config.run.maturities.clone() {
        let est = price_calls(&m, t, &ks, &mc)?;
        let mut head = run.header();
        head.push(format!("paths={} dt={} seed={}", mc.n_effective(), mc.dt, mc.seed));
        let body = estimates_csv(&head, &ks, &est);
        let name = run.per_maturity("prices_mc", t);
        run.write(&name, &body)?;
        let se = est.iter().map(|e| e.standard_error).fold(0.0, f64::max);
        println!("T={t}: max_se={se:.3e}");
    }
    Ok(())
}

fn corrective(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let ks = run.cfg.config.run.strikes.clone();
    let mut curves = Vec::new();
    for t in run.cfg.config.run.maturities.clone() {
        let ev = solve_to(run, &m, t, &[t])?;
        let curve = corrective_terms(ev.last().expect("one snapshot"), t, m.forward(t)?, &ks)?;
        let lo = curve.adj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = curve.adj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("T={t}: adj in [{lo:.4e}, {hi:.4e}]");
        curves.push(curve);
    }
    let body = corrective_terms_csv(&run.header(), &curves);
    run.write("corrective_terms.csv", &body)
}

fn market_surface(run: &Run, m: &HybridModel) -> Result<CallSurface, CliError> {
    let spec = &run.cfg.config.calibration.market;
    if spec == "analytic" {
        let r = &run.cfg.config.run;
        return Ok(CallSurface::analytic(m, r.maturities.clone(), r.strikes.clone())?);
    }
    let path = run.cfg.path(spec);
    let rows = read_table(&path, &["T", "K", "price"])?;
    let (ts, ks, prices) = lattice(&rows, &path.display().to_string())?;
    Ok(CallSurface::from_prices(ts, ks, prices, Provider::External)?)
}

fn calibrate_surface(run: &mut Run) -> Result<(), CliError> {
    let m = run.cfg.model()?;
    let market = market_surface(run, &m)?;
    let cal = calibrate(&market, &m, &run.cfg.calibration_settings())?;
    let head = run.header();
    run.write("local_vol.csv", &surface_csv(&head, &cal.surface))?;
    run.write("corrective_terms.csv", &corrective_terms_csv(&head, &cal.corrective_terms))?;
    let mut report = String::new();
    for c in &head {
        let _ = writeln!(report, "# {c}");
    }
    report.push_str(&cal.report.render());
    let lo = cal.surface.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cal.surface.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(report, "sigma range [{lo:.6}, {hi:.6}]");
    if let Some(s1) = m.constant_vol() {
        let worst = cal.surface.values().iter().map(|v| (v - s1).abs()).fold(0.0, f64::max);
        let _ = writeln!(report, "max |sigma - {s1}| = {worst:.3e}");
    }
    print!("{}", report.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));
    println!();
    run.write("calibration_report.txt", &report)
}

fn compare(run: &mut Run) -> Result<(), CliError> {
    let c = run.cfg.config.compare.clone();
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            run.out.join(p)
        }
    };
    let left = read_table(&resolve(&c.left), &["K", "price", "se"])?;
    let right = read_table(&resolve(&c.right), &["K", "price", "se"])?;
    let mut rows = Vec::new();
    for l in &left {
        if let Some(r) = right.iter().find(|r| r[0] == l[0]) {
            let diff = l[1] - r[1];
            let se = l[2].hypot(r[2]);
            let ok = diff.abs() <= c.tolerance.max(3.0 * se);
            rows.push((l[0], l[1], r[1], diff, se, ok));
        }
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{} and {} share no strikes", c.left, c.right)));
    }
    let max_abs = rows.iter().map(|r| r.3.abs()).fold(0.0, f64::max);
    let mean_abs = rows.iter().map(|r| r.3.abs()).sum::<f64>() / rows.len() as f64;
    let failures = rows.iter().filter(|r| !r.5).count();
    let summary = format!(
        "rows={} max_abs_diff={} mean_abs_diff={} tolerance={} outside_tolerance={failures}",
        rows.len(),
        fmt17(max_abs),
        fmt17(mean_abs),
        c.tolerance
    );
    let mut body = String::new();
    for h in run.header() {
        let _ = writeln!(body, "# {h}");
    }
    let _ = writeln!(body, "# left={} right={}", c.left, c.right);
    let _ = writeln!(body, "# {summary}");
    body.push_str("K,left,right,diff,se,within_tolerance\n");
    for (k, l, r, d, se, ok) in &rows {
        let _ = writeln!(body, "{},{},{},{},{},{ok}", fmt17(*k), fmt17(*l), fmt17(*r), fmt17(*d), fmt17(*se));
    }
    println!("{summary}");
    run.write("compare.csv", &body)
}
