//! Command-line driver for the verification suites.
//!
//! Every command assembles a deterministic JSON report (and, with `--out`,
//! CSV artifacts) from the same checks the library tests run.  Identical
//! effective parameters produce byte-identical reports: seeds are fixed,
//! records are sorted by name, and wall-clock timing goes to stderr only.
//!
//! Exit codes are a stable contract: 0 all checks passed, 1 a verification
//! check failed, 2 usage or precondition error, 3 numeric breakdown inside
//! the pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ballrep_core::gamma;
use ballrep_core::hc::{
    ambient_basis, infinitesimal_action_basis, pminus_indices, verify_intertwining, zero_coupling,
};
use ballrep_core::kernel::{
    gram_from_kernel, graded_gram, pochhammer_norm_sq, probe_lambda_threshold, pushforward_gram,
    skew_adjoint_residual, domination_check, KernelForm, KernelFunction,
};
use ballrep_core::lie::StructureContext;
use ballrep_core::linalg;
use ballrep_core::poly::SectionSpace;
use ballrep_core::rep::{
    cjk_table, check_sharp, classify_chains, extract_cj, realize, validate, ConstantsTable,
    Direction, FiliformSpec, RepRealization, RepSpec,
};
use ballrep_core::report::{fnum, CheckRecord, Csv, Report, RunConfig};
use ballrep_core::{cd, suite, C, CMat, Error, Result};

// ---------------------------------------------------------------------------
// Argument surface.

#[derive(Parser)]
#[command(
    name = "ballrep",
    version,
    about = "Verification suites for homogeneous bundles over the complex unit ball"
)]
struct Cli {
    /// JSON run-configuration file; explicit flags override its parameters.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory receiving report.json and CSV artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Chain realizations: validation, classification, structure constants.
    Rep {
        #[command(subcommand)]
        cmd: RepCmd,
    },
    /// The block-unipotent intertwining operator.
    Gamma {
        #[command(subcommand)]
        cmd: GammaCmd,
    },
    /// Reproducing-kernel inner products.
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    /// Compressed multiplication pairs.
    Cd {
        #[command(subcommand)]
        cmd: CdCmd,
    },
    /// Run the full acceptance battery.
    Suite {
        /// Run a single criterion (1-12) instead of all of them.
        #[arg(long)]
        only: Option<String>,
    },
}

/// Flags shared by every command that realizes a single chain.
#[derive(Args, Default)]
struct ChainArgs {
    /// Rank of the ball (1 or 2).
    #[arg(long)]
    n: Option<String>,
    /// Step direction: up or down.
    #[arg(long)]
    dir: Option<String>,
    /// Symmetric power at the top level.
    #[arg(long)]
    k0: Option<String>,
    /// Number of steps.
    #[arg(long)]
    m: Option<String>,
    /// Weight on the center of the reductive part.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Comma-separated transition scalars, e.g. 1,1 or 1,0.5+0.5i.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
}

impl ChainArgs {
    fn apply(&self, p: &mut Params) {
        p.cli("n", &self.n);
        p.cli("dir", &self.dir);
        p.cli("k0", &self.k0);
        p.cli("m", &self.m);
        p.cli("lambda", &self.lambda);
        p.cli("y", &self.y);
    }
}

#[derive(Subcommand)]
enum RepCmd {
    /// Realize a chain and check equivariance, commutativity, and grading.
    Validate {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Enumerate all direction sequences and report which ones commute.
    Classify {
        #[arg(long)]
        k0: Option<String>,
        #[arg(long)]
        m: Option<String>,
    },
    /// Extract the step constants and the derived constants table.
    Constants {
        #[command(flatten)]
        chain: ChainArgs,
    },
}

#[derive(Subcommand)]
enum GammaCmd {
    /// Build the operator from the closed-form constants and verify it
    /// intertwines the graded and realized actions.
    Check {
        #[command(flatten)]
        chain: ChainArgs,
        /// Polynomial truncation degree.
        #[arg(long)]
        degree: Option<String>,
        /// Residual tolerance.
        #[arg(long)]
        tol: Option<String>,
    },
    /// Solve for the operator block by block and compare against the
    /// closed form.
    Solve {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        degree: Option<String>,
        #[arg(long)]
        tol: Option<String>,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Build a Gram matrix and compare scalar norms to the closed form.
    Gram {
        #[arg(long)]
        n: Option<String>,
        /// Symmetric power of the fiber.
        #[arg(long)]
        sym: Option<String>,
        /// Kernel exponent (the weight is n*nu/(n+1)).
        #[arg(long, allow_hyphen_values = true)]
        nu: Option<String>,
        #[arg(long)]
        max_degree: Option<String>,
        /// Kernel orientation: standard or action.
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Scan positivity of the action-orientation kernel along a weight grid.
    Threshold {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        sym: Option<String>,
        #[arg(long)]
        max_degree: Option<String>,
        /// Comma-separated weight grid.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Sample test for the domination constant of a stepped-down kernel.
    Domination {
        #[arg(long)]
        k0: Option<String>,
        #[arg(long)]
        dir: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        /// Candidate constants, comma-separated and ascending.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Number of sampled ball points.
        #[arg(long)]
        points: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Check that the pushforward Gram makes the realized action
    /// skew-adjoint.
    Unitarity {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        degree: Option<String>,
        #[arg(long)]
        tol: Option<String>,
    },
}

#[derive(Subcommand)]
enum CdCmd {
    /// Joint kernel dimension of the shifted multiplication adjoints.
    Kerneldim {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        sym: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        nu: Option<String>,
        #[arg(long)]
        max_degree: Option<String>,
        /// Interior point, comma-separated complex coordinates (e.g. 0,0 or
        /// 0.24,0.08i).  Omit to scan the radial grid 0,0.1,...,0.5.
        #[arg(long, allow_hyphen_values = true)]
        w: Option<String>,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Homogeneity of the pushforward pair under the realized action.
    Homogeneity {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        degree: Option<String>,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Degree-by-degree conditioning of the similarity between the graded
    /// and pushforward inner products.
    Similarity {
        #[command(flatten)]
        chain: ChainArgs,
        /// Inclusive degree range, e.g. 1..8.
        #[arg(long)]
        degrees: Option<String>,
    },
}

// ---------------------------------------------------------------------------
// Parameter resolution: defaults, then config file, then explicit flags.

struct Params {
    map: BTreeMap<String, String>,
}

fn bad(key: &str, val: &str, want: &str) -> Error {
    Error::Precondition(format!("parameter '{key}': cannot parse '{val}' as {want}"))
}

impl Params {
    fn new(defaults: &[(&str, &str)]) -> Self {
        Self {
            map: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    fn overlay(&mut self, cfg: Option<&RunConfig>, command: &str) -> Result<()> {
        let Some(cfg) = cfg else { return Ok(()) };
        if cfg.command != command {
            return Err(Error::Precondition(format!(
                "config file is for command '{}', not '{}'",
                cfg.command, command
            )));
        }
        for (k, v) in &cfg.params {
            if !self.map.contains_key(k) {
                return Err(Error::Precondition(format!(
                    "unknown parameter '{k}' in config file"
                )));
            }
            self.map.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    fn cli(&mut self, key: &str, v: &Option<String>) {
        if let Some(v) = v {
            self.map.insert(key.to_string(), v.clone());
        }
    }

    fn raw(&self, key: &str) -> &str {
        self.map.get(key).map(String::as_str).unwrap_or_default()
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key).parse().map_err(|_| bad(key, self.raw(key), "a number"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key).parse().map_err(|_| bad(key, self.raw(key), "a nonnegative integer"))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.raw(key).parse().map_err(|_| bad(key, self.raw(key), "a seed"))
    }

    fn dir(&self, key: &str) -> Result<Direction> {
        match self.raw(key).to_ascii_lowercase().as_str() {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            other => Err(bad(key, other, "'up' or 'down'")),
        }
    }

    fn form(&self, key: &str) -> Result<KernelForm> {
        match self.raw(key).to_ascii_lowercase().as_str() {
            "standard" => Ok(KernelForm::Standard),
            "action" => Ok(KernelForm::Action),
            other => Err(bad(key, other, "'standard' or 'action'")),
        }
    }

    fn cvec(&self, key: &str) -> Result<Vec<C>> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse::<C>().map_err(|_| bad(key, s, "a complex number")))
            .collect()
    }

    fn fvec(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(key, s, "a number")))
            .collect()
    }

    /// Inclusive integer range written `a..b`.
    fn range(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.raw(key);
        let (a, b) = raw
            .split_once("..")
            .ok_or_else(|| bad(key, raw, "a range like 1..8"))?;
        let a: usize = a.parse().map_err(|_| bad(key, raw, "a range like 1..8"))?;
        let b: usize = b.parse().map_err(|_| bad(key, raw, "a range like 1..8"))?;
        if a > b {
            return Err(bad(key, raw, "an ascending range"));
        }
        Ok((a..=b).collect())
    }

    fn into_config(self, command: &str) -> RunConfig {
        let mut cfg = RunConfig::new(command);
        for (k, v) in self.map {
            cfg.set(&k, v);
        }
        cfg
    }
}

fn chain_defaults() -> Vec<(&'static str, &'static str)> {
    vec![("n", "2"), ("dir", "up"), ("k0", "0"), ("m", "2"), ("lambda", "-3"), ("y", "1,1")]
}

/// Realizes the chain described by the shared parameters.
fn chain_spec(p: &Params) -> Result<RepSpec> {
    let n = p.usize("n")?;
    let m = p.usize("m")?;
    let y = p.cvec("y")?;
    if y.len() != m {
        return Err(Error::Precondition(format!(
            "expected {m} transition scalars, got {}",
            y.len()
        )));
    }
    Ok(RepSpec::Filiform(FiliformSpec {
        n,
        lambda0: p.f64("lambda")?,
        k0: p.usize("k0")?,
        m,
        direction: p.dir("dir")?,
        y,
    }))
}

/// Step constants, affine fit, and derived constants table for a realization.
fn constants_for(
    r: &RepRealization,
    ctx: &StructureContext,
    m: usize,
    lambda: f64,
    n: usize,
) -> Result<(Vec<C>, C, C, ConstantsTable)> {
    let cs: Vec<C> = (1..=m).map(|j| extract_cj(r, j, ctx)).collect::<Result<_>>()?;
    let (u, v) = check_sharp(&cs).ok_or_else(|| {
        Error::NumericBreakdown("step constants do not fit an affine progression".into())
    })?;
    let table = cjk_table(u, v, lambda, n, m);
    Ok((cs, u, v, table))
}

type Artifact = (String, String);

// ---------------------------------------------------------------------------
// rep commands.

fn cmd_rep_validate(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let ctx = StructureContext::new(p.usize("n")?)?;
    let mut rec = CheckRecord::new(
        "validate",
        "chain steps commute, intertwine the reductive action, and respect the grading",
    );
    match realize(&chain_spec(p)?) {
        Ok(r) => {
            let vr = validate(&r, &ctx)?;
            rec.value("equivariance_residual", vr.equivariance_residual);
            rec.value("commutativity_residual", vr.commutativity_residual);
            rec.value("skew_residual", vr.skew_residual);
            rec.check("grading", vr.grading_ok);
            rec.check("pass", vr.pass);
        }
        Err(Error::InadmissibleChain(msg)) => {
            rec.value_str("error", msg);
            rec.fail();
        }
        Err(e) => return Err(e),
    }
    Ok((vec![rec], vec![]))
}

fn cmd_rep_classify(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let k0 = p.usize("k0")?;
    let m = p.usize("m")?;
    let (valid, all) = classify_chains(k0, m);
    let as_word = |dirs: &[Direction]| -> String {
        dirs.iter().map(|d| if *d == Direction::Up { 'U' } else { 'D' }).collect()
    };
    let mut rec = CheckRecord::new(
        "classify",
        "exactly the monotone direction sequences realize commuting chains",
    );
    rec.input("k0", k0);
    rec.input("m", m);
    let mut words: Vec<String> = valid.iter().map(|d| as_word(d)).collect();
    words.sort();
    rec.value_str("valid_chains", words.join(" "));
    rec.value_str("num_candidates", all.len());
    let mut expected = vec!["U".repeat(m)];
    if m <= k0 {
        expected.push("D".repeat(m));
    }
    expected.sort();
    rec.check("matches_monotone_rule", words == expected);
    Ok((vec![rec], vec![]))
}

fn cmd_rep_constants(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let m = p.usize("m")?;
    let lambda = p.f64("lambda")?;
    let ctx = StructureContext::new(n)?;
    let r = realize(&chain_spec(p)?)?;
    let (cs, u, v, table) = constants_for(&r, &ctx, m, lambda, n)?;
    let mut rec = CheckRecord::new(
        "constants",
        "step constants fit c_j = u + (j-1) v; disc chains force u = v = 0",
    );
    rec.input("n", n);
    rec.input("m", m);
    for (j, c) in cs.iter().enumerate() {
        rec.value(&format!("c{}_re", j + 1), c.re);
        rec.value(&format!("c{}_im", j + 1), c.im);
    }
    rec.value("u_re", u.re);
    rec.value("u_im", u.im);
    rec.value("v_re", v.re);
    rec.value("v_im", v.im);
    rec.check("regular", table.regular);
    if !table.regular {
        rec.value_str("irregular_at", format!("{:?}", table.irregular_at));
    }
    if n == 1 {
        rec.check_le("u_norm", u.norm(), 1e-10);
        rec.check_le("v_norm", v.norm(), 1e-10);
    }
    let mut csv = Csv::new(&["j", "k", "value_re", "value_im"]);
    for j in 0..=m {
        for k in 0..=j {
            csv.row(vec![
                j.to_string(),
                k.to_string(),
                fnum(table.cjk[j][k].re),
                fnum(table.cjk[j][k].im),
            ]);
        }
    }
    Ok((vec![rec], vec![("constants.csv".into(), csv.render())]))
}

// ---------------------------------------------------------------------------
// gamma commands.

fn cmd_gamma_check(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let m = p.usize("m")?;
    let lambda = p.f64("lambda")?;
    let degree = p.usize("degree")?;
    let tol = p.f64("tol")?;
    let ctx = StructureContext::new(n)?;
    let basis = ambient_basis(&ctx);
    let y = p.cvec("y")?;
    if y.len() != m {
        return Err(Error::Precondition(format!(
            "expected {m} transition scalars, got {}",
            y.len()
        )));
    }

    let mut rec = CheckRecord::new(
        "intertwining",
        "the operator carries the graded action to the realized action on every basis direction",
    );
    rec.input("degree", degree);
    rec.input("basis_size", basis.len());

    if y.iter().all(|c| c.norm() == 0.0) {
        // All couplings zero: the bundle is a direct sum, the graded and
        // realized actions coincide, and the operator is the identity.
        let spec = RepSpec::Filiform(FiliformSpec {
            n,
            lambda0: lambda,
            k0: p.usize("k0")?,
            m,
            direction: p.dir("dir")?,
            y: vec![ballrep_core::one(); m],
        });
        let r0 = zero_coupling(&realize(&spec)?);
        let space = SectionSpace::new(n, degree, r0.dim());
        let g = gamma::GammaOperator {
            mat: CMat::identity(space.dim(), space.dim()),
            m,
            truncation_warning: degree < m,
        };
        let act0 = infinitesimal_action_basis(&r0, &ctx, &space, &basis)?;
        let resid = verify_intertwining(&g, &act0, &act0, &space);
        rec.value_str("coupling", "zero");
        rec.check_le("max_residual", resid, tol);
        return Ok((vec![rec], vec![]));
    }

    let r = realize(&chain_spec(p)?)?;
    let (_, _, _, table) = constants_for(&r, &ctx, m, lambda, n)?;
    if !table.regular {
        return Err(Error::Precondition(format!(
            "irregular constants at {:?}: choose a weight off the finite exceptional set",
            table.irregular_at
        )));
    }
    let space = SectionSpace::new(n, degree, r.dim());
    let g = gamma::build_gamma(&r, &ctx, &table, &space)?;
    let act0 = infinitesimal_action_basis(&zero_coupling(&r), &ctx, &space, &basis)?;
    let acty = infinitesimal_action_basis(&r, &ctx, &space, &basis)?;
    rec.value_str("truncation_warning", g.truncation_warning);
    rec.check_le("max_residual", verify_intertwining(&g, &act0, &acty, &space), tol);
    Ok((vec![rec], vec![]))
}

fn cmd_gamma_solve(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let m = p.usize("m")?;
    let lambda = p.f64("lambda")?;
    let degree = p.usize("degree")?;
    let tol = p.f64("tol")?;
    let ctx = StructureContext::new(n)?;
    let basis = ambient_basis(&ctx);
    let r = realize(&chain_spec(p)?)?;
    let space = SectionSpace::new(n, degree, r.dim());
    let act0 = infinitesimal_action_basis(&zero_coupling(&r), &ctx, &space, &basis)?;
    let acty = infinitesimal_action_basis(&r, &ctx, &space, &basis)?;
    let pi0 = |i: usize| -> Result<CMat> { Ok(act0.ops[i].mat.clone()) };
    let piy = |i: usize| -> Result<CMat> { Ok(acty.ops[i].mat.clone()) };
    let sol =
        gamma::solve_block_gamma(&r, &ctx, &space, &pi0, &piy, basis.len(), &pminus_indices(&ctx))?;

    let mut rec = CheckRecord::new(
        "block_solve",
        "the block-unipotent intertwiner exists, is unique, and matches the closed form",
    );
    rec.input("degree", degree);
    rec.value_str("paths", sol.paths.len());
    rec.value_str("nullity", sol.nullity);
    rec.check("unique_solution", sol.nullity == 0);
    rec.check_le("solve_residual", sol.residual, tol);
    rec.check_le("full_basis_residual", sol.full_basis_residual, tol);
    let (_, _, _, table) = constants_for(&r, &ctx, m, lambda, n)?;
    if table.regular {
        let closed = gamma::build_gamma(&r, &ctx, &table, &space)?;
        rec.check_le(
            "closed_form_gap",
            linalg::max_abs(&(&sol.gamma.mat - &closed.mat)),
            1e-6,
        );
    } else {
        rec.value_str("closed_form_gap", "skipped: constants table irregular");
    }
    Ok((vec![rec], vec![]))
}

// ---------------------------------------------------------------------------
// kernel commands.

fn cmd_kernel_gram(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let sym = p.usize("sym")?;
    let nu = p.f64("nu")?;
    let max_degree = p.usize("max_degree")?;
    let form = p.form("form")?;
    let tol = p.f64("tol")?;
    let lambda = n as f64 * nu / (n as f64 + 1.0);
    let kf = KernelFunction::new(n, sym, lambda, form)?;
    let space = SectionSpace::new(n, max_degree, kf.fiber_dim());
    let gram = gram_from_kernel(&kf, &space)?;

    let mut rec = CheckRecord::new("gram", "kernel coefficient blocks are positive definite");
    rec.input("n", n);
    rec.input("sym", sym);
    rec.input("nu", fnum(nu));
    rec.input("max_degree", max_degree);
    for (d, eig) in gram.block_min_eigs.iter().enumerate() {
        rec.value(&format!("block_min_eig_degree_{d}"), *eig);
    }
    match gram.failing_degree {
        Some(d) => {
            rec.value_str("failing_degree", d);
        }
        None => {
            rec.value_str("failing_degree", "none");
        }
    }
    rec.check("positive_definite", gram.positive());
    let mut records = vec![rec];

    if sym == 0 && matches!(form, KernelForm::Standard) {
        let mut closed = CheckRecord::new(
            "closed_form_norms",
            "monomial norms match alpha!/(nu)_|alpha| with zero off-diagonal inner products",
        );
        let mut rel = 0.0f64;
        let mut off = 0.0f64;
        for a in 0..space.dim() {
            for b in 0..space.dim() {
                let got = gram.mat[(a, b)];
                if a == b {
                    let want = pochhammer_norm_sq(kf.nu(), space.monomial(a));
                    rel = rel.max((got.re - want).abs() / want.abs());
                    rel = rel.max(got.im.abs() / want.abs());
                } else {
                    off = off.max(got.norm());
                }
            }
        }
        closed.check_le("max_relative_error", rel, tol);
        closed.check_le("max_off_diagonal", off, 1e-12);
        records.push(closed);
    }
    Ok((records, vec![]))
}

fn cmd_kernel_threshold(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let sym = p.usize("sym")?;
    let max_degree = p.usize("max_degree")?;
    let grid = p.fvec("grid")?;
    let scan = probe_lambda_threshold(n, sym, &grid, max_degree)?;

    let mut rec = CheckRecord::new(
        "threshold",
        "positivity of the action-orientation kernel is monotone along the weight grid",
    );
    rec.input("n", n);
    rec.input("sym", sym);
    rec.input("max_degree", max_degree);
    rec.input("grid", p.raw("grid"));
    rec.check("monotone", scan.monotone);
    match scan.bracket {
        Some((lo, hi)) => {
            rec.value("bracket_lo", lo);
            rec.value("bracket_hi", hi);
        }
        None => {
            rec.value_str("bracket", "none");
        }
    }
    for pt in &scan.points {
        rec.value_str(
            &format!("positive_at_{}", fnum(pt.lambda)),
            pt.positive,
        );
    }

    let mut csv = Csv::new(&["lambda", "degree", "min_eig", "verdict"]);
    for pt in &scan.points {
        for (d, eig) in pt.degree_min_eigs.iter().enumerate() {
            let verdict = if *eig > -1e-10 { "pass" } else { "fail" };
            csv.row(vec![fnum(pt.lambda), d.to_string(), fnum(*eig), verdict.into()]);
        }
    }
    Ok((vec![rec], vec![("threshold.csv".into(), csv.render())]))
}

fn cmd_kernel_domination(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let ctx = StructureContext::new(2)?;
    let grid = p.fvec("grid")?;
    let scan = domination_check(
        &ctx,
        p.usize("k0")?,
        p.dir("dir")?,
        p.f64("lambda")?,
        &grid,
        p.usize("points")?,
        p.u64("seed")?,
    )?;
    let mut rec = CheckRecord::new(
        "domination",
        "a finite multiple of the one-step kernel dominates the stepped-down difference",
    );
    rec.input("k0", p.raw("k0"));
    rec.input("dir", p.raw("dir"));
    rec.input("lambda", p.raw("lambda"));
    rec.input("points", p.raw("points"));
    rec.input("seed", p.raw("seed"));
    for (c, eig) in &scan.min_eigs {
        rec.value(&format!("min_eig_at_c_{}", fnum(*c)), *eig);
    }
    match scan.minimal_c {
        Some(c) => {
            rec.value("minimal_c", c);
        }
        None => {
            rec.value_str("minimal_c", "none");
            rec.fail();
        }
    }
    rec.value("zero_c_min_eig", scan.zero_c_min_eig);
    rec.check("zero_c_fails", scan.zero_c_min_eig < -1e-10);
    Ok((vec![rec], vec![]))
}

/// Shared pipeline: graded Gram in the action orientation, closed-form
/// operator, pushforward inner product.
fn pushforward_pipeline(
    p: &Params,
    degree: usize,
) -> Result<(
    RepRealization,
    StructureContext,
    SectionSpace,
    ballrep_core::kernel::GramMatrix,
    ballrep_core::kernel::GramMatrix,
)> {
    let n = p.usize("n")?;
    let m = p.usize("m")?;
    let lambda = p.f64("lambda")?;
    let ctx = StructureContext::new(n)?;
    let r = realize(&chain_spec(p)?)?;
    let space = SectionSpace::new(n, degree, r.dim());
    let g0 = graded_gram(&r, &space, KernelForm::Action)?;
    g0.ensure_positive()?;
    let (_, _, _, table) = constants_for(&r, &ctx, m, lambda, n)?;
    if !table.regular {
        return Err(Error::Precondition(format!(
            "irregular constants at {:?}: choose a weight off the finite exceptional set",
            table.irregular_at
        )));
    }
    let g = gamma::build_gamma(&r, &ctx, &table, &space)?;
    let gy = pushforward_gram(&g0, &g)?;
    Ok((r, ctx, space, g0, gy))
}

fn cmd_kernel_unitarity(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let degree = p.usize("degree")?;
    let tol = p.f64("tol")?;
    let (r, ctx, space, g0, gy) = pushforward_pipeline(p, degree)?;
    let ops = infinitesimal_action_basis(&r, &ctx, &space, &ctx.real_form_basis())?;
    let mut rec = CheckRecord::new(
        "unitarity",
        "the pushforward Gram makes every real-form generator skew-adjoint",
    );
    rec.input("degree", degree);
    rec.value("unpushed_residual", skew_adjoint_residual(&g0, &ops.ops, &space));
    rec.check_le("max_residual", skew_adjoint_residual(&gy, &ops.ops, &space), tol);
    Ok((vec![rec], vec![]))
}

// ---------------------------------------------------------------------------
// cd commands.

fn cmd_cd_kerneldim(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let n = p.usize("n")?;
    let sym = p.usize("sym")?;
    let nu = p.f64("nu")?;
    let max_degree = p.usize("max_degree")?;
    let tol = p.f64("tol")?;
    let lambda = n as f64 * nu / (n as f64 + 1.0);
    let kf = KernelFunction::new(n, sym, lambda, KernelForm::Standard)?;
    let space = SectionSpace::new(n, max_degree, kf.fiber_dim());
    let pair = cd::build_pair(&gram_from_kernel(&kf, &space)?, &space)?;

    let mut rec = CheckRecord::new(
        "joint_kernel",
        "the joint kernel of the shifted adjoints has the fiber dimension",
    );
    rec.input("n", n);
    rec.input("sym", sym);
    rec.input("nu", fnum(nu));
    rec.input("max_degree", max_degree);
    rec.input("tol", fnum(tol));
    let mut csv = Csv::new(&["radius", "dim", "certified", "gap_ratio"]);

    let points: Vec<Vec<C>> = if p.raw("w").is_empty() {
        // Radial scan along a fixed interior direction.
        let dir: Vec<C> = if n == 1 {
            vec![ballrep_core::one()]
        } else {
            vec![C::new(0.8, 0.0), C::new(0.0, 0.6)]
        };
        (0..=5)
            .map(|k| dir.iter().map(|e| e * ballrep_core::re(0.1 * k as f64)).collect())
            .collect()
    } else {
        vec![p.cvec("w")?]
    };
    let mut dims = Vec::new();
    let mut all_certified = true;
    for w in &points {
        let radius = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let repo = cd::joint_kernel_dim(&pair, w, tol)?;
        csv.row(vec![
            fnum(radius),
            repo.dim.to_string(),
            repo.certified.to_string(),
            fnum(repo.gap_ratio),
        ]);
        rec.value_str(&format!("dim_at_radius_{}", fnum(radius)), repo.dim);
        dims.push(repo.dim);
        all_certified &= repo.certified;
    }
    rec.check("dim_matches_fiber", dims.iter().all(|&d| d == kf.fiber_dim()));
    if !all_certified {
        rec.value_str("note", "some counts rely on a sub-certification spectral gap");
        rec.mark_marginal();
    }
    Ok((vec![rec], vec![("kerneldim.csv".into(), csv.render())]))
}

fn cmd_cd_homogeneity(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let degree = p.usize("degree")?;
    let tol = p.f64("tol")?;
    let (r, ctx, space, _, gy) = pushforward_pipeline(p, degree)?;
    let pair = cd::build_pair(&gy, &space)?;
    let rep = cd::homogeneity_check(&pair, &r, &ctx, &space)?;
    let mut rec = CheckRecord::new(
        "homogeneity",
        "the realized generators act skew-adjointly and transform the pair homogeneously",
    );
    rec.input("degree", degree);
    rec.check_le("skew_residual", rep.skew_residual, tol);
    rec.check_le("commutation_residual", rep.commutation_residual, tol);
    rec.value("euler_residual", rep.euler_residual);
    rec.value("pplus_residual", rep.pplus_residual);
    for (i, (skew, comm)) in rep.per_generator.iter().enumerate() {
        rec.value(&format!("generator_{i}_skew"), *skew);
        rec.value(&format!("generator_{i}_commutation"), *comm);
    }
    Ok((vec![rec], vec![]))
}

fn cmd_cd_similarity(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let degrees = p.range("degrees")?;
    let max_degree = *degrees.last().unwrap();
    let (_, _, space, g0, gy) = pushforward_pipeline(p, max_degree)?;
    let rep = cd::similarity_check(&g0, &gy, &space, &degrees)?;
    let mut rec = CheckRecord::new(
        "similarity",
        "the identity map between the graded and pushforward inner products stays bounded",
    );
    rec.input("degrees", p.raw("degrees"));
    let mut csv = Csv::new(&["degree", "condition_number"]);
    for (d, c) in degrees.iter().zip(&rep.condition_numbers) {
        rec.value(&format!("condition_degree_{d}"), *c);
        csv.row(vec![d.to_string(), fnum(*c)]);
    }
    rec.value("max_over_min_ratio", rep.spread);
    rec.value("norm_ratio", rep.norm_ratio);
    rec.check("all_finite", rep.condition_numbers.iter().all(|c| c.is_finite()));
    rec.value("intertwining_residual", rep.intertwining_residual);
    rec.check("intertwining_exact", rep.intertwining_residual == 0.0);
    Ok((vec![rec], vec![("similarity.csv".into(), csv.render())]))
}

// ---------------------------------------------------------------------------
// Suite driver and report emission.

fn cmd_suite(p: &Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)> {
    let only = p.raw("only");
    let outcomes = if only == "all" {
        suite::run_all()?
    } else {
        let n: usize =
            only.parse().map_err(|_| bad("only", only, "a criterion number (1-12)"))?;
        vec![suite::run(n)?]
    };
    let mut records = Vec::new();
    for outcome in outcomes {
        println!(
            "criterion {:02} {}: {}",
            outcome.number,
            outcome.name,
            if outcome.passed { "PASS" } else { "FAIL" }
        );
        records.extend(outcome.records);
    }
    Ok((records, vec![]))
}

fn dispatch(
    command: &str,
    defaults: Vec<(&str, &str)>,
    cfg: Option<&RunConfig>,
    apply: impl FnOnce(&mut Params),
    run: impl FnOnce(&Params) -> Result<(Vec<CheckRecord>, Vec<Artifact>)>,
    out: Option<&PathBuf>,
) -> Result<i32> {
    let mut p = Params::new(&defaults);
    p.overlay(cfg, command)?;
    apply(&mut p);
    let (records, artifacts) = run(&p)?;
    let mut report = Report::new(p.into_config(command));
    report.extend(records);
    report.finalize();
    let json = report.to_json();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), &json)?;
        for (name, content) in &artifacts {
            fs::write(dir.join(name), content)?;
        }
    } else {
        print!("{json}");
    }
    Ok(report.exit_code())
}

fn run_cli(cli: Cli) -> Result<i32> {
    let cfg: Option<RunConfig> = match &cli.config {
        Some(path) => Some(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => None,
    };
    let cfg = cfg.as_ref();
    let out = cli.out.as_ref();

    match cli.cmd {
        Cmd::Rep { cmd } => match cmd {
            RepCmd::Validate { chain } => {
                let mut d = chain_defaults();
                d.retain(|(k, _)| *k != "lambda");
                d.push(("lambda", "2.5"));
                dispatch("rep validate", d, cfg, |p| chain.apply(p), cmd_rep_validate, out)
            }
            RepCmd::Classify { k0, m } => dispatch(
                "rep classify",
                vec![("k0", "3"), ("m", "2")],
                cfg,
                |p| {
                    p.cli("k0", &k0);
                    p.cli("m", &m);
                },
                cmd_rep_classify,
                out,
            ),
            RepCmd::Constants { chain } => {
                let mut d = chain_defaults();
                d.retain(|(k, _)| *k != "lambda" && *k != "m" && *k != "y");
                d.extend([("lambda", "0.7"), ("m", "3"), ("y", "1,1,1")]);
                dispatch("rep constants", d, cfg, |p| chain.apply(p), cmd_rep_constants, out)
            }
        },
        Cmd::Gamma { cmd } => match cmd {
            GammaCmd::Check { chain, degree, tol } => {
                let mut d = chain_defaults();
                d.extend([("degree", "5"), ("tol", "1e-8")]);
                dispatch(
                    "gamma check",
                    d,
                    cfg,
                    |p| {
                        chain.apply(p);
                        p.cli("degree", &degree);
                        p.cli("tol", &tol);
                    },
                    cmd_gamma_check,
                    out,
                )
            }
            GammaCmd::Solve { chain, degree, tol } => {
                let mut d = chain_defaults();
                d.extend([("degree", "5"), ("tol", "1e-8")]);
                dispatch(
                    "gamma solve",
                    d,
                    cfg,
                    |p| {
                        chain.apply(p);
                        p.cli("degree", &degree);
                        p.cli("tol", &tol);
                    },
                    cmd_gamma_solve,
                    out,
                )
            }
        },
        Cmd::Kernel { cmd } => match cmd {
            KernelCmd::Gram { n, sym, nu, max_degree, form, tol } => dispatch(
                "kernel gram",
                vec![
                    ("n", "2"),
                    ("sym", "0"),
                    ("nu", "3"),
                    ("max_degree", "8"),
                    ("form", "standard"),
                    ("tol", "1e-10"),
                ],
                cfg,
                |p| {
                    p.cli("n", &n);
                    p.cli("sym", &sym);
                    p.cli("nu", &nu);
                    p.cli("max_degree", &max_degree);
                    p.cli("form", &form);
                    p.cli("tol", &tol);
                },
                cmd_kernel_gram,
                out,
            ),
            KernelCmd::Threshold { n, sym, max_degree, grid } => dispatch(
                "kernel threshold",
                vec![
                    ("n", "2"),
                    ("sym", "0"),
                    ("max_degree", "6"),
                    ("grid", "-5,-3,-1,-0.4,0.4,1,2"),
                ],
                cfg,
                |p| {
                    p.cli("n", &n);
                    p.cli("sym", &sym);
                    p.cli("max_degree", &max_degree);
                    p.cli("grid", &grid);
                },
                cmd_kernel_threshold,
                out,
            ),
            KernelCmd::Domination { k0, dir, lambda, grid, points, seed } => dispatch(
                "kernel domination",
                vec![
                    ("k0", "0"),
                    ("dir", "up"),
                    ("lambda", "-3"),
                    ("grid", "0.25,0.5,1,2,4,8,16"),
                    ("points", "20"),
                    ("seed", "7"),
                ],
                cfg,
                |p| {
                    p.cli("k0", &k0);
                    p.cli("dir", &dir);
                    p.cli("lambda", &lambda);
                    p.cli("grid", &grid);
                    p.cli("points", &points);
                    p.cli("seed", &seed);
                },
                cmd_kernel_domination,
                out,
            ),
            KernelCmd::Unitarity { chain, degree, tol } => {
                let mut d = chain_defaults();
                d.extend([("degree", "6"), ("tol", "1e-8")]);
                dispatch(
                    "kernel unitarity",
                    d,
                    cfg,
                    |p| {
                        chain.apply(p);
                        p.cli("degree", &degree);
                        p.cli("tol", &tol);
                    },
                    cmd_kernel_unitarity,
                    out,
                )
            }
        },
        Cmd::Cd { cmd } => match cmd {
            CdCmd::Kerneldim { n, sym, nu, max_degree, w, tol } => dispatch(
                "cd kerneldim",
                vec![
                    ("n", "2"),
                    ("sym", "0"),
                    ("nu", "3"),
                    ("max_degree", "8"),
                    ("w", ""),
                    ("tol", "1e-6"),
                ],
                cfg,
                |p| {
                    p.cli("n", &n);
                    p.cli("sym", &sym);
                    p.cli("nu", &nu);
                    p.cli("max_degree", &max_degree);
                    p.cli("w", &w);
                    p.cli("tol", &tol);
                },
                cmd_cd_kerneldim,
                out,
            ),
            CdCmd::Homogeneity { chain, degree, tol } => {
                let mut d = chain_defaults();
                d.extend([("degree", "4"), ("tol", "1e-8")]);
                dispatch(
                    "cd homogeneity",
                    d,
                    cfg,
                    |p| {
                        chain.apply(p);
                        p.cli("degree", &degree);
                        p.cli("tol", &tol);
                    },
                    cmd_cd_homogeneity,
                    out,
                )
            }
            CdCmd::Similarity { chain, degrees } => {
                let mut d = chain_defaults();
                d.push(("degrees", "1..8"));
                dispatch(
                    "cd similarity",
                    d,
                    cfg,
                    |p| {
                        chain.apply(p);
                        p.cli("degrees", &degrees);
                    },
                    cmd_cd_similarity,
                    out,
                )
            }
        },
        Cmd::Suite { only } => dispatch(
            "suite",
            vec![("only", "all")],
            cfg,
            |p| p.cli("only", &only),
            cmd_suite,
            out,
        ),
    }
}

fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericBreakdown(_)
        | Error::IndefiniteGram { .. }
        | Error::SingularGram { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let t0 = Instant::now();
    let cli = Cli::parse();
    let code = match run_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    };
    eprintln!("wall time: {:.3}s", t0.elapsed().as_secs_f64());
    std::process::exit(code);
}
