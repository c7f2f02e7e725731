use std::fmt;
use std::path::PathBuf;

use crate::galerkin::{Alpha, DiffusionModel, TimeProfile};
use crate::stepper::{InnerSolver, Method};

/// Experiments the runner can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    HeatDiagonal,
    Anisotropic,
    ConvergenceH,
    ConvergenceRank,
    Equivalence,
    EnergyAudit,
    GeometrySuites,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::HeatDiagonal,
        Experiment::Anisotropic,
        Experiment::ConvergenceH,
        Experiment::ConvergenceRank,
        Experiment::Equivalence,
        Experiment::EnergyAudit,
        Experiment::GeometrySuites,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::HeatDiagonal => "heat-diagonal",
            Experiment::Anisotropic => "anisotropic",
            Experiment::ConvergenceH => "convergence-h",
            Experiment::ConvergenceRank => "convergence-rank",
            Experiment::Equivalence => "equivalence",
            Experiment::EnergyAudit => "energy-audit",
            Experiment::GeometrySuites => "geometry-suites",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Diffusion coefficient as written in the `[alpha]` section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Constant {
        a11: f64,
        a12: f64,
        a22: f64,
    },
    /// `R(omega t)^T diag(lambda1, lambda2) R(omega t)`
    Rotation {
        lambda1: f64,
        lambda2: f64,
        omega: f64,
    },
}

impl AlphaSpec {
    pub fn model(&self) -> crate::Result<DiffusionModel> {
        match *self {
            AlphaSpec::Constant { a11, a12, a22 } => DiffusionModel::constant(Alpha::new(a11, a12, a22)),
            AlphaSpec::Rotation {
                lambda1,
                lambda2,
                omega,
            } => DiffusionModel::rotation(lambda1, lambda2, omega),
        }
    }
}

/// One source term `profile(t) e_p e_q^T` in the `[source]` section, with
/// 1-based mode indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTermSpec {
    pub profile: TimeProfile,
    pub p: usize,
    pub q: usize,
}

/// Initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSpec {
    /// `sum_{k <= r} e_k e_k^T`, the first `r` diagonal modes with unit weight.
    Modes,
    /// Random rank-`r` state drawn from the run seed.
    Random,
}

impl InitialSpec {
    fn name(&self) -> &'static str {
        match self {
            InitialSpec::Modes => "modes",
            InitialSpec::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub r: usize,
    pub t_final: f64,
    pub n_steps: usize,
    pub method: Method,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub initial: InitialSpec,
    /// Trials per randomized suite.
    pub trials: usize,
    /// Step halvings of `convergence-h`.
    pub levels: usize,
    /// Relative floor `sigma_r / sigma_1` of the maximal-time monitor.
    pub rank_floor: f64,
    /// Final-time error bound of `heat-diagonal` against the exact solution.
    pub error_tol: f64,
    /// Also write a gnuplot script.
    pub plot: bool,
    /// Inner linear solver of every step.
    pub solver: InnerSolver,
    /// Iteration cap of the conjugate gradient inner solver.
    pub cg_max_iter: usize,
    pub alpha: AlphaSpec,
    pub source: Vec<SourceTermSpec>,
}

impl RunConfig {
    /// Preset of an experiment; a config file only overrides what it names.
    pub fn preset(experiment: Experiment) -> Self {
        let identity = AlphaSpec::Constant {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        };
        let rotation = AlphaSpec::Rotation {
            lambda1: 1.0,
            lambda2: 0.1,
            omega: 1.0,
        };
        let base = RunConfig {
            experiment,
            n: 32,
            r: 2,
            t_final: 0.1,
            n_steps: 100,
            method: Method::Als,
            seed: 0,
            output_dir: PathBuf::from("out"),
            initial: InitialSpec::Modes,
            trials: 50,
            levels: 5,
            rank_floor: 1e-12,
            error_tol: 5e-3,
            plot: false,
            solver: InnerSolver::Auto,
            cg_max_iter: 5000,
            alpha: identity,
            source: Vec::new(),
        };
        match experiment {
            Experiment::HeatDiagonal | Experiment::Equivalence => base,
            Experiment::ConvergenceH => RunConfig { n_steps: 10, ..base },
            Experiment::Anisotropic => RunConfig {
                n: 16,
                r: 3,
                t_final: 0.5,
                n_steps: 200,
                alpha: rotation,
                source: vec![SourceTermSpec {
                    profile: TimeProfile::Cosine { c: 1.0, omega: 2.0 },
                    p: 1,
                    q: 2,
                }],
                ..base
            },
            Experiment::EnergyAudit => RunConfig {
                n: 16,
                r: 3,
                t_final: 0.5,
                n_steps: 200,
                alpha: rotation,
                ..base
            },
            Experiment::ConvergenceRank => RunConfig {
                n: 16,
                r: 4,
                n_steps: 50,
                alpha: rotation,
                initial: InitialSpec::Random,
                ..base
            },
            Experiment::GeometrySuites => RunConfig {
                n: 16,
                r: 3,
                trials: 1000,
                alpha: rotation,
                ..base
            },
        }
    }

    /// Canonical text form; every field is written, so parsing it back gives
    /// an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("experiment", self.experiment.name().into());
        line("N", self.n.to_string());
        line("r", self.r.to_string());
        line("T", format!("{:?}", self.t_final));
        line("n_steps", self.n_steps.to_string());
        line("method", self.method.name().into());
        line("seed", self.seed.to_string());
        line("output_dir", self.output_dir.display().to_string());
        line("initial", self.initial.name().into());
        line("trials", self.trials.to_string());
        line("levels", self.levels.to_string());
        line("rank_floor", format!("{:?}", self.rank_floor));
        line("error_tol", format!("{:?}", self.error_tol));
        line("plot", self.plot.to_string());
        line("solver", solver_name(self.solver).into());
        line("cg_max_iter", self.cg_max_iter.to_string());
        s.push_str("\n[alpha]\n");
        match self.alpha {
            AlphaSpec::Constant { a11, a12, a22 } => {
                s.push_str(&format!(
                    "kind = constant\na11 = {a11:?}\na12 = {a12:?}\na22 = {a22:?}\n"
                ));
            }
            AlphaSpec::Rotation {
                lambda1,
                lambda2,
                omega,
            } => {
                s.push_str(&format!(
                    "kind = rotation\nlambda1 = {lambda1:?}\nlambda2 = {lambda2:?}\nomega = {omega:?}\n"
                ));
            }
        }
        s.push_str("\n[source]\n");
        for t in &self.source {
            let profile = match t.profile {
                TimeProfile::Constant(c) => format!("constant c={c:?}"),
                TimeProfile::Linear(c) => format!("linear c={c:?}"),
                TimeProfile::Cosine { c, omega } => format!("cosine c={c:?} omega={omega:?}"),
            };
            s.push_str(&format!("term = {profile} p={} q={}\n", t.p, t.q));
        }
        s
    }
}

fn solver_name(s: InnerSolver) -> &'static str {
    match s {
        InnerSolver::Auto => "auto",
        InnerSolver::Direct => "direct",
        InnerSolver::ConjugateGradient => "cg",
    }
}

/// Parse failure with the offending line (1-based) when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line: Some(line),
        message: message.into(),
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    Alpha,
    Source,
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

fn parse_num<T: std::str::FromStr>(e: &Entry) -> Result<T, ParseError> {
    e.value
        .parse()
        .or_else(|_| err(e.line, format!("invalid value `{}` for `{}`", e.value, e.key)))
}

fn parse_float(e: &Entry) -> Result<f64, ParseError> {
    let v: f64 = parse_num(e)?;
    if !v.is_finite() {
        return err(e.line, format!("`{}` must be finite", e.key));
    }
    Ok(v)
}

fn positive_float(e: &Entry) -> Result<f64, ParseError> {
    let v = parse_float(e)?;
    if !(v > 0.0) {
        return err(e.line, format!("`{}` must be positive, got {v}", e.key));
    }
    Ok(v)
}

fn positive_int(e: &Entry) -> Result<usize, ParseError> {
    let v: usize = parse_num(e)?;
    if v == 0 {
        return err(e.line, format!("`{}` must be positive", e.key));
    }
    Ok(v)
}

/// Strict parse of the line-oriented `key = value` format.
///
/// Top-level keys: `experiment` (required), `N`, `r`, `T`, `n_steps`,
/// `method`, `seed`, `output_dir`, `initial`, `trials`, `levels`,
/// `rank_floor`, `error_tol`, `plot`, `solver` (`auto`, `direct`, `cg`),
/// `cg_max_iter`. Section `[alpha]`: `kind = constant`
/// with `a11`, `a12`, `a22`, or `kind = rotation` with `lambda1`, `lambda2`,
/// `omega`. Section `[source]`: repeated
/// `term = <constant|linear|cosine> c=<v> [omega=<v>] p=<mode> q=<mode>`.
/// `#` starts a comment. Missing keys take the experiment preset; a present
/// `[source]` section replaces the preset source.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut section = Section::Top;
    let mut top: Vec<Entry> = Vec::new();
    let mut alpha: Vec<Entry> = Vec::new();
    let mut source: Vec<Entry> = Vec::new();
    let mut alpha_line = None;
    let mut source_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return err(line, format!("malformed section header `{content}`"));
            };
            section = match name.trim() {
                "alpha" if alpha_line.is_none() => {
                    alpha_line = Some(line);
                    Section::Alpha
                }
                "source" if !source_seen => {
                    source_seen = true;
                    Section::Source
                }
                "alpha" | "source" => return err(line, format!("duplicate section `[{}]`", name.trim())),
                other => return err(line, format!("unknown section `[{other}]`")),
            };
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(line, format!("expected `key = value`, got `{content}`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return err(line, format!("expected `key = value`, got `{content}`"));
        }
        let bucket = match section {
            Section::Top => &mut top,
            Section::Alpha => &mut alpha,
            Section::Source => &mut source,
        };
        if key != "term" && bucket.iter().any(|e| e.key == key) {
            return err(line, format!("duplicate key `{key}`"));
        }
        bucket.push(Entry { line, key, value });
    }

    let Some(exp_entry) = top.iter().find(|e| e.key == "experiment") else {
        return Err(ParseError {
            line: None,
            message: "missing required key `experiment`".into(),
        });
    };
    let Some(experiment) = Experiment::from_name(exp_entry.value) else {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        return err(
            exp_entry.line,
            format!(
                "unknown experiment `{}` (expected one of {})",
                exp_entry.value,
                names.join(", ")
            ),
        );
    };
    let mut cfg = RunConfig::preset(experiment);

    for e in &top {
        match e.key {
            "experiment" => {}
            "N" => cfg.n = positive_int(e)?,
            "r" => cfg.r = positive_int(e)?,
            "T" => cfg.t_final = positive_float(e)?,
            "n_steps" => cfg.n_steps = positive_int(e)?,
            "method" => {
                cfg.method = Method::from_name(e.value).map_or_else(
                    || {
                        err(
                            e.line,
                            format!("unknown method `{}` (expected als, splitting or reference)", e.value),
                        )
                    },
                    Ok,
                )?
            }
            "seed" => cfg.seed = parse_num(e)?,
            "output_dir" => cfg.output_dir = PathBuf::from(e.value),
            "initial" => {
                cfg.initial = match e.value {
                    "modes" => InitialSpec::Modes,
                    "random" => InitialSpec::Random,
                    other => return err(e.line, format!("unknown initial condition `{other}`")),
                }
            }
            "trials" => cfg.trials = positive_int(e)?,
            "levels" => cfg.levels = positive_int(e)?,
            "rank_floor" => {
                let v = positive_float(e)?;
                if v >= 1.0 {
                    return err(e.line, "`rank_floor` must be below 1");
                }
                cfg.rank_floor = v;
            }
            "error_tol" => cfg.error_tol = positive_float(e)?,
            "plot" => cfg.plot = parse_num(e)?,
            "solver" => {
                cfg.solver = match e.value {
                    "auto" => InnerSolver::Auto,
                    "direct" => InnerSolver::Direct,
                    "cg" => InnerSolver::ConjugateGradient,
                    other => {
                        return err(
                            e.line,
                            format!("unknown solver `{other}` (expected auto, direct or cg)"),
                        )
                    }
                }
            }
            "cg_max_iter" => cfg.cg_max_iter = positive_int(e)?,
            other => return err(e.line, format!("unknown key `{other}`")),
        }
    }
    if cfg.r > cfg.n {
        let line = top
            .iter()
            .find(|e| e.key == "r" || e.key == "N")
            .map_or(exp_entry.line, |e| e.line);
        return err(line, format!("rank r = {} exceeds the basis size N = {}", cfg.r, cfg.n));
    }

    if let Some(header) = alpha_line {
        cfg.alpha = parse_alpha(&alpha, header, cfg.alpha)?;
    }
    let model = cfg
        .alpha
        .model()
        .or_else(|_| err(alpha_line.unwrap_or(exp_entry.line), "alpha is not positive definite"))?;
    model.validate(cfg.t_final, 64).or_else(|e| {
        err(
            alpha_line.unwrap_or(exp_entry.line),
            format!("alpha is not admissible: {e}"),
        )
    })?;

    if source_seen {
        cfg.source = source
            .iter()
            .map(|e| match e.key {
                "term" => parse_term(e, cfg.n),
                other => err(e.line, format!("unknown key `{other}` in [source]")),
            })
            .collect::<Result<_, _>>()?;
    } else if let Some(t) = cfg.source.iter().find(|t| t.p > cfg.n || t.q > cfg.n) {
        return err(
            exp_entry.line,
            format!("preset source mode ({}, {}) exceeds N = {}", t.p, t.q, cfg.n),
        );
    }
    Ok(cfg)
}

fn parse_alpha(entries: &[Entry], header: usize, preset: AlphaSpec) -> Result<AlphaSpec, ParseError> {
    let kind = entries.iter().find(|e| e.key == "kind");
    let rotation = match kind.map(|e| e.value) {
        Some("constant") => false,
        Some("rotation") => true,
        Some(other) => return err(kind.unwrap().line, format!("unknown alpha kind `{other}`")),
        None => matches!(preset, AlphaSpec::Rotation { .. }),
    };
    let mut spec = match (rotation, preset) {
        (false, p @ AlphaSpec::Constant { .. }) | (true, p @ AlphaSpec::Rotation { .. }) => p,
        (false, _) => AlphaSpec::Constant {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        },
        (true, _) => AlphaSpec::Rotation {
            lambda1: 1.0,
            lambda2: 0.1,
            omega: 1.0,
        },
    };
    for e in entries {
        match (&mut spec, e.key) {
            (_, "kind") => {}
            (AlphaSpec::Constant { a11, .. }, "a11") => *a11 = parse_float(e)?,
            (AlphaSpec::Constant { a12, .. }, "a12") => *a12 = parse_float(e)?,
            (AlphaSpec::Constant { a22, .. }, "a22") => *a22 = parse_float(e)?,
            (AlphaSpec::Rotation { lambda1, .. }, "lambda1") => *lambda1 = parse_float(e)?,
            (AlphaSpec::Rotation { lambda2, .. }, "lambda2") => *lambda2 = parse_float(e)?,
            (AlphaSpec::Rotation { omega, .. }, "omega") => *omega = parse_float(e)?,
            (_, "a11" | "a12" | "a22" | "lambda1" | "lambda2" | "omega") => {
                let kind = if rotation { "rotation" } else { "constant" };
                return err(e.line, format!("key `{}` does not apply to alpha kind {kind}", e.key));
            }
            (_, other) => return err(e.line, format!("unknown key `{other}` in [alpha]")),
        }
    }
    let spd = match spec {
        AlphaSpec::Constant { a11, a12, a22 } => Alpha::new(a11, a12, a22).eigenvalues().0 > 0.0,
        AlphaSpec::Rotation { lambda1, lambda2, .. } => lambda1 > 0.0 && lambda2 > 0.0,
    };
    if !spd {
        return err(header, "alpha is not positive definite");
    }
    Ok(spec)
}

fn parse_term(e: &Entry, n: usize) -> Result<SourceTermSpec, ParseError> {
    let mut tokens = e.value.split_whitespace();
    let kind = tokens.next().unwrap_or("");
    let (mut c, mut omega, mut p, mut q) = (None, None, None, None);
    for tok in tokens {
        let Some((k, v)) = tok.split_once('=') else {
            return err(e.line, format!("expected `name=value` in source term, got `{tok}`"));
        };
        let sub = Entry {
            line: e.line,
            key: k,
            value: v,
        };
        let slot_taken = match k {
            "c" => c.replace(parse_float(&sub)?).is_some(),
            "omega" => omega.replace(parse_float(&sub)?).is_some(),
            "p" => p.replace(positive_int(&sub)?).is_some(),
            "q" => q.replace(positive_int(&sub)?).is_some(),
            other => return err(e.line, format!("unknown source term field `{other}`")),
        };
        if slot_taken {
            return err(e.line, format!("duplicate source term field `{k}`"));
        }
    }
    let missing = |name: &str| err(e.line, format!("source term needs `{name}=`"));
    let c = match c {
        Some(c) => c,
        None => return missing("c"),
    };
    let profile = match (kind, omega) {
        ("constant", None) => TimeProfile::Constant(c),
        ("linear", None) => TimeProfile::Linear(c),
        ("cosine", Some(omega)) => TimeProfile::Cosine { c, omega },
        ("cosine", None) => return missing("omega"),
        ("constant" | "linear", Some(_)) => return err(e.line, format!("`omega` does not apply to a {kind} term")),
        (other, _) => return err(e.line, format!("unknown source profile `{other}`")),
    };
    let (p, q) = match (p, q) {
        (Some(p), Some(q)) => (p, q),
        (None, _) => return missing("p"),
        (_, None) => return missing("q"),
    };
    if p > n || q > n {
        return err(e.line, format!("source mode ({p}, {q}) exceeds N = {n}"));
    }
    Ok(SourceTermSpec { profile, p, q })
}
